#include "dseno/train/optimizer.hpp"

#include <cmath>

namespace dseno::train {

template <Scalar T>
AdamW<T>::AdamW(std::vector<nn::Parameter<T>*> params, AdamWConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    if (!(cfg_.beta1 >= 0 && cfg_.beta1 < 1 && cfg_.beta2 >= 0 && cfg_.beta2 < 1)) {
        throw ConfigError("AdamW betas must lie in [0, 1)");
    }
    if (!(cfg_.eps > 0) || !(cfg_.weight_decay >= 0)) throw ConfigError("AdamW needs eps > 0 and weight_decay >= 0");
    for (const nn::Parameter<T>* p : params_) {
        m_.emplace_back(p->value.shape());
        v_.emplace_back(p->value.shape());
    }
}

template <Scalar T>
void AdamW<T>::step(double lr) {
    for (const nn::Parameter<T>* p : params_) {
        if (p->grad.shape() != p->value.shape()) {
            throw ConfigError(Errc::shape_mismatch, "gradient of " + p->name + " has the wrong shape");
        }
        if (!p->grad.all_finite()) throw NumericError(Errc::non_finite, "non-finite gradient in " + p->name);
    }
    ++steps_;
    const double b1 = cfg_.beta1, b2 = cfg_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
    for (std::size_t k = 0; k < params_.size(); ++k) {
        auto theta = params_[k]->value.data();
        auto g = params_[k]->grad.data();
        auto m = m_[k].data();
        auto v = v_[k].data();
        for (std::size_t i = 0; i < theta.size(); ++i) {
            const double gi = g[i];
            const double mi = b1 * m[i] + (1.0 - b1) * gi;
            const double vi = b2 * v[i] + (1.0 - b2) * gi * gi;
            m[i] = static_cast<T>(mi);
            v[i] = static_cast<T>(vi);
            const double update = (mi / c1) / (std::sqrt(vi / c2) + cfg_.eps) + cfg_.weight_decay * theta[i];
            theta[i] = static_cast<T>(theta[i] - lr * update);
        }
    }
}

double step_lr(std::size_t epoch, double lr0, std::size_t step_size, double gamma) {
    if (step_size == 0) throw ConfigError("lr step_size must be positive");
    return lr0 * std::pow(gamma, static_cast<double>(epoch / step_size));
}

template <Scalar T>
double clip_grad_norm(const std::vector<nn::Parameter<T>*>& params, double max_norm) {
    double sq = 0;
    for (const nn::Parameter<T>* p : params)
        for (T g : p->grad.data()) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (nn::Parameter<T>* p : params)
            for (T& g : p->grad.data()) g = static_cast<T>(g * scale);
    }
    return norm;
}

template class AdamW<float>;
template class AdamW<double>;
template double clip_grad_norm(const std::vector<nn::Parameter<float>*>&, double);
template double clip_grad_norm(const std::vector<nn::Parameter<double>*>&, double);

}  // namespace dseno::train
