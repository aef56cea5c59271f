#include "dseno/train/loss.hpp"

#include <cmath>
#include <iostream>
#include <limits>

namespace dseno::train {

namespace {

WarningHandler& handler() {
    static WarningHandler h;
    return h;
}

template <Scalar T>
void check_pair(const Tensor<T>& pred, const Tensor<T>& target) {
    if (pred.shape() != target.shape() || pred.rank() < 1) {
        throw ConfigError(Errc::shape_mismatch, "relative L2 of " + shape_string(pred.shape()) + " against " +
                                                    shape_string(target.shape()));
    }
}

struct Norms {
    double diff = 0;
    double target = 0;
};

template <Scalar T>
Norms sample_norms(const Tensor<T>& pred, const Tensor<T>& target, std::size_t n) {
    const std::size_t stride = pred.size() / pred.dim(0);
    const T* p = pred.raw() + n * stride;
    const T* t = target.raw() + n * stride;
    double dd = 0, tt = 0;
    for (std::size_t i = 0; i < stride; ++i) {
        const double d = static_cast<double>(p[i]) - static_cast<double>(t[i]);
        dd += d * d;
        tt += static_cast<double>(t[i]) * static_cast<double>(t[i]);
    }
    return {std::sqrt(dd), std::sqrt(tt)};
}

void skip_warning(std::size_t n) {
    warn("relative L2: sample " + std::to_string(n) + " has a zero-norm target and is skipped");
}

}  // namespace

void set_warning_handler(WarningHandler h) { handler() = std::move(h); }

void warn(const std::string& message) {
    if (handler()) handler()(message);
    else std::cerr << "warning: " << message << '\n';
}

template <Scalar T>
std::vector<double> relative_l2_per_sample(const Tensor<T>& pred, const Tensor<T>& target) {
    check_pair(pred, target);
    std::vector<double> out(pred.dim(0));
    for (std::size_t n = 0; n < out.size(); ++n) {
        const Norms s = sample_norms(pred, target, n);
        out[n] = s.target > 0 ? s.diff / s.target : std::numeric_limits<double>::quiet_NaN();
    }
    return out;
}

template <Scalar T>
double relative_l2(const Tensor<T>& pred, const Tensor<T>& target, std::size_t* skipped) {
    const std::vector<double> e = relative_l2_per_sample(pred, target);
    double sum = 0;
    std::size_t used = 0;
    for (std::size_t n = 0; n < e.size(); ++n) {
        if (std::isnan(e[n]) && sample_norms(pred, target, n).target == 0) {
            skip_warning(n);
            continue;
        }
        sum += e[n];
        ++used;
    }
    if (skipped) *skipped = e.size() - used;
    if (used == 0) throw DataError("relative L2: every target in the batch has zero norm");
    return sum / static_cast<double>(used);
}

template <Scalar T>
LossAndGrad<T> relative_l2_with_grad(const Tensor<T>& pred, const Tensor<T>& target) {
    check_pair(pred, target);
    const std::size_t batch = pred.dim(0), stride = pred.size() / batch;
    std::vector<Norms> norms(batch);
    std::size_t used = 0;
    for (std::size_t n = 0; n < batch; ++n) {
        norms[n] = sample_norms(pred, target, n);
        // NaN norms are kept so a corrupt batch surfaces as a non-finite loss.
        if (norms[n].target == 0) skip_warning(n);
        else ++used;
    }
    if (used == 0) throw DataError("relative L2: every target in the batch has zero norm");
    LossAndGrad<T> out{0.0, Tensor<T>(pred.shape())};
    const double inv_used = 1.0 / static_cast<double>(used);
    for (std::size_t n = 0; n < batch; ++n) {
        const Norms& s = norms[n];
        if (s.target == 0) continue;
        out.value += s.diff / s.target * inv_used;
        if (s.diff == 0) continue;
        const double k = inv_used / (s.diff * s.target);
        const T* p = pred.raw() + n * stride;
        const T* t = target.raw() + n * stride;
        T* g = out.grad.raw() + n * stride;
        for (std::size_t i = 0; i < stride; ++i) {
            g[i] = static_cast<T>(k * (static_cast<double>(p[i]) - static_cast<double>(t[i])));
        }
    }
    return out;
}

#define DSENO_INSTANTIATE(T)                                                                      \
    template double relative_l2(const Tensor<T>&, const Tensor<T>&, std::size_t*);                \
    template std::vector<double> relative_l2_per_sample(const Tensor<T>&, const Tensor<T>&);      \
    template LossAndGrad<T> relative_l2_with_grad(const Tensor<T>&, const Tensor<T>&);

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::train
