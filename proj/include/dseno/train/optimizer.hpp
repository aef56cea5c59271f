#pragma once

#include <cstddef>
#include <vector>

#include "dseno/nn/parameter.hpp"

namespace dseno::train {

struct AdamWConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
};

/// Adam with bias correction and decoupled weight decay:
///   theta <- theta - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta)
template <Scalar T>
class AdamW {
public:
    AdamW(std::vector<nn::Parameter<T>*> params, AdamWConfig cfg);

    /// Throws NumericError naming the first parameter group with a non-finite
    /// gradient; no parameter or moment is touched in that case.
    void step(double lr);

    const AdamWConfig& config() const noexcept { return cfg_; }
    const std::vector<nn::Parameter<T>*>& params() const noexcept { return params_; }
    std::size_t steps() const noexcept { return steps_; }
    void set_steps(std::size_t n) noexcept { steps_ = n; }
    std::vector<Tensor<T>>& first_moments() noexcept { return m_; }
    std::vector<Tensor<T>>& second_moments() noexcept { return v_; }
    const std::vector<Tensor<T>>& first_moments() const noexcept { return m_; }
    const std::vector<Tensor<T>>& second_moments() const noexcept { return v_; }

private:
    std::vector<nn::Parameter<T>*> params_;
    AdamWConfig cfg_;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
    std::size_t steps_ = 0;
};

/// lr0 * gamma^floor(epoch / step_size).
double step_lr(std::size_t epoch, double lr0, std::size_t step_size, double gamma);

/// Scales every gradient so their joint L2 norm is at most max_norm. Returns
/// the norm before scaling.
template <Scalar T>
double clip_grad_norm(const std::vector<nn::Parameter<T>*>& params, double max_norm);

}  // namespace dseno::train
