#pragma once

#include "dseno/core/tensor.hpp"

namespace dseno::nn {

/// x * Phi(x), with Phi the standard normal CDF (erf form, no tanh approximation).
double gelu(double x) noexcept;
double gelu_derivative(double x) noexcept;
/// 1 / (1 + e^-x), evaluated without overflow for large |x|.
double sigmoid(double x) noexcept;

template <Scalar T>
Tensor<T> gelu(const Tensor<T>& input);
template <Scalar T>
Tensor<T> gelu_backward(const Tensor<T>& input, const Tensor<T>& grad_out);

template <Scalar T>
Tensor<T> sigmoid(const Tensor<T>& input);
template <Scalar T>
Tensor<T> sigmoid_backward(const Tensor<T>& input, const Tensor<T>& grad_out);

/// (N,C,H,W) -> (N,C,1,1) spatial mean.
template <Scalar T>
Tensor<T> global_avg_pool(const Tensor<T>& input);
template <Scalar T>
Tensor<T> global_avg_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out);

/// out(n,c,:,:) = scale(n,c) * input(n,c,:,:); scale is (N,C,1,1).
template <Scalar T>
Tensor<T> scale_channels(const Tensor<T>& input, const Tensor<T>& scale);

template <Scalar T>
struct ScaleGrads {
    Tensor<T> input;
    Tensor<T> scale;
};

template <Scalar T>
ScaleGrads<T> scale_channels_backward(const Tensor<T>& input, const Tensor<T>& scale,
                                      const Tensor<T>& grad_out);

template <Scalar T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);

}  // namespace dseno::nn
