#pragma once

#include <optional>
#include <string>

#include "dseno/core/tensor.hpp"
#include "dseno/nn/parameter.hpp"

namespace dseno::nn {

/// Per-axis dilation. `x` spaces taps along the width axis, `y` along the height axis.
struct Dilation {
    int x = 1;
    int y = 1;
    friend bool operator==(const Dilation&, const Dilation&) = default;
};

/// Rows (top/bottom) and columns (left/right) of padding on each side.
struct Padding {
    int y = 0;
    int x = 0;
    friend bool operator==(const Padding&, const Padding&) = default;
};

enum class PaddingMode { zero, circular };

std::string to_string(PaddingMode mode);
PaddingMode padding_mode_from_string(const std::string& text);

/// Weights, optional bias and tap geometry of one resolution-preserving 2-D
/// convolution. Padding is always dilation * (k - 1) / 2 per axis, so the
/// spatial extent of the output equals the input.
template <Scalar T>
class ConvKernel {
public:
    /// Zero-initialised kernel of shape (out, in, kh, kw).
    ConvKernel(std::string name, std::size_t out_channels, std::size_t in_channels,
               std::size_t kernel_h, std::size_t kernel_w, bool with_bias, Dilation dilation,
               PaddingMode mode = PaddingMode::zero);

    ConvKernel(Tensor<T> weight, std::optional<Tensor<T>> bias, Dilation dilation,
               PaddingMode mode = PaddingMode::zero, std::string name = "conv");

    std::size_t out_channels() const noexcept { return weight.value.dim(0); }
    std::size_t in_channels() const noexcept { return weight.value.dim(1); }
    std::size_t kernel_h() const noexcept { return weight.value.dim(2); }
    std::size_t kernel_w() const noexcept { return weight.value.dim(3); }
    Dilation dilation() const noexcept { return dilation_; }
    PaddingMode padding_mode() const noexcept { return mode_; }
    Padding padding() const noexcept;
    bool has_bias() const noexcept { return bias.has_value(); }

    /// Resets weights and bias to U(-b, b) with b = sqrt(1 / fan_in).
    void init_uniform(std::mt19937_64& rng);

    Parameter<T> weight;
    std::optional<Parameter<T>> bias;

private:
    void validate() const;

    Dilation dilation_;
    PaddingMode mode_;
};

template <Scalar T>
struct ConvGrads {
    Tensor<T> input;
    Tensor<T> weight;
    std::optional<Tensor<T>> bias;
};

/// out(n,o,y,x) = bias(o) + sum_{c,i,j} in(n,c, y + ly*(i - kh/2), x + lx*(j - kw/2)) * w(o,c,i,j)
template <Scalar T>
Tensor<T> conv2d_dilated_forward(const Tensor<T>& input, const ConvKernel<T>& kernel);

/// Exact adjoints of conv2d_dilated_forward with respect to input, weight and bias.
template <Scalar T>
ConvGrads<T> conv2d_dilated_backward(const Tensor<T>& input, const ConvKernel<T>& kernel,
                                     const Tensor<T>& grad_out);

/// Runs conv2d_dilated_backward, adds the weight/bias gradients into the
/// kernel's parameter buffers and returns the input gradient.
template <Scalar T>
Tensor<T> accumulate_conv_backward(ConvKernel<T>& kernel, const Tensor<T>& input,
                                   const Tensor<T>& grad_out);

/// Per-pixel affine channel map; weight is (C_out, C_in), bias (C_out).
template <Scalar T>
Tensor<T> pointwise_conv(const Tensor<T>& input, const Tensor<T>& weight,
                         const std::type_identity_t<Tensor<T>>* bias);

template <Scalar T>
ConvGrads<T> pointwise_conv_backward(const Tensor<T>& input, const Tensor<T>& weight,
                                     bool has_bias, const Tensor<T>& grad_out);

/// A bias-carrying pointwise layer held as parameters.
template <Scalar T>
class Pointwise {
public:
    Pointwise(std::string name, std::size_t in_channels, std::size_t out_channels, bool with_bias = true);

    std::size_t in_channels() const noexcept { return weight.value.dim(1); }
    std::size_t out_channels() const noexcept { return weight.value.dim(0); }

    void init_uniform(std::mt19937_64& rng);

    Tensor<T> forward(const Tensor<T>& input) const;
    /// Accumulates parameter gradients; returns the input gradient.
    Tensor<T> backward(const Tensor<T>& input, const Tensor<T>& grad_out);

    Parameter<T> weight;
    std::optional<Parameter<T>> bias;
};

}  // namespace dseno::nn
