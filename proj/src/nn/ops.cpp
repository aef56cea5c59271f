#include "dseno/nn/ops.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>

namespace dseno::nn {

double gelu(double x) noexcept {
    return 0.5 * x * std::erfc(-x / std::numbers::sqrt2);
}

double gelu_derivative(double x) noexcept {
    const double cdf = 0.5 * std::erfc(-x / std::numbers::sqrt2);
    const double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
    return cdf + x * pdf;
}

double sigmoid(double x) noexcept {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

constexpr float kInvSqrt2 = 1.0f / std::numbers::sqrt2_v<float>;
constexpr float kPdfScale = std::numbers::inv_sqrtpi_v<float> / std::numbers::sqrt2_v<float>;

Eigen::Map<const Eigen::ArrayXf> as_array(const Tensor<float>& t) {
    return {t.raw(), static_cast<Eigen::Index>(t.size())};
}

Eigen::Map<Eigen::ArrayXf> as_array(Tensor<float>& t) {
    return {t.raw(), static_cast<Eigen::Index>(t.size())};
}

template <typename T, typename F>
Tensor<T> map(const Tensor<T>& input, F f) {
    Tensor<T> out(input.shape());
    auto src = input.data();
    auto dst = out.data();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(f(static_cast<double>(src[i])));
    return out;
}

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
    if (a.shape() != b.shape()) {
        throw ConfigError(Errc::shape_mismatch, std::string(what) + ": " + shape_string(a.shape()) +
                                                    " vs " + shape_string(b.shape()));
    }
}

}  // namespace

template <Scalar T>
Tensor<T> gelu(const Tensor<T>& input) {
    if constexpr (std::is_same_v<T, float>) {
        // Eigen's vectorized erf; 0.5 x (1 + erf) only loses accuracy where gelu is below float epsilon.
        Tensor<float> out(input.shape());
        const auto x = as_array(input);
        as_array(out) = 0.5f * x * (1.0f + (x * kInvSqrt2).erf());
        return out;
    } else {
        return map(input, [](double x) { return gelu(x); });
    }
}

template <Scalar T>
Tensor<T> gelu_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
    require_same_shape(input, grad_out, "gelu backward");
    Tensor<T> out(input.shape());
    if constexpr (std::is_same_v<T, float>) {
        const auto x = as_array(input);
        as_array(out) = (0.5f * (1.0f + (x * kInvSqrt2).erf()) + x * kPdfScale * (-0.5f * x.square()).exp()) *
                        as_array(grad_out);
    } else {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = gelu_derivative(input[i]) * grad_out[i];
    }
    return out;
}

template <Scalar T>
Tensor<T> sigmoid(const Tensor<T>& input) {
    return map(input, [](double x) { return sigmoid(x); });
}

template <Scalar T>
Tensor<T> sigmoid_backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
    require_same_shape(input, grad_out, "sigmoid backward");
    Tensor<T> out(input.shape());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double s = sigmoid(static_cast<double>(input[i]));
        out[i] = static_cast<T>(s * (1.0 - s) * grad_out[i]);
    }
    return out;
}

template <Scalar T>
Tensor<T> global_avg_pool(const Tensor<T>& input) {
    require_rank4(input, "global_avg_pool input");
    const std::size_t n = input.dim(0), c = input.dim(1);
    const double inv = 1.0 / static_cast<double>(input.dim(2) * input.dim(3));
    Tensor<T> out({n, c, 1, 1});
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            double acc = 0.0;
            for (T v : input.plane(s, ch)) acc += v;
            out(s, ch, 0, 0) = static_cast<T>(acc * inv);
        }
    }
    return out;
}

template <Scalar T>
Tensor<T> global_avg_pool_backward(const Shape& input_shape, const Tensor<T>& grad_out) {
    if (input_shape.size() != 4 || grad_out.shape() != Shape{input_shape[0], input_shape[1], 1, 1}) {
        throw ConfigError(Errc::shape_mismatch, "global_avg_pool backward: grad " +
                                                    shape_string(grad_out.shape()) + " for input " +
                                                    shape_string(input_shape));
    }
    Tensor<T> out(input_shape);
    const T inv = static_cast<T>(1.0 / static_cast<double>(input_shape[2] * input_shape[3]));
    for (std::size_t s = 0; s < input_shape[0]; ++s) {
        for (std::size_t c = 0; c < input_shape[1]; ++c) {
            const T g = grad_out(s, c, 0, 0) * inv;
            for (T& v : out.plane(s, c)) v = g;
        }
    }
    return out;
}

template <Scalar T>
Tensor<T> scale_channels(const Tensor<T>& input, const Tensor<T>& scale) {
    require_rank4(input, "scale_channels input");
    if (scale.shape() != Shape{input.dim(0), input.dim(1), 1, 1}) {
        throw ConfigError(Errc::shape_mismatch, "channel scale " + shape_string(scale.shape()) +
                                                    " does not match " + shape_string(input.shape()));
    }
    Tensor<T> out(input.shape());
    for (std::size_t s = 0; s < input.dim(0); ++s) {
        for (std::size_t c = 0; c < input.dim(1); ++c) {
            const T k = scale(s, c, 0, 0);
            auto src = input.plane(s, c);
            auto dst = out.plane(s, c);
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = k * src[i];
        }
    }
    return out;
}

template <Scalar T>
ScaleGrads<T> scale_channels_backward(const Tensor<T>& input, const Tensor<T>& scale,
                                      const Tensor<T>& grad_out) {
    require_same_shape(input, grad_out, "scale_channels backward");
    ScaleGrads<T> g{scale_channels(grad_out, scale), Tensor<T>(scale.shape())};
    for (std::size_t s = 0; s < input.dim(0); ++s) {
        for (std::size_t c = 0; c < input.dim(1); ++c) {
            auto u = input.plane(s, c);
            auto go = grad_out.plane(s, c);
            T acc{0};
            for (std::size_t i = 0; i < u.size(); ++i) acc += u[i] * go[i];
            g.scale(s, c, 0, 0) = acc;
        }
    }
    return g;
}

template <Scalar T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    Tensor<T> out = a;
    add_inplace(out, b);
    return out;
}

#define DSENO_INSTANTIATE(T)                                                                        \
    template Tensor<T> gelu(const Tensor<T>&);                                                      \
    template Tensor<T> gelu_backward(const Tensor<T>&, const Tensor<T>&);                           \
    template Tensor<T> sigmoid(const Tensor<T>&);                                                   \
    template Tensor<T> sigmoid_backward(const Tensor<T>&, const Tensor<T>&);                        \
    template Tensor<T> global_avg_pool(const Tensor<T>&);                                           \
    template Tensor<T> global_avg_pool_backward(const Shape&, const Tensor<T>&);                    \
    template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);                          \
    template ScaleGrads<T> scale_channels_backward(const Tensor<T>&, const Tensor<T>&,               \
                                                   const Tensor<T>&);                               \
    template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::nn
