#include "dseno/nn/conv.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

#include "gemm.hpp"

namespace dseno::nn {

std::string to_string(PaddingMode mode) {
    return mode == PaddingMode::zero ? "zero" : "circular";
}

PaddingMode padding_mode_from_string(const std::string& text) {
    if (text == "zero") return PaddingMode::zero;
    if (text == "circular") return PaddingMode::circular;
    throw ConfigError("unknown padding mode '" + text + "' (expected zero or circular)");
}

namespace {

long floor_mod(long a, long m) {
    const long r = a % m;
    return r < 0 ? r + m : r;
}

// Source offset of tap (i, j) relative to the output pixel.
struct TapOffset {
    long dy;
    long dx;
};

TapOffset tap_offset(std::size_t i, std::size_t j, std::size_t kh, std::size_t kw, Dilation d) {
    return {static_cast<long>(d.y) * (static_cast<long>(i) - static_cast<long>(kh / 2)),
            static_cast<long>(d.x) * (static_cast<long>(j) - static_cast<long>(kw / 2))};
}

struct Geometry {
    std::size_t channels, height, width, kh, kw;
    Dilation dilation;
    PaddingMode mode;
    std::size_t plane() const { return height * width; }
    std::size_t rows() const { return channels * kh * kw; }
};

// Pixels per im2col tile; keeps a tile of the column matrix resident in L2.
constexpr std::size_t kTileBytes = std::size_t{1} << 20;

template <typename T>
std::size_t tile_pixels(const Geometry& g) {
    const std::size_t fit = kTileBytes / (sizeof(T) * g.rows());
    return std::clamp<std::size_t>(fit - fit % 16, 64, g.plane());
}

// cols(r, p - p0) = in(c, y + dy, x + dx) for pixels p = y*W + x in [p0, p0 + len),
// with r = (c*kh + i)*kw + j. The tile has row stride len.
template <typename T>
void im2col(const T* in, const Geometry& g, std::size_t p0, std::size_t len, T* cols) {
    const long h = static_cast<long>(g.height);
    const long w = static_cast<long>(g.width);
    for (std::size_t c = 0; c < g.channels; ++c) {
        const T* src = in + c * g.plane();
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const auto [dy, dx] = tap_offset(i, j, g.kh, g.kw, g.dilation);
                T* row = cols + ((c * g.kh + i) * g.kw + j) * len;
                for (std::size_t p = p0; p < p0 + len;) {
                    const long y = static_cast<long>(p / g.width);
                    const long xa = static_cast<long>(p % g.width);
                    const long xb = std::min<long>(w, xa + static_cast<long>(p0 + len - p));
                    T* dst = row + (p - p0) - xa;
                    p += static_cast<std::size_t>(xb - xa);
                    long sy = y + dy;
                    if (g.mode == PaddingMode::zero) {
                        if (sy < 0 || sy >= h) {
                            std::fill(dst + xa, dst + xb, T{0});
                            continue;
                        }
                        const long x0 = std::clamp(-dx, xa, xb);
                        const long x1 = std::clamp(w - dx, xa, xb);
                        std::fill(dst + xa, dst + x0, T{0});
                        if (x1 > x0) std::memcpy(dst + x0, src + sy * w + x0 + dx, sizeof(T) * (x1 - x0));
                        std::fill(dst + std::max(x0, x1), dst + xb, T{0});
                    } else {
                        const T* line = src + floor_mod(sy, h) * w;
                        const long s0 = floor_mod(dx, w);
                        // x + s0 wraps once at x = w - s0.
                        const long xw = std::clamp(w - s0, xa, xb);
                        if (xw > xa) std::memcpy(dst + xa, line + xa + s0, sizeof(T) * (xw - xa));
                        if (xb > xw) std::memcpy(dst + xw, line + xw + s0 - w, sizeof(T) * (xb - xw));
                    }
                }
            }
        }
    }
}

// Adjoint of im2col: scatter-adds every tile entry back to its source pixel.
template <typename T>
void col2im(const T* cols, const Geometry& g, std::size_t p0, std::size_t len, T* out) {
    const long h = static_cast<long>(g.height);
    const long w = static_cast<long>(g.width);
    for (std::size_t c = 0; c < g.channels; ++c) {
        T* dst_plane = out + c * g.plane();
        for (std::size_t i = 0; i < g.kh; ++i) {
            for (std::size_t j = 0; j < g.kw; ++j) {
                const auto [dy, dx] = tap_offset(i, j, g.kh, g.kw, g.dilation);
                const T* row = cols + ((c * g.kh + i) * g.kw + j) * len;
                for (std::size_t p = p0; p < p0 + len;) {
                    const long y = static_cast<long>(p / g.width);
                    const long xa = static_cast<long>(p % g.width);
                    const long xb = std::min<long>(w, xa + static_cast<long>(p0 + len - p));
                    const T* src = row + (p - p0) - xa;
                    p += static_cast<std::size_t>(xb - xa);
                    long sy = y + dy;
                    if (g.mode == PaddingMode::zero) {
                        if (sy < 0 || sy >= h) continue;
                        const long x0 = std::clamp(-dx, xa, xb);
                        const long x1 = std::clamp(w - dx, xa, xb);
                        T* line = dst_plane + sy * w + dx;
                        for (long x = x0; x < x1; ++x) line[x] += src[x];
                    } else {
                        T* line = dst_plane + floor_mod(sy, h) * w;
                        const long s0 = floor_mod(dx, w);
                        const long xw = std::clamp(w - s0, xa, xb);
                        for (long x = xa; x < xw; ++x) line[x + s0] += src[x];
                        for (long x = xw; x < xb; ++x) line[x + s0 - w] += src[x];
                    }
                }
            }
        }
    }
}

template <typename T>
void check_conv_input(const Tensor<T>& input, const ConvKernel<T>& kernel) {
    require_rank4(input, "conv2d input");
    if (input.dim(1) != kernel.in_channels()) {
        throw ConfigError(Errc::shape_mismatch, "conv2d '" + kernel.weight.name + "' expects " +
                                                    std::to_string(kernel.in_channels()) +
                                                    " input channels, got " + shape_string(input.shape()));
    }
}

template <typename T>
void add_bias(T* out, const T* bias, std::size_t channels, std::size_t plane) {
    for (std::size_t o = 0; o < channels; ++o) {
        T* dst = out + o * plane;
        const T b = bias[o];
        for (std::size_t p = 0; p < plane; ++p) dst[p] += b;
    }
}

template <typename T>
void sum_bias_grad(const Tensor<T>& grad_out, Tensor<T>& grad_bias) {
    const std::size_t n = grad_out.dim(0), c = grad_out.dim(1);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t o = 0; o < c; ++o) {
            T acc{0};
            for (T v : grad_out.plane(s, o)) acc += v;
            grad_bias[o] += acc;
        }
    }
}

}  // namespace

template <Scalar T>
ConvKernel<T>::ConvKernel(std::string name, std::size_t out_channels, std::size_t in_channels,
                          std::size_t kernel_h, std::size_t kernel_w, bool with_bias, Dilation dilation,
                          PaddingMode mode)
    : weight(name + ".weight", Tensor<T>({out_channels, in_channels, kernel_h, kernel_w})),
      dilation_(dilation),
      mode_(mode) {
    if (with_bias) bias.emplace(name + ".bias", Tensor<T>({out_channels}));
    validate();
}

template <Scalar T>
ConvKernel<T>::ConvKernel(Tensor<T> weight_, std::optional<Tensor<T>> bias_, Dilation dilation,
                          PaddingMode mode, std::string name)
    : weight(name + ".weight", std::move(weight_)), dilation_(dilation), mode_(mode) {
    if (bias_) bias.emplace(name + ".bias", std::move(*bias_));
    validate();
}

template <Scalar T>
void ConvKernel<T>::validate() const {
    const Tensor<T>& w = weight.value;
    if (w.rank() != 4) {
        throw ConfigError(Errc::shape_mismatch,
                          "conv weight must be (C_out, C_in, k_h, k_w), got " + shape_string(w.shape()));
    }
    if (w.dim(2) % 2 == 0 || w.dim(3) % 2 == 0) {
        throw ConfigError(Errc::even_kernel, "conv kernel " + std::to_string(w.dim(2)) + "x" +
                                                 std::to_string(w.dim(3)) +
                                                 " must have odd extents to preserve resolution");
    }
    if (dilation_.x <= 0 || dilation_.y <= 0) {
        throw ConfigError(Errc::bad_dilation, "conv dilation must be positive, got (" +
                                                  std::to_string(dilation_.x) + "," +
                                                  std::to_string(dilation_.y) + ")");
    }
    if (bias && (bias->value.rank() != 1 || bias->value.dim(0) != w.dim(0))) {
        throw ConfigError(Errc::shape_mismatch, "conv bias must be (" + std::to_string(w.dim(0)) +
                                                    "), got " + shape_string(bias->value.shape()));
    }
}

template <Scalar T>
Padding ConvKernel<T>::padding() const noexcept {
    return {dilation_.y * static_cast<int>(kernel_h() - 1) / 2,
            dilation_.x * static_cast<int>(kernel_w() - 1) / 2};
}

template <Scalar T>
void ConvKernel<T>::init_uniform(std::mt19937_64& rng) {
    const double fan_in = static_cast<double>(in_channels() * kernel_h() * kernel_w());
    const double bound = std::sqrt(1.0 / fan_in);
    fill_uniform(weight.value, bound, rng);
    if (bias) fill_uniform(bias->value, bound, rng);
}

template <Scalar T>
Tensor<T> conv2d_dilated_forward(const Tensor<T>& input, const ConvKernel<T>& kernel) {
    check_conv_input(input, kernel);
    const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3);
    const Geometry g{kernel.in_channels(), h, w, kernel.kernel_h(), kernel.kernel_w(),
                     kernel.dilation(), kernel.padding_mode()};
    const std::size_t c_out = kernel.out_channels();
    const bool pointwise = g.kh == 1 && g.kw == 1;

    Tensor<T> out({n, c_out, h, w});
    const std::size_t tile = tile_pixels<T>(g);
    typename Tensor<T>::Storage cols(pointwise ? 0 : g.rows() * tile);
    const T* weight = kernel.weight.value.raw();
    for (std::size_t s = 0; s < n; ++s) {
        const T* in_s = input.raw() + s * g.channels * g.plane();
        T* out_s = out.raw() + s * c_out * g.plane();
        if (pointwise) {
            detail::gemm_ab(c_out, g.plane(), g.rows(), weight, in_s, out_s, false);
        } else {
            for (std::size_t p0 = 0; p0 < g.plane(); p0 += tile) {
                const std::size_t len = std::min(tile, g.plane() - p0);
                im2col(in_s, g, p0, len, cols.data());
                detail::gemm_ab_tile(c_out, len, g.rows(), weight, cols.data(), out_s + p0, g.plane());
            }
        }
        if (kernel.bias) add_bias(out_s, kernel.bias->value.raw(), c_out, g.plane());
    }
    require_finite(out, "conv2d output");
    return out;
}

template <Scalar T>
ConvGrads<T> conv2d_dilated_backward(const Tensor<T>& input, const ConvKernel<T>& kernel,
                                     const Tensor<T>& grad_out) {
    check_conv_input(input, kernel);
    const std::size_t n = input.dim(0), h = input.dim(2), w = input.dim(3);
    const std::size_t c_out = kernel.out_channels();
    if (grad_out.shape() != Shape{n, c_out, h, w}) {
        throw ConfigError(Errc::shape_mismatch, "conv2d grad_out " + shape_string(grad_out.shape()) +
                                                    " does not match output shape " +
                                                    shape_string({n, c_out, h, w}));
    }
    const Geometry g{kernel.in_channels(), h, w, kernel.kernel_h(), kernel.kernel_w(),
                     kernel.dilation(), kernel.padding_mode()};
    const bool pointwise = g.kh == 1 && g.kw == 1;

    ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(kernel.weight.value.shape()), std::nullopt};
    const std::size_t tile = tile_pixels<T>(g);
    typename Tensor<T>::Storage cols(pointwise ? 0 : g.rows() * tile);
    typename Tensor<T>::Storage grad_cols(pointwise ? 0 : g.rows() * tile);
    const T* weight = kernel.weight.value.raw();
    for (std::size_t s = 0; s < n; ++s) {
        const T* in_s = input.raw() + s * g.channels * g.plane();
        const T* gout_s = grad_out.raw() + s * c_out * g.plane();
        T* gin_s = grads.input.raw() + s * g.channels * g.plane();
        if (pointwise) {
            detail::gemm_abt(c_out, g.rows(), g.plane(), gout_s, in_s, grads.weight.raw(), s > 0);
            detail::gemm_atb(g.rows(), g.plane(), c_out, weight, gout_s, gin_s, false);
            continue;
        }
        for (std::size_t p0 = 0; p0 < g.plane(); p0 += tile) {
            const std::size_t len = std::min(tile, g.plane() - p0);
            im2col(in_s, g, p0, len, cols.data());
            detail::gemm_abt_tile(c_out, g.rows(), len, gout_s + p0, g.plane(), cols.data(),
                                  grads.weight.raw(), s > 0 || p0 > 0);
            detail::gemm_atb_tile(g.rows(), len, c_out, weight, gout_s + p0, g.plane(), grad_cols.data());
            col2im(grad_cols.data(), g, p0, len, gin_s);
        }
    }
    if (kernel.bias) {
        grads.bias.emplace(Shape{c_out});
        sum_bias_grad(grad_out, *grads.bias);
    }
    require_finite(grads.input, "conv2d input gradient");
    require_finite(grads.weight, "conv2d weight gradient");
    return grads;
}

template <Scalar T>
Tensor<T> accumulate_conv_backward(ConvKernel<T>& kernel, const Tensor<T>& input,
                                   const Tensor<T>& grad_out) {
    ConvGrads<T> g = conv2d_dilated_backward(input, kernel, grad_out);
    add_inplace(kernel.weight.grad, g.weight);
    if (kernel.bias) add_inplace(kernel.bias->grad, *g.bias);
    return std::move(g.input);
}

namespace {

template <typename T>
void check_pointwise(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias) {
    require_rank4(input, "pointwise input");
    if (weight.rank() != 2 || weight.dim(1) != input.dim(1)) {
        throw ConfigError(Errc::shape_mismatch, "pointwise weight " + shape_string(weight.shape()) +
                                                    " does not accept input " + shape_string(input.shape()));
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != weight.dim(0))) {
        throw ConfigError(Errc::shape_mismatch, "pointwise bias " + shape_string(bias->shape()) +
                                                    " does not match weight " + shape_string(weight.shape()));
    }
}

}  // namespace

template <Scalar T>
Tensor<T> pointwise_conv(const Tensor<T>& input, const Tensor<T>& weight,
                         const std::type_identity_t<Tensor<T>>* bias) {
    check_pointwise(input, weight, bias);
    const std::size_t n = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t c_out = weight.dim(0), plane = h * w;
    Tensor<T> out({n, c_out, h, w});
    for (std::size_t s = 0; s < n; ++s) {
        T* out_s = out.raw() + s * c_out * plane;
        detail::gemm_ab(c_out, plane, c_in, weight.raw(), input.raw() + s * c_in * plane, out_s, false);
        if (bias) add_bias(out_s, bias->raw(), c_out, plane);
    }
    require_finite(out, "pointwise output");
    return out;
}

template <Scalar T>
ConvGrads<T> pointwise_conv_backward(const Tensor<T>& input, const Tensor<T>& weight, bool has_bias,
                                     const Tensor<T>& grad_out) {
    check_pointwise<T>(input, weight, nullptr);
    const std::size_t n = input.dim(0), c_in = input.dim(1), h = input.dim(2), w = input.dim(3);
    const std::size_t c_out = weight.dim(0), plane = h * w;
    if (grad_out.shape() != Shape{n, c_out, h, w}) {
        throw ConfigError(Errc::shape_mismatch, "pointwise grad_out " + shape_string(grad_out.shape()) +
                                                    " does not match output " + shape_string({n, c_out, h, w}));
    }
    ConvGrads<T> grads{Tensor<T>(input.shape()), Tensor<T>(weight.shape()), std::nullopt};
    for (std::size_t s = 0; s < n; ++s) {
        const T* in_s = input.raw() + s * c_in * plane;
        const T* gout_s = grad_out.raw() + s * c_out * plane;
        detail::gemm_abt(c_out, c_in, plane, gout_s, in_s, grads.weight.raw(), s > 0);
        detail::gemm_atb(c_in, plane, c_out, weight.raw(), gout_s, grads.input.raw() + s * c_in * plane, false);
    }
    if (has_bias) {
        grads.bias.emplace(Shape{c_out});
        sum_bias_grad(grad_out, *grads.bias);
    }
    require_finite(grads.input, "pointwise input gradient");
    return grads;
}

template <Scalar T>
Pointwise<T>::Pointwise(std::string name, std::size_t in_channels, std::size_t out_channels, bool with_bias)
    : weight(name + ".weight", Tensor<T>({out_channels, in_channels})) {
    if (with_bias) bias.emplace(name + ".bias", Tensor<T>({out_channels}));
}

template <Scalar T>
void Pointwise<T>::init_uniform(std::mt19937_64& rng) {
    const double bound = std::sqrt(1.0 / static_cast<double>(in_channels()));
    fill_uniform(weight.value, bound, rng);
    if (bias) fill_uniform(bias->value, bound, rng);
}

template <Scalar T>
Tensor<T> Pointwise<T>::forward(const Tensor<T>& input) const {
    return pointwise_conv(input, weight.value, bias ? &bias->value : nullptr);
}

template <Scalar T>
Tensor<T> Pointwise<T>::backward(const Tensor<T>& input, const Tensor<T>& grad_out) {
    ConvGrads<T> g = pointwise_conv_backward(input, weight.value, bias.has_value(), grad_out);
    add_inplace(weight.grad, g.weight);
    if (bias) add_inplace(bias->grad, *g.bias);
    return std::move(g.input);
}

#define DSENO_INSTANTIATE(T)                                                                         \
    template class ConvKernel<T>;                                                                    \
    template class Pointwise<T>;                                                                     \
    template Tensor<T> conv2d_dilated_forward(const Tensor<T>&, const ConvKernel<T>&);               \
    template ConvGrads<T> conv2d_dilated_backward(const Tensor<T>&, const ConvKernel<T>&,            \
                                                  const Tensor<T>&);                                 \
    template Tensor<T> accumulate_conv_backward(ConvKernel<T>&, const Tensor<T>&, const Tensor<T>&); \
    template Tensor<T> pointwise_conv(const Tensor<T>&, const Tensor<T>&, const Tensor<T>*);         \
    template ConvGrads<T> pointwise_conv_backward(const Tensor<T>&, const Tensor<T>&, bool,          \
                                                  const Tensor<T>&);

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::nn
