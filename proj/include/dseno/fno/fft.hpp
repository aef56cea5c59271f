#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

#include "dseno/core/tensor.hpp"

namespace dseno::fno {

using Complex = std::complex<double>;

/// In-place unnormalized DFT of any length: X[k] = sum_j x[j] e^{-2 pi i jk/n}
/// (inverse flips the sign), computed by FFTW.
void fft(std::span<Complex> data, bool inverse = false);

/// Half spectrum of a real (N, C, H, W) field: (N, C, H, W/2 + 1) complex values.
struct Spectrum {
    std::size_t n = 0, c = 0, h = 0, w = 0;
    std::vector<Complex> data;

    Spectrum() = default;
    Spectrum(std::size_t n_, std::size_t c_, std::size_t h_, std::size_t w_)
        : n(n_), c(c_), h(h_), w(w_), data(n_ * c_ * h_ * (w_ / 2 + 1)) {}

    std::size_t half() const noexcept { return w / 2 + 1; }
    Complex& at(std::size_t s, std::size_t ch, std::size_t p, std::size_t q) noexcept {
        return data[((s * c + ch) * h + p) * half() + q];
    }
    const Complex& at(std::size_t s, std::size_t ch, std::size_t p, std::size_t q) const noexcept {
        return data[((s * c + ch) * h + p) * half() + q];
    }
};

/// Unnormalized forward transform over the last two axes.
template <Scalar T>
Spectrum rfft2(const Tensor<T>& field);

/// Inverse of rfft2 including the 1/(H W) factor. For an arbitrary half
/// spectrum G the result is (1/(H W)) Re sum_{p,q} c_q G(p,q) e^{+i theta} with
/// c_q = 1 on the self-conjugate columns (q = 0 and, for even W, q = W/2), else 2.
template <Scalar T>
Tensor<T> irfft2(const Spectrum& spectrum);

/// Adjoint of rfft2 when real and imaginary parts are independent variables:
/// returns Re sum_{p,q} g(p,q) e^{+i theta}.
template <Scalar T>
Tensor<T> rfft2_adjoint(const Spectrum& grad);

/// Adjoint of irfft2: (c_q / (H W)) * rfft2(g) with c_q = 1 on self-conjugate
/// bins and 2 elsewhere.
template <Scalar T>
Spectrum irfft2_adjoint(const Tensor<T>& grad);

}  // namespace dseno::fno
