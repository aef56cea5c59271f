#include "dseno/fno/fft.hpp"

#include <cstring>
#include <map>
#include <memory>
#include <new>

#include <fftw3.h>

namespace dseno::fno {

namespace {

// FFTW plans for one transform length, executed on private aligned buffers.
class Plan {
public:
    explicit Plan(std::size_t n) : n_(n), buf_(fftw_alloc_complex(n)) {
        if (!buf_) throw std::bad_alloc();
        const int len = static_cast<int>(n);
        forward_ = fftw_plan_dft_1d(len, buf_, buf_, FFTW_FORWARD, FFTW_ESTIMATE);
        inverse_ = fftw_plan_dft_1d(len, buf_, buf_, FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    ~Plan() {
        fftw_destroy_plan(forward_);
        fftw_destroy_plan(inverse_);
        fftw_free(buf_);
    }
    Plan(const Plan&) = delete;
    Plan& operator=(const Plan&) = delete;

    void run(std::span<Complex> x, bool inverse) const {
        // std::complex<double> is layout-compatible with fftw_complex.
        std::memcpy(buf_, x.data(), sizeof(Complex) * n_);
        fftw_execute(inverse ? inverse_ : forward_);
        std::memcpy(static_cast<void*>(x.data()), buf_, sizeof(Complex) * n_);
    }

private:
    std::size_t n_;
    fftw_complex* buf_;
    fftw_plan forward_;
    fftw_plan inverse_;
};

// FFTW's planner is not thread-safe, so plans live per thread.
const Plan& plan_for(std::size_t n) {
    thread_local std::map<std::size_t, std::unique_ptr<Plan>> cache;
    auto& slot = cache[n];
    if (!slot) slot = std::make_unique<Plan>(n);
    return *slot;
}

// c_q: weight of half-spectrum column q in the Hermitian reconstruction.
double column_weight(std::size_t q, std::size_t w) {
    if (q == 0) return 1.0;
    if (w % 2 == 0 && q == w / 2) return 1.0;
    return 2.0;
}

}  // namespace

void fft(std::span<Complex> data, bool inverse) {
    if (data.size() <= 1) return;
    plan_for(data.size()).run(data, inverse);
}

template <Scalar T>
Spectrum rfft2(const Tensor<T>& field) {
    require_rank4(field, "rfft2 input");
    const std::size_t n = field.dim(0), c = field.dim(1), h = field.dim(2), w = field.dim(3);
    Spectrum out(n, c, h, w);
    const std::size_t wh = out.half();
    std::vector<Complex> row(w), col(h);
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            auto plane = field.plane(s, ch);
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) row[x] = Complex(static_cast<double>(plane[y * w + x]), 0.0);
                fft(row);
                for (std::size_t q = 0; q < wh; ++q) out.at(s, ch, y, q) = row[q];
            }
            for (std::size_t q = 0; q < wh; ++q) {
                for (std::size_t y = 0; y < h; ++y) col[y] = out.at(s, ch, y, q);
                fft(col);
                for (std::size_t p = 0; p < h; ++p) out.at(s, ch, p, q) = col[p];
            }
        }
    }
    return out;
}

template <Scalar T>
Tensor<T> irfft2(const Spectrum& spec) {
    const std::size_t h = spec.h, w = spec.w, wh = spec.half();
    Tensor<T> out({spec.n, spec.c, h, w});
    std::vector<Complex> rows(h * wh), col(h), full(w);
    const double scale = 1.0 / static_cast<double>(h * w);
    for (std::size_t s = 0; s < spec.n; ++s) {
        for (std::size_t ch = 0; ch < spec.c; ++ch) {
            for (std::size_t q = 0; q < wh; ++q) {
                for (std::size_t p = 0; p < h; ++p) col[p] = spec.at(s, ch, p, q);
                fft(col, true);
                for (std::size_t y = 0; y < h; ++y) rows[y * wh + q] = col[y];
            }
            auto plane = out.plane(s, ch);
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t q = 0; q < wh; ++q) full[q] = rows[y * wh + q];
                for (std::size_t q = 1; q < w - wh + 1; ++q) full[w - q] = std::conj(rows[y * wh + q]);
                fft(full, true);
                for (std::size_t x = 0; x < w; ++x) plane[y * w + x] = static_cast<T>(full[x].real() * scale);
            }
        }
    }
    return out;
}

template <Scalar T>
Tensor<T> rfft2_adjoint(const Spectrum& grad) {
    // irfft2(G) = (1 / HW) Re sum c_q G e^{+i theta}, so rescaling by HW / c_q leaves Re sum g e^{+i theta}.
    Spectrum scaled = grad;
    const double hw = static_cast<double>(grad.h * grad.w);
    for (std::size_t s = 0; s < grad.n; ++s)
        for (std::size_t ch = 0; ch < grad.c; ++ch)
            for (std::size_t p = 0; p < grad.h; ++p)
                for (std::size_t q = 0; q < grad.half(); ++q) scaled.at(s, ch, p, q) *= hw / column_weight(q, grad.w);
    return irfft2<T>(scaled);
}

template <Scalar T>
Spectrum irfft2_adjoint(const Tensor<T>& grad) {
    Spectrum out = rfft2(grad);
    const double hw = static_cast<double>(out.h * out.w);
    for (std::size_t s = 0; s < out.n; ++s)
        for (std::size_t ch = 0; ch < out.c; ++ch)
            for (std::size_t p = 0; p < out.h; ++p)
                for (std::size_t q = 0; q < out.half(); ++q) out.at(s, ch, p, q) *= column_weight(q, out.w) / hw;
    return out;
}

#define DSENO_INSTANTIATE(T)                                   \
    template Spectrum rfft2(const Tensor<T>&);                 \
    template Tensor<T> irfft2<T>(const Spectrum&);             \
    template Tensor<T> rfft2_adjoint<T>(const Spectrum&);      \
    template Spectrum irfft2_adjoint(const Tensor<T>&);

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::fno
