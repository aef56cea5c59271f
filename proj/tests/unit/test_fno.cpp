#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "../support/model_grad.hpp"
#include "../support/oracles.hpp"
#include "dseno/fno/fft.hpp"
#include "dseno/fno/fno_plus.hpp"

using namespace dseno;
using namespace dseno::fno;

namespace {

Tensor<double> full_mode_weight(std::size_t c_in, std::size_t c_out, std::size_t h, std::size_t w,
                                std::mt19937_64& rng) {
    return random_tensor<double>({c_in, c_out, h, w / 2 + 1, 2}, rng);
}

// Sum over input channels of direct circular convolutions with the kernel of each w(c, o).
Tensor<double> spectral_oracle(const Tensor<double>& x, const Tensor<double>& wt) {
    const std::size_t n = x.dim(0), c_in = x.dim(1), h = x.dim(2), w = x.dim(3);
    const std::size_t c_out = wt.dim(1), m1 = wt.dim(2), m2 = wt.dim(3);
    Tensor<double> out({n, c_out, h, w});
    for (std::size_t c = 0; c < c_in; ++c)
        for (std::size_t o = 0; o < c_out; ++o) {
            std::vector<std::complex<double>> spec(m1 * m2);
            for (std::size_t p = 0; p < m1; ++p)
                for (std::size_t q = 0; q < m2; ++q) {
                    const std::size_t b = (((c * c_out + o) * m1 + p) * m2 + q) * 2;
                    spec[p * m2 + q] = {wt[b], wt[b + 1]};
                }
            const auto k = oracle::kernel_from_spectrum(spec, m1, m2, h, w);
            for (std::size_t s = 0; s < n; ++s) {
                const auto y = oracle::circular_convolve(x.plane(s, c).data(), k, h, w);
                for (std::size_t i = 0; i < h * w; ++i) out.plane(s, o)[i] += y[i];
            }
        }
    return out;
}

}  // namespace

TEST_CASE("fft of any length matches the direct DFT") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(-1, 1);
    for (std::size_t n : {1u, 2u, 3u, 5u, 8u, 12u, 51u, 64u, 85u, 129u, 221u}) {
        CAPTURE(n);
        std::vector<Complex> x(n);
        for (auto& v : x) v = {u(rng), u(rng)};
        auto y = x;
        fft(y);
        double err = 0;
        for (std::size_t k = 0; k < n; ++k) {
            Complex acc{};
            for (std::size_t j = 0; j < n; ++j) acc += x[j] * std::polar(1.0, -2 * std::numbers::pi * double((j * k) % n) / n);
            err = std::max(err, std::abs(acc - y[k]));
        }
        CHECK(err < 1e-11 * std::max<double>(1, n));
        fft(y, true);
        for (std::size_t j = 0; j < n; ++j) CHECK(std::abs(y[j] / double(n) - x[j]) < 1e-13);
    }
}

TEST_CASE("rfft2") {
    std::mt19937_64 rng(2);
    SUBCASE("constant field has only a DC coefficient") {
        Tensor<double> x({1, 1, 6, 5}, 1.5);
        auto f = rfft2(x);
        CHECK(std::abs(f.at(0, 0, 0, 0) - Complex(1.5 * 30, 0)) < 1e-12);
        for (std::size_t i = 1; i < f.data.size(); ++i) CHECK(std::abs(f.data[i]) < 1e-12);
    }
    SUBCASE("pure cosine along H lands in modes (1,0) and (H-1,0)") {
        const std::size_t h = 8, w = 6;
        Tensor<double> x({1, 1, h, w});
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t xx = 0; xx < w; ++xx) x(0, 0, y, xx) = std::cos(2 * std::numbers::pi * y / h);
        auto f = rfft2(x);
        for (std::size_t p = 0; p < h; ++p)
            for (std::size_t q = 0; q < f.half(); ++q) {
                const bool hit = q == 0 && (p == 1 || p == h - 1);
                CHECK(std::abs(f.at(0, 0, p, q) - Complex(hit ? h * w / 2.0 : 0.0, 0)) < 1e-12);
            }
    }
    SUBCASE("matches the direct DFT on odd and even grids") {
        for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {7, 5}, {6, 9}}) {
            auto x = random_tensor<double>({1, 2, h, w}, rng);
            auto f = rfft2(x);
            for (std::size_t c = 0; c < 2; ++c) {
                const auto want = oracle::direct_dft(x.plane(0, c).data(), h, w);
                for (std::size_t p = 0; p < h; ++p)
                    for (std::size_t q = 0; q < w / 2 + 1; ++q) CHECK(std::abs(f.at(0, c, p, q) - want[p * (w / 2 + 1) + q]) < 1e-11);
            }
        }
    }
    SUBCASE("round trip") {
        for (auto [h, w] : {std::pair<std::size_t, std::size_t>{8, 8}, {85, 85}, {221, 51}, {7, 10}}) {
            auto x = random_tensor<double>({2, 1, h, w}, rng);
            CHECK(oracle::max_abs_diff(irfft2<double>(rfft2(x)), x) <= 1e-12);
        }
    }
}

TEST_CASE("fft adjoints") {
    std::mt19937_64 rng(3);
    for (auto [h, w] : {std::pair<std::size_t, std::size_t>{6, 8}, {5, 7}}) {
        auto x = random_tensor<double>({1, 2, h, w}, rng);
        Spectrum g(1, 2, h, w);
        std::uniform_real_distribution<double> u(-1, 1);
        for (auto& v : g.data) v = {u(rng), u(rng)};
        auto inner = [](const Spectrum& a, const Spectrum& b) {
            double s = 0;
            for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i].real() * b.data[i].real() + a.data[i].imag() * b.data[i].imag();
            return s;
        };
        CHECK(inner(rfft2(x), g) == doctest::Approx(oracle::dot(x, rfft2_adjoint<double>(g))).epsilon(1e-12));
        CHECK(oracle::dot(irfft2<double>(g), x) == doctest::Approx(inner(g, irfft2_adjoint(x))).epsilon(1e-12));
    }
}

TEST_CASE("spectral conv") {
    std::mt19937_64 rng(4);
    SUBCASE("unit multiplier on all modes is the identity") {
        Tensor<double> wt({1, 1, 8, 5, 2});
        for (std::size_t i = 0; i < wt.size(); i += 2) wt[i] = 1.0;
        auto x = random_tensor<double>({2, 1, 8, 8}, rng);
        CHECK(oracle::max_abs_diff(spectral_conv(x, wt), x) <= 1e-10);
    }
    SUBCASE("zero weight gives zero") {
        auto x = random_tensor<double>({1, 2, 8, 8}, rng);
        CHECK(oracle::max_abs(spectral_conv(x, Tensor<double>({2, 3, 4, 3, 2}))) == 0.0);
    }
    SUBCASE("equals direct circular convolution") {
        for (std::size_t c_in = 1; c_in <= 3; ++c_in)
            for (std::size_t c_out = 1; c_out <= 3; ++c_out) {
                auto x = random_tensor<double>({2, c_in, 8, 8}, rng);
                auto wt = full_mode_weight(c_in, c_out, 8, 8, rng);
                CHECK(oracle::max_abs_diff(spectral_conv(x, wt), spectral_oracle(x, wt)) <= 1e-10);
            }
        auto x = random_tensor<double>({1, 2, 7, 9}, rng);
        auto wt = random_tensor<double>({2, 2, 4, 3, 2}, rng);
        CHECK(oracle::max_abs_diff(spectral_conv(x, wt), spectral_oracle(x, wt)) <= 1e-10);
    }
    SUBCASE("truncation with unit weights is idempotent") {
        // Only non-negative H frequencies are kept, so the q = 0 column is a
        // projection only when every H frequency is retained (m1 = H).
        Tensor<double> wt({1, 1, 12, 3, 2});
        for (std::size_t i = 0; i < wt.size(); i += 2) wt[i] = 1.0;
        auto x = random_tensor<double>({1, 1, 12, 10}, rng);
        auto once = spectral_conv(x, wt);
        CHECK(oracle::max_abs_diff(spectral_conv(once, wt), once) <= 1e-10);
    }
    SUBCASE("linearity") {
        auto wt = random_tensor<double>({2, 2, 4, 4, 2}, rng);
        auto a = random_tensor<double>({1, 2, 10, 10}, rng), b = random_tensor<double>({1, 2, 10, 10}, rng);
        Tensor<double> mix(a.shape());
        for (std::size_t i = 0; i < a.size(); ++i) mix[i] = 2.5 * a[i] - 0.75 * b[i];
        auto fa = spectral_conv(a, wt), fb = spectral_conv(b, wt), fm = spectral_conv(mix, wt);
        for (std::size_t i = 0; i < fm.size(); ++i) CHECK(fm[i] == doctest::Approx(2.5 * fa[i] - 0.75 * fb[i]).epsilon(1e-10));
    }
    SUBCASE("modes beyond the grid spectrum are rejected") {
        Tensor<double> wt({1, 1, 4, 6, 2});
        CHECK_THROWS_AS(spectral_conv(Tensor<double>({1, 1, 8, 8}), wt), ConfigError);
        Tensor<double> tall({1, 1, 9, 2, 2});
        CHECK_THROWS_AS(spectral_conv(Tensor<double>({1, 1, 8, 8}), tall), ConfigError);
    }
    SUBCASE("gradients agree with finite differences") {
        auto probe = random_tensor<double>({2, 2, 6, 7}, rng);
        nn::Differentiable f;
        f.names = {"input", "weight"};
        f.value = [&](const std::vector<Tensor<double>>& a) { return oracle::dot(spectral_conv(a[0], a[1]), probe); };
        f.gradient = [&](const std::vector<Tensor<double>>& a) {
            auto g = spectral_conv_backward(a[0], a[1], probe);
            return std::vector<Tensor<double>>{g.input, g.weight};
        };
        auto report = nn::grad_check(f, {random_tensor<double>({2, 3, 6, 7}, rng), random_tensor<double>({3, 2, 5, 4, 2}, rng)});
        CAPTURE(report.worst);
        CHECK(report.max_rel_error < 1e-6);
    }
}

TEST_CASE("FNO+ parameter counts") {
    const std::pair<const char*, std::size_t> rows[] = {
        {"FNO+-Darcy-m8", 1195649},   {"FNO+-Darcy-m16", 4734593},  {"FNO+-Darcy-m32", 18890369},
        {"FNO+-Darcy-m64", 75513473}, {"FNO+-Darcy-m128", 302005889}, {"FNO+-Airfoil-m8", 2122433},
        {"FNO+-Airfoil-m24", 18899649}, {"FNO+-Pipe-m16", 18924449},  {"FNO+-NS-m32", 33580225},
    };
    for (auto [name, count] : rows) {
        CAPTURE(name);
        CHECK(parameter_count(reconstruct_fno_config(name)) == count);
    }
    for (const std::string& name : fno_row_names()) {
        if (name.find("m128") != std::string::npos || name.find("m64") != std::string::npos) continue;
        FNOPlus<float> m(reconstruct_fno_config(name));
        CHECK(m.parameter_total() == parameter_count(m.config()));
    }
    CHECK_THROWS_AS(reconstruct_fno_config("FNO+-Darcy-m9"), ConfigError);
}

TEST_CASE("FNO+ model") {
    std::mt19937_64 rng(5);
    FNOPlusConfig cfg;
    cfg.name = "tiny";
    cfg.in_channels = 2;
    cfg.out_channels = 1;
    cfg.width = 3;
    cfg.modes = 3;
    cfg.proj_hidden = 4;
    SUBCASE("zero weights and head bias beta give a constant field") {
        FNOPlus<double> m(cfg);
        m.head2.bias->value.fill(-0.25);
        const auto y = m.forward(random_tensor<double>({1, 2, 8, 8}, rng));
        for (double v : y.data()) CHECK(v == -0.25);
    }
    SUBCASE("gradients agree with finite differences") {
        FNOPlus<double> m(cfg);
        testing::randomize_parameters(m, rng);
        auto report = testing::check_model_gradients(m, random_tensor<double>({2, 2, 8, 8}, rng), rng, {.tolerance = 1e-5});
        CAPTURE(report.worst);
        CHECK(report.max_rel_error <= 1e-5);
    }
    SUBCASE("weights transfer across resolutions") {
        FNOPlus<double> m(cfg);
        m.init_uniform(rng);
        CHECK(m.forward(random_tensor<double>({1, 2, 64, 64}, rng)).shape() == Shape{1, 1, 64, 64});
        CHECK(m.forward(random_tensor<double>({1, 2, 128, 128}, rng)).shape() == Shape{1, 1, 128, 128});
        // A band-limited input sampled on two grids maps to the same band-limited output.
        auto field = [](std::size_t n) {
            Tensor<double> x({1, 2, n, n});
            for (std::size_t y = 0; y < n; ++y)
                for (std::size_t xx = 0; xx < n; ++xx) {
                    const double a = 2 * std::numbers::pi * double(y) / n, b = 2 * std::numbers::pi * double(xx) / n;
                    x(0, 0, y, xx) = 0.3 * std::cos(a) + 0.2 * std::sin(b);
                    x(0, 1, y, xx) = 0.1 * std::sin(a + b);
                }
            return x;
        };
        auto wt = random_tensor<double>({2, 2, 3, 3, 2}, rng);
        auto coarse = spectral_conv(field(16), wt);
        auto fine = spectral_conv(field(32), wt);
        for (std::size_t y = 0; y < 16; ++y)
            for (std::size_t xx = 0; xx < 16; ++xx)
                CHECK(coarse(0, 0, y, xx) == doctest::Approx(fine(0, 0, 2 * y, 2 * xx)).epsilon(1e-10));
    }
    SUBCASE("grid too small for the modes") {
        FNOPlus<double> m(cfg);
        CHECK_THROWS_AS(m.forward(Tensor<double>({1, 2, 2, 8})), ConfigError);
    }
}
