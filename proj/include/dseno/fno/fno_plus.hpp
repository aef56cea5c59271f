#pragma once

#include <random>
#include <string>
#include <vector>

#include "dseno/fno/fft.hpp"
#include "dseno/nn/conv.hpp"
#include "dseno/nn/operator.hpp"

namespace dseno::fno {

using nn::Parameter;
using nn::Pass;

/// Retained modes: p < m1 along H (non-negative frequencies only), q < m2 along W.
struct Modes {
    std::size_t m1 = 1;
    std::size_t m2 = 1;
    friend bool operator==(const Modes&, const Modes&) = default;
};

/// Spectral weights are real tensors of shape (C_in, C_out, m1, m2, 2) holding
/// interleaved (re, im) pairs.
template <Scalar T>
Modes modes_of(const Tensor<T>& weight);

/// G(n,o,p,q) = sum_c F(n,c,p,q) w(c,o,p,q) on the retained block of
/// F = rfft2(input), zero elsewhere; returns irfft2(G).
template <Scalar T>
Tensor<T> spectral_conv(const Tensor<T>& input, const Tensor<T>& weight);

template <Scalar T>
struct SpectralGrads {
    Tensor<T> input;
    Tensor<T> weight;
};

template <Scalar T>
SpectralGrads<T> spectral_conv_backward(const Tensor<T>& input, const Tensor<T>& weight,
                                        const Tensor<T>& grad_out);

template <Scalar T>
class SpectralConv {
public:
    SpectralConv(const std::string& name, std::size_t in_channels, std::size_t out_channels, Modes modes);

    /// Real and imaginary parts uniform in [0, 1 / (C_in C_out)).
    void init_uniform(std::mt19937_64& rng);
    Tensor<T> forward(const Tensor<T>& input) const { return spectral_conv(input, weight.value); }
    /// Accumulates the weight gradient; returns the input gradient.
    Tensor<T> backward(const Tensor<T>& input, const Tensor<T>& grad_out);

    Parameter<T> weight;
};

struct FNOPlusConfig {
    std::string name;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t width = 32;
    std::size_t n_layers = 4;
    std::size_t modes = 8;
    std::size_t proj_hidden = 128;
    DType dtype = DType::float32;

    void validate() const;
    friend bool operator==(const FNOPlusConfig&, const FNOPlusConfig&) = default;
};

std::size_t parameter_count(const FNOPlusConfig& cfg);

/// Rows such as "FNO+-Darcy-m16" or "FNO+-NS-m32"; benchmark channels and
/// width follow the D-SENO rows of the same benchmark.
FNOPlusConfig reconstruct_fno_config(const std::string& name);
std::vector<std::string> fno_row_names();

template <Scalar T>
class FNOPlus final : public nn::NeuralOperator<T> {
public:
    explicit FNOPlus(FNOPlusConfig cfg);

    const FNOPlusConfig& config() const noexcept { return cfg_; }
    void init_uniform(std::mt19937_64& rng);

    std::string kind() const override { return "fno+"; }
    std::size_t in_channels() const override { return cfg_.in_channels; }
    std::size_t out_channels() const override { return cfg_.out_channels; }
    Tensor<T> forward(const Tensor<T>& input) const override;
    Pass<T> forward_with_grad(const Tensor<T>& input) override;
    std::vector<Parameter<T>*> parameters() override;

    nn::Pointwise<T> lift;
    std::vector<SpectralConv<T>> spectral;
    std::vector<nn::Pointwise<T>> mixing;
    nn::Pointwise<T> head1;
    nn::Pointwise<T> head2;

private:
    void check_input(const Tensor<T>& input) const;

    FNOPlusConfig cfg_;
};

}  // namespace dseno::fno
