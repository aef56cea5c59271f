#pragma once

#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dseno/model/config.hpp"
#include "dseno/nn/conv.hpp"
#include "dseno/nn/operator.hpp"

namespace dseno::model {

using nn::Parameter;
using nn::Pass;

/// Channel gate: u * sigmoid(W2 GELU(W1 avgpool(u) + b1) + b2).
template <Scalar T>
class SqueezeExcite {
public:
    SqueezeExcite(const std::string& name, std::size_t channels, const SEConfig& cfg);

    void init_uniform(std::mt19937_64& rng);
    /// The (N, C, 1, 1) gate s for input u.
    Tensor<T> gate(const Tensor<T>& u) const;
    Tensor<T> forward(const Tensor<T>& u) const;
    Pass<T> forward_with_grad(const Tensor<T>& u);
    std::vector<Parameter<T>*> parameters();

    nn::Pointwise<T> reduce;
    nn::Pointwise<T> expand;
};

template <Scalar T>
class DSBlock {
public:
    DSBlock(const std::string& name, const DSBlockConfig& cfg);

    const DSBlockConfig& config() const noexcept { return cfg_; }
    void init_uniform(std::mt19937_64& rng);
    Tensor<T> forward(const Tensor<T>& x) const;
    Pass<T> forward_with_grad(const Tensor<T>& x);
    std::vector<Parameter<T>*> parameters();

    nn::ConvKernel<T> conv1;
    nn::ConvKernel<T> conv2;
    std::optional<SqueezeExcite<T>> se;
    std::optional<nn::Pointwise<T>> pm1;
    std::optional<nn::Pointwise<T>> pm2;

private:
    void check_input(const Tensor<T>& x) const;

    DSBlockConfig cfg_;
};

/// Lift P, DS blocks, then the pointwise head C -> proj_hidden -> C_out.
template <Scalar T>
class DSENO final : public nn::NeuralOperator<T> {
public:
    explicit DSENO(ModelConfig cfg);

    const ModelConfig& config() const noexcept { return cfg_; }
    void init_uniform(std::mt19937_64& rng);

    std::string kind() const override { return "dseno"; }
    std::size_t in_channels() const override { return cfg_.in_channels; }
    std::size_t out_channels() const override { return cfg_.out_channels; }
    Tensor<T> forward(const Tensor<T>& input) const override;
    Pass<T> forward_with_grad(const Tensor<T>& input) override;
    std::vector<Parameter<T>*> parameters() override;

    nn::Pointwise<T> lift;
    std::vector<DSBlock<T>> blocks;
    nn::Pointwise<T> head1;
    nn::Pointwise<T> head2;

private:
    ModelConfig cfg_;
};

/// C -> hidden -> C_out with GELU between; shared by D-SENO and FNO+.
template <Scalar T>
Tensor<T> head_forward(const nn::Pointwise<T>& h1, const nn::Pointwise<T>& h2, const Tensor<T>& x);
template <Scalar T>
Pass<T> head_forward_with_grad(nn::Pointwise<T>& h1, nn::Pointwise<T>& h2, const Tensor<T>& x);

}  // namespace dseno::model
