#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dseno/core/tensor.hpp"
#include "dseno/nn/parameter.hpp"

namespace dseno::nn {

/// Result of a forward pass that keeps what the backward pass needs.
/// `backward(grad_out)` adds parameter gradients into the owning layer's
/// Parameter::grad buffers and returns the gradient with respect to the input.
template <Scalar T>
struct Pass {
    Tensor<T> output;
    std::function<Tensor<T>(const Tensor<T>&)> backward;
};

/// Common surface of D-SENO and FNO+: (N, C_in, H, W) -> (N, C_out, H, W).
template <Scalar T>
class NeuralOperator {
public:
    virtual ~NeuralOperator() = default;

    virtual std::string kind() const = 0;
    virtual std::size_t in_channels() const = 0;
    virtual std::size_t out_channels() const = 0;

    virtual Tensor<T> forward(const Tensor<T>& input) const = 0;
    virtual Pass<T> forward_with_grad(const Tensor<T>& input) = 0;

    /// Every trainable tensor, in a fixed order that checkpoints rely on.
    virtual std::vector<Parameter<T>*> parameters() = 0;

    std::size_t parameter_total() {
        std::size_t n = 0;
        for (const Parameter<T>* p : parameters()) n += p->size();
        return n;
    }

    void zero_grad() {
        for (Parameter<T>* p : parameters()) p->zero_grad();
    }
};

}  // namespace dseno::nn
