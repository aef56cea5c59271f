#pragma once

#include <string>
#include <utility>

#include "dseno/core/tensor.hpp"

namespace dseno::nn {

/// A trainable tensor and its gradient buffer (same shape, same dtype).
template <Scalar T>
struct Parameter {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Parameter(std::string name_, Tensor<T> value_)
        : name(std::move(name_)), value(std::move(value_)), grad(value.shape()) {}

    void zero_grad() { grad.fill(T{0}); }
    std::size_t size() const noexcept { return value.size(); }
};

}  // namespace dseno::nn
