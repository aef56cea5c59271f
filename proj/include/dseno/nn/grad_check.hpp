#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dseno/core/tensor.hpp"

namespace dseno::nn {

/// A scalar function of several float64 tensors together with its analytic gradient.
struct Differentiable {
    std::vector<std::string> names;
    std::function<double(const std::vector<Tensor<double>>&)> value;
    /// Gradient with respect to every argument; missing entries mean "no backward rule".
    std::function<std::vector<Tensor<double>>(const std::vector<Tensor<double>>&)> gradient;
};

struct GradCheckOptions {
    double tolerance = 1e-6;
    double step = 1e-5;
    /// Check at most this many evenly spaced elements per argument (0 = all).
    std::size_t max_elements_per_arg = 0;
};

struct GradCheckReport {
    bool passed = false;
    double max_rel_error = 0.0;
    std::string worst;  // "<arg name>[<flat index>]"
    std::size_t checked = 0;
};

/// Compares analytic gradients with central differences (x +- step) element by
/// element. The relative error of one element is |a - n| / max(|a|, |n|, floor)
/// where floor is 1e-3 of the largest analytic gradient magnitude of that
/// argument, so elements whose true gradient is ~0 are judged against the
/// argument's scale rather than against round-off.
GradCheckReport grad_check(const Differentiable& f, std::vector<Tensor<double>> args,
                           const GradCheckOptions& options = {});

}  // namespace dseno::nn
