#pragma once

#include <functional>
#include <string>

#include "dseno/core/tensor.hpp"

namespace dseno::train {

/// Receives non-fatal diagnostics such as skipped zero-norm targets.
/// The default handler writes to stderr; passing an empty function restores it.
using WarningHandler = std::function<void(const std::string&)>;
void set_warning_handler(WarningHandler handler);
void warn(const std::string& message);

/// Mean over samples of ||pred_n - target_n|| / ||target_n||, norms taken over
/// all channels and grid points of sample n. Samples with a zero-norm target
/// are skipped with a warning; DataError if every sample is skipped.
template <Scalar T>
double relative_l2(const Tensor<T>& pred, const Tensor<T>& target, std::size_t* skipped = nullptr);

/// Per-sample relative errors, NaN where the target norm is zero.
template <Scalar T>
std::vector<double> relative_l2_per_sample(const Tensor<T>& pred, const Tensor<T>& target);

template <Scalar T>
struct LossAndGrad {
    double value = 0;
    /// d value / d pred.
    Tensor<T> grad;
};

template <Scalar T>
LossAndGrad<T> relative_l2_with_grad(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace dseno::train
