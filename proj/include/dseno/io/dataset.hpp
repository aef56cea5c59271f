#pragma once

#include <cstddef>
#include <vector>

#include "dseno/core/tensor.hpp"
#include "dseno/io/manifest.hpp"
#include "dseno/io/normalizer.hpp"

namespace dseno::io {

/// Train and test splits in physical units, (N, C, H, W) each. For trajectory
/// data the inputs are history windows (N, history * C_t, H, W) and the
/// targets the following horizon frames (N, horizon * C_t, H, W), with frame
/// t, channel c at index t * C_t + c.
template <Scalar T>
struct Dataset {
    Manifest manifest;
    Tensor<T> train_inputs;
    Tensor<T> train_targets;
    Tensor<T> test_inputs;
    Tensor<T> test_targets;
    Normalizer input_norm;
    Normalizer target_norm;
    /// Physical channels per frame for trajectory data, 0 otherwise.
    std::size_t frame_channels = 0;

    std::size_t n_train() const { return train_inputs.empty() ? 0 : train_inputs.dim(0); }
    std::size_t n_test() const { return test_inputs.empty() ? 0 : test_inputs.dim(0); }
};

struct LoadOptions {
    /// 0 keeps the manifest's split sizes; otherwise must not exceed them.
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    /// Spatial subsampling stride; (extent - 1) must be divisible by it.
    std::size_t stride = 1;
};

/// Reads and checks the manifest's tensor files, then builds the dataset with
/// make_dataset. Throws DataError on missing files, dims that disagree with the
/// manifest, or split sizes larger than the stored sample count.
template <Scalar T>
Dataset<T> load_dataset(const Manifest& manifest, const LoadOptions& options = {});

/// In-memory counterpart of load_dataset. `inputs`/`targets` follow the file
/// layouts described on Manifest; `targets` is ignored for trajectory data.
/// Subsamples, splits (train first, test from the end), builds NS windows,
/// appends coordinates and fits the normalizers on the train split.
template <Scalar T>
Dataset<T> make_dataset(const Manifest& manifest, const Tensor<T>& inputs, const Tensor<T>& targets,
                        const LoadOptions& options = {});

/// Keeps indices 0, s, 2s, ... on the last two axes of a rank >= 2 tensor.
template <Scalar T>
Tensor<T> darcy_subsample(const Tensor<T>& field, std::size_t stride);

/// Appends x = col / (W - 1) and y = row / (H - 1) channels to (N, C, H, W).
template <Scalar T>
Tensor<T> append_coordinates(const Tensor<T>& x);

template <Scalar T>
struct Window {
    Tensor<T> input;   // (history * C_t, H, W)
    Tensor<T> target;  // (horizon * C_t, H, W)
};

/// `trajectory` is (C_t, T, H, W). The input stacks frames 0..history-1, the
/// target frames history..history+horizon-1.
template <Scalar T>
Window<T> ns_windows(const Tensor<T>& trajectory, std::size_t history, std::size_t horizon);

/// Samples `indices` of an (N, ...) tensor, in that order.
template <Scalar T>
Tensor<T> gather(const Tensor<T>& batch, const std::vector<std::size_t>& indices);

/// Samples [begin, end) of an (N, ...) tensor.
template <Scalar T>
Tensor<T> slice_samples(const Tensor<T>& batch, std::size_t begin, std::size_t end);

}  // namespace dseno::io
