#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "dseno/core/tensor.hpp"
#include "dseno/nn/conv.hpp"

namespace dseno::model {

using nn::Dilation;
using nn::PaddingMode;

struct SEConfig {
    std::size_t reduction = 1;
    friend bool operator==(const SEConfig&, const SEConfig&) = default;
};

struct ConvSpec {
    std::size_t kernel = 3;
    bool bias = true;
    friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};

struct DSBlockConfig {
    std::size_t width = 0;
    Dilation dilation;
    ConvSpec conv1;
    ConvSpec conv2;
    std::optional<SEConfig> se = SEConfig{};
    /// Two biased pointwise C->C maps after conv2, used when SE is absent.
    bool pm_convs = false;
    PaddingMode padding_mode = PaddingMode::zero;
    friend bool operator==(const DSBlockConfig&, const DSBlockConfig&) = default;
};

struct ModelConfig {
    std::string name;
    std::size_t in_channels = 1;
    std::size_t out_channels = 1;
    std::size_t width = 0;
    std::vector<DSBlockConfig> blocks;
    std::size_t proj_hidden = 128;
    /// Informational: the dataset pipeline appends two coordinate channels,
    /// already counted in in_channels.
    bool append_coords = false;
    DType dtype = DType::float32;

    /// Throws ConfigError describing the first violated invariant.
    void validate() const;
    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// Closed-form trainable scalar count.
std::size_t parameter_count(const ModelConfig& cfg);

struct ReceptiveField {
    long x = 1;
    long y = 1;
    friend bool operator==(const ReceptiveField&, const ReceptiveField&) = default;
};

/// 1 + sum over every convolution of l * (k - 1), per axis.
ReceptiveField receptive_field(const ModelConfig& cfg);

/// Builds a published table row, e.g. "Darcy-F", "Airfoil-G w/o SE",
/// "Pipe-G w/o SE (PM)", "NS-A-alt", "Darcy-128". "-noSE" and "-PM" suffixes
/// are accepted as aliases. Throws ConfigError(unknown_name) otherwise.
ModelConfig reconstruct_table_config(const std::string& name);

/// Every row name reconstruct_table_config accepts in canonical spelling.
std::vector<std::string> table_row_names();

/// Benchmark defaults (width, kernels, channels) with explicit dilations.
/// `benchmark` is one of airfoil, pipe, darcy, ns (case-insensitive).
ModelConfig benchmark_config(const std::string& benchmark, const std::vector<int>& dilation_x,
                             const std::vector<int>& dilation_y);

/// Removes SE from every block; with `parameter_matched`, adds the PM convs.
ModelConfig without_se(ModelConfig cfg, bool parameter_matched);

}  // namespace dseno::model
