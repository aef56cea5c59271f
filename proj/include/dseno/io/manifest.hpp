#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include "dseno/core/tensor.hpp"

namespace dseno::io {

enum class Normalization { zscore, none };

/// Dataset description. Field samples are stored as
///   inputs  (S, C_in, H, W), targets (S, C_out, H, W)
/// or, for trajectory data (ns_history > 0), a single file
///   inputs  (S, C_t, H, W, T).
/// Training samples are the first n_train, test samples the last n_test.
struct Manifest {
    std::string name;
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::filesystem::path inputs;
    std::filesystem::path targets;
    /// H x W, or H x W x T for trajectories.
    Shape mesh;
    std::vector<std::string> input_channels;
    std::vector<std::string> target_channels;
    Normalization normalize = Normalization::zscore;
    bool append_coords = false;
    std::size_t ns_history = 0;
    std::size_t ns_horizon = 0;

    bool trajectories() const noexcept { return ns_history > 0; }
    /// Throws DataError describing the first inconsistency between the fields.
    void validate() const;
};

/// Relative tensor paths resolve against `base_dir`. Unknown keys are rejected.
Manifest parse_manifest_text(std::string_view text, const std::filesystem::path& base_dir,
                             const std::string& source);
Manifest parse_manifest(const std::filesystem::path& path);

/// Inverse of parse_manifest_text; paths are written relative to `base_dir`
/// when they live under it.
std::string format_manifest(const Manifest& m, const std::filesystem::path& base_dir);

std::string to_string(Normalization n);

}  // namespace dseno::io
