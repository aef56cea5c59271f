#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "dseno/fno/fno_plus.hpp"
#include "dseno/model/config.hpp"
#include "dseno/nn/operator.hpp"
#include "dseno/train/trainer.hpp"

namespace dseno::cli {

/// Everything a train/evaluate run needs, read from a key = value file.
struct RunConfig {
    /// Table row ("Darcy-F", "NS-A w/o SE", "FNO+-Darcy-m16", ...). Ignored when
    /// `benchmark` is set.
    std::string model = "Darcy-C";
    /// Custom D-SENO: benchmark defaults with explicit dilations.
    std::string benchmark;
    std::vector<int> dilations;
    /// Empty means equal to `dilations`.
    std::vector<int> dilations_y;
    /// on, off or pm; applies to custom models only.
    std::string se = "on";
    nn::PaddingMode padding = nn::PaddingMode::zero;
    DType dtype = DType::float32;

    std::filesystem::path manifest;
    std::filesystem::path out_dir = "run";
    std::size_t n_train = 0;
    std::size_t n_test = 0;
    std::size_t data_stride = 1;

    train::TrainConfig train;
};

struct ConfigKey {
    std::string key;
    std::string default_value;
    std::string help;
};

/// Every accepted key with its default, in the order format_run_config writes them.
const std::vector<ConfigKey>& run_config_keys();

/// Relative paths resolve against `base_dir`. Unknown keys, duplicate keys and
/// malformed values throw ConfigError.
RunConfig parse_run_config_text(std::string_view text, const std::filesystem::path& base_dir,
                                const std::string& source);
RunConfig parse_run_config(const std::filesystem::path& path);

/// All keys in fixed order with absolute paths; parsing the result gives back
/// the same configuration.
std::string format_run_config(const RunConfig& cfg);

using ModelSpec = std::variant<model::ModelConfig, fno::FNOPlusConfig>;

/// Resolves the model keys into a validated architecture.
ModelSpec resolve_model(const RunConfig& cfg);
/// Looks up a D-SENO or FNO+ table row by name.
ModelSpec model_from_name(const std::string& name);

std::size_t parameter_count(const ModelSpec& spec);
std::string model_name(const ModelSpec& spec);

/// Builds the model and initializes it from a generator seeded with `seed`.
template <Scalar T>
std::unique_ptr<nn::NeuralOperator<T>> instantiate(const ModelSpec& spec, std::uint64_t seed);

}  // namespace dseno::cli
