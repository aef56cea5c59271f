#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dseno/io/dataset.hpp"
#include "dseno/nn/operator.hpp"
#include "dseno/train/optimizer.hpp"

namespace dseno::train {

struct TrainConfig {
    std::size_t epochs = 500;
    std::size_t batch_size = 20;
    double lr = 1e-3;
    std::size_t step_size = 100;
    double gamma = 0.5;
    double weight_decay = 1e-4;
    std::uint64_t seed = 0;
    /// Global gradient-norm bound; 0 disables clipping.
    double grad_clip = 0.0;
    /// Save every k epochs into the checkpoint directory; 0 saves only at the end.
    std::size_t checkpoint_every = 0;

    void validate() const;
};

struct EpochMetrics {
    std::size_t epoch = 0;  // 1-based count of completed epochs
    double lr = 0;
    double train_rel_l2 = 0;
    double test_rel_l2 = 0;
    double wall_seconds = 0;
};

/// Mean test relative L2 of `model` in physical units, evaluated in chunks.
template <Scalar T>
double evaluate_fields(const nn::NeuralOperator<T>& model, const Tensor<T>& inputs, const Tensor<T>& targets,
                       const io::Normalizer& input_norm, const io::Normalizer& target_norm, std::size_t chunk);

/// Physical-unit predictions for `inputs`, evaluated in chunks.
template <Scalar T>
Tensor<T> predict_fields(const nn::NeuralOperator<T>& model, const Tensor<T>& inputs,
                         const io::Normalizer& input_norm, const io::Normalizer& target_norm, std::size_t chunk);

template <Scalar T>
struct Rollout {
    /// (N, horizon * C_t, H, W) in physical units.
    Tensor<T> predicted;
    /// Mean over trajectories of the relative L2 of the whole predicted trajectory.
    double rel_l2 = 0;
};

/// Feeds each one-step prediction back into the sliding window. `windows` is
/// (N, history * C_t, H, W), `targets` (N, >= horizon * C_t, H, W), both in
/// physical units; `norm` is the shared frame normalizer and C_t the model's
/// output channel count. Throws DataError if targets hold fewer than `horizon` frames.
template <Scalar T>
Rollout<T> rollout_eval(const nn::NeuralOperator<T>& model, const Tensor<T>& windows, const Tensor<T>& targets,
                        const io::Normalizer& norm, std::size_t horizon);

/// Unrolls `model` from the normalized window over the horizon of `targets`
/// (physical units), accumulates parameter gradients of the mean per-step
/// relative L2 by backpropagation through time, and returns that loss.
/// Gradients are not accumulated when the loss is non-finite.
template <Scalar T>
double rollout_loss_with_grad(nn::NeuralOperator<T>& model, const Tensor<T>& window, const Tensor<T>& targets,
                              const io::Normalizer& norm);

/// Drops the oldest frame of `window` and appends `frame` (both normalized).
template <Scalar T>
Tensor<T> shift_window(const Tensor<T>& window, const Tensor<T>& frame);

/// Channels [begin, begin + count) of an (N, C, H, W) tensor.
template <Scalar T>
Tensor<T> channel_slice(const Tensor<T>& x, std::size_t begin, std::size_t count);

/// Contents of checkpoint.txt.
struct CheckpointInfo {
    std::string kind;
    DType dtype = DType::float32;
    std::size_t epoch = 0;
    std::size_t step = 0;
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
    std::string rng_state;
};

CheckpointInfo read_checkpoint_info(const std::filesystem::path& dir);

/// Copies stored parameter values into `model` (names, shapes and dtype must match).
template <Scalar T>
void load_parameters(nn::NeuralOperator<T>& model, const std::filesystem::path& dir);

struct CheckpointNormalizers {
    io::Normalizer input;
    io::Normalizer target;
};
CheckpointNormalizers read_checkpoint_normalizers(const std::filesystem::path& dir);

/// Epoch loop over a dataset. Field data trains on one-step predictions; when
/// the dataset holds trajectory windows the model is unrolled over the horizon
/// and the loss is the mean of the per-step relative L2 errors.
/// Deterministic given (seed, dtype) on a single thread.
template <Scalar T>
class Trainer {
public:
    Trainer(nn::NeuralOperator<T>& model, const io::Dataset<T>& data, TrainConfig cfg);

    /// One shuffled pass over the training split followed by a test evaluation.
    EpochMetrics run_epoch();
    /// Runs epochs until `config().epochs` have completed, calling `on_epoch`
    /// after each and saving into `checkpoint_dir` (if set) at the configured cadence.
    void train(const std::function<void(const EpochMetrics&)>& on_epoch = {},
               const std::optional<std::filesystem::path>& checkpoint_dir = std::nullopt);

    /// Test-split metric: field relative L2, or rollout relative L2 for trajectories.
    double evaluate_test() const;
    double evaluate_train() const;

    /// Writes parameters, optimizer moments, normalizers, metric history and
    /// metadata. `config_text` is stored verbatim and hashed into the metadata.
    void save_checkpoint(const std::filesystem::path& dir, const std::string& config_text) const;
    /// Restores everything save_checkpoint wrote. If `config_text` is non-empty
    /// its hash must match the stored one.
    void load_checkpoint(const std::filesystem::path& dir, const std::string& config_text = {});

    const TrainConfig& config() const noexcept { return cfg_; }
    std::size_t epoch() const noexcept { return epoch_; }
    const std::vector<EpochMetrics>& history() const noexcept { return history_; }
    AdamW<T>& optimizer() noexcept { return opt_; }
    bool trajectories() const noexcept { return data_.frame_channels > 0; }

private:
    double train_batch(const std::vector<std::size_t>& indices, double lr);

    nn::NeuralOperator<T>& model_;
    const io::Dataset<T>& data_;
    TrainConfig cfg_;
    AdamW<T> opt_;
    Tensor<T> train_encoded_;
    std::mt19937_64 rng_;
    std::size_t epoch_ = 0;
    std::vector<EpochMetrics> history_;
};

}  // namespace dseno::train
