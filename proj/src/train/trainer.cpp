#include "dseno/train/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "dseno/io/tensor_file.hpp"
#include "dseno/io/text.hpp"
#include "dseno/train/loss.hpp"

namespace dseno::train {

namespace fs = std::filesystem;

namespace {

constexpr int kCheckpointFormat = 1;

template <Scalar T>
void copy_samples(const Tensor<T>& src, Tensor<T>& dst, std::size_t offset) {
    std::copy(src.data().begin(), src.data().end(), dst.data().begin() + static_cast<std::ptrdiff_t>(offset));
}

std::string param_file(std::size_t index, const std::string& name) {
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "%03zu_", index);
    return prefix + name + ".dsnt";
}

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::string history_csv(const std::vector<EpochMetrics>& history) {
    std::string out = "epoch,lr,train_rel_l2,test_rel_l2\n";
    for (const EpochMetrics& m : history) {
        out += std::to_string(m.epoch) + "," + io::format_double(m.lr) + "," + io::format_double(m.train_rel_l2) +
               "," + io::format_double(m.test_rel_l2) + "\n";
    }
    return out;
}

std::vector<EpochMetrics> parse_history(const std::string& text, const std::string& source) {
    std::vector<EpochMetrics> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto f = io::split(line, ',');
        if (f.size() != 4) throw DataError(Errc::corrupt_file, source + ": malformed row '" + line + "'");
        try {
            out.push_back({io::parse_size(f[0], "epoch"), io::parse_double(f[1], "lr"),
                           io::parse_double(f[2], "train_rel_l2"), io::parse_double(f[3], "test_rel_l2"), 0.0});
        } catch (const ConfigError& e) {
            throw DataError(Errc::corrupt_file, source + ": " + e.what());
        }
    }
    return out;
}

template <Scalar T>
void check_channels(const nn::NeuralOperator<T>& model, const io::Dataset<T>& data) {
    const std::size_t c_in = data.train_inputs.dim(1), c_out = data.train_targets.dim(1);
    if (model.in_channels() != c_in) {
        throw DataError(Errc::shape_mismatch, "model expects " + std::to_string(model.in_channels()) +
                                                  " input channels, dataset provides " + std::to_string(c_in));
    }
    const std::size_t want_out = data.frame_channels > 0 ? data.frame_channels : c_out;
    if (model.out_channels() != want_out) {
        throw DataError(Errc::shape_mismatch, "model predicts " + std::to_string(model.out_channels()) +
                                                  " channels, dataset targets need " + std::to_string(want_out));
    }
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size == 0) throw ConfigError("batch_size must be positive");
    if (step_size == 0) throw ConfigError("step_size must be positive");
    if (!(lr >= 0) || !std::isfinite(lr)) throw ConfigError("lr must be a finite non-negative number");
    if (!(gamma > 0)) throw ConfigError("gamma must be positive");
    if (!(weight_decay >= 0)) throw ConfigError("weight_decay must be non-negative");
    if (!(grad_clip >= 0)) throw ConfigError("grad_clip must be non-negative (0 disables it)");
}

template <Scalar T>
Tensor<T> channel_slice(const Tensor<T>& x, std::size_t begin, std::size_t count) {
    require_rank4(x, "channel slice input");
    if (begin + count > x.dim(1) || count == 0) {
        throw ConfigError(Errc::shape_mismatch, "channels [" + std::to_string(begin) + ", " +
                                                    std::to_string(begin + count) + ") out of " +
                                                    shape_string(x.shape()));
    }
    Tensor<T> out({x.dim(0), count, x.dim(2), x.dim(3)});
    for (std::size_t n = 0; n < x.dim(0); ++n)
        for (std::size_t c = 0; c < count; ++c) {
            auto src = x.plane(n, begin + c);
            std::copy(src.begin(), src.end(), out.plane(n, c).begin());
        }
    return out;
}

template <Scalar T>
Tensor<T> shift_window(const Tensor<T>& window, const Tensor<T>& frame) {
    require_rank4(window, "rollout window");
    require_rank4(frame, "rollout frame");
    const std::size_t ct = frame.dim(1), c = window.dim(1);
    if (frame.dim(0) != window.dim(0) || ct > c || c % ct != 0 || frame.dim(2) != window.dim(2) ||
        frame.dim(3) != window.dim(3)) {
        throw ConfigError(Errc::shape_mismatch, "cannot append frame " + shape_string(frame.shape()) + " to window " +
                                                    shape_string(window.shape()));
    }
    Tensor<T> out(window.shape());
    for (std::size_t n = 0; n < window.dim(0); ++n)
        for (std::size_t ch = 0; ch < c; ++ch) {
            auto src = ch + ct < c ? window.plane(n, ch + ct) : frame.plane(n, ch + ct - c);
            std::copy(src.begin(), src.end(), out.plane(n, ch).begin());
        }
    return out;
}

template <Scalar T>
Tensor<T> predict_fields(const nn::NeuralOperator<T>& model, const Tensor<T>& inputs, const io::Normalizer& input_norm,
                         const io::Normalizer& target_norm, std::size_t chunk) {
    require_rank4(inputs, "prediction inputs");
    const std::size_t n = inputs.dim(0);
    chunk = std::max<std::size_t>(chunk, 1);
    Tensor<T> out;
    for (std::size_t b = 0; b < n; b += chunk) {
        const std::size_t e = std::min(n, b + chunk);
        Tensor<T> pred = target_norm.decode(model.forward(input_norm.encode(io::slice_samples(inputs, b, e))));
        if (out.empty()) out = Tensor<T>({n, pred.dim(1), pred.dim(2), pred.dim(3)});
        copy_samples(pred, out, b * (out.size() / n));
    }
    return out;
}

template <Scalar T>
double evaluate_fields(const nn::NeuralOperator<T>& model, const Tensor<T>& inputs, const Tensor<T>& targets,
                       const io::Normalizer& input_norm, const io::Normalizer& target_norm, std::size_t chunk) {
    return relative_l2(predict_fields(model, inputs, input_norm, target_norm, chunk), targets);
}

template <Scalar T>
Rollout<T> rollout_eval(const nn::NeuralOperator<T>& model, const Tensor<T>& windows, const Tensor<T>& targets,
                        const io::Normalizer& norm, std::size_t horizon) {
    require_rank4(windows, "rollout windows");
    require_rank4(targets, "rollout targets");
    const std::size_t ct = model.out_channels();
    if (horizon == 0) throw ConfigError("rollout horizon must be positive");
    if (targets.dim(1) < horizon * ct) {
        throw DataError(Errc::shape_mismatch, "rollout horizon " + std::to_string(horizon) + " exceeds the " +
                                                  std::to_string(targets.dim(1) / ct) + " ground-truth frames");
    }
    const std::size_t n = windows.dim(0), h = windows.dim(2), w = windows.dim(3);
    Rollout<T> out{Tensor<T>({n, horizon * ct, h, w}), 0.0};
    Tensor<T> window = norm.encode(windows);
    for (std::size_t k = 0; k < horizon; ++k) {
        Tensor<T> frame = model.forward(window);
        const Tensor<T> phys = norm.decode(frame);
        for (std::size_t s = 0; s < n; ++s)
            for (std::size_t c = 0; c < ct; ++c) {
                auto src = phys.plane(s, c);
                std::copy(src.begin(), src.end(), out.predicted.plane(s, k * ct + c).begin());
            }
        if (k + 1 < horizon) window = shift_window(window, frame);
    }
    out.rel_l2 = relative_l2(out.predicted, channel_slice(targets, 0, horizon * ct));
    return out;
}

template <Scalar T>
double rollout_loss_with_grad(nn::NeuralOperator<T>& model, const Tensor<T>& window0, const Tensor<T>& targets,
                              const io::Normalizer& norm) {
    require_rank4(window0, "rollout window");
    require_rank4(targets, "rollout targets");
    const std::size_t ct = model.out_channels();
    if (window0.dim(1) % ct != 0 || targets.dim(1) % ct != 0) {
        throw ConfigError(Errc::shape_mismatch, "window and targets must hold whole frames of " + std::to_string(ct) +
                                                    " channels");
    }
    const std::size_t history = window0.dim(1) / ct, horizon = targets.dim(1) / ct;
    std::vector<nn::Pass<T>> passes;
    std::vector<Tensor<T>> grads;
    double loss = 0;
    Tensor<T> window = window0;
    for (std::size_t k = 0; k < horizon; ++k) {
        passes.push_back(model.forward_with_grad(window));
        const Tensor<T>& frame = passes.back().output;
        LossAndGrad<T> step = relative_l2_with_grad(norm.decode(frame), channel_slice(targets, k * ct, ct));
        loss += step.value / static_cast<double>(horizon);
        for (T& g : step.grad.data()) g = static_cast<T>(g / static_cast<double>(horizon));
        grads.push_back(norm.decode_backward(step.grad));
        if (k + 1 < horizon) window = shift_window(window, frame);
    }
    if (!std::isfinite(loss)) return loss;
    // Backpropagate through time. Window k holds global frames k .. k+history-1;
    // frame f >= history is prediction f - history.
    for (std::size_t k = horizon; k-- > 0;) {
        const Tensor<T> gw = passes[k].backward(grads[k]);
        for (std::size_t ch = 0; ch < gw.dim(1); ++ch) {
            const std::size_t f = k + ch / ct;
            if (f < history) continue;
            Tensor<T>& dst = grads[f - history];
            for (std::size_t s = 0; s < gw.dim(0); ++s) {
                auto src = gw.plane(s, ch);
                auto out = dst.plane(s, ch % ct);
                for (std::size_t i = 0; i < src.size(); ++i) out[i] += src[i];
            }
        }
    }
    return loss;
}

template <Scalar T>
Trainer<T>::Trainer(nn::NeuralOperator<T>& model, const io::Dataset<T>& data, TrainConfig cfg)
    : model_(model),
      data_(data),
      cfg_(cfg),
      opt_(model.parameters(), AdamWConfig{0.9, 0.999, 1e-8, cfg.weight_decay}),
      rng_(cfg.seed ^ 0x9e3779b97f4a7c15ull) {
    cfg_.validate();
    if (data.n_train() == 0) throw DataError("training split is empty");
    check_channels(model, data);
    train_encoded_ = data.input_norm.encode(data.train_inputs);
}

template <Scalar T>
double Trainer<T>::train_batch(const std::vector<std::size_t>& indices, double lr) {
    const Tensor<T> x = io::gather(train_encoded_, indices);
    const Tensor<T> y = io::gather(data_.train_targets, indices);
    model_.zero_grad();
    double loss = 0;
    if (trajectories()) {
        loss = rollout_loss_with_grad(model_, x, y, data_.target_norm);
    } else {
        nn::Pass<T> pass = model_.forward_with_grad(x);
        const LossAndGrad<T> l = relative_l2_with_grad(data_.target_norm.decode(pass.output), y);
        loss = l.value;
        if (std::isfinite(loss)) pass.backward(data_.target_norm.decode_backward(l.grad));
    }
    if (!std::isfinite(loss)) {
        throw NumericError(Errc::divergence, "training loss diverged at epoch " + std::to_string(epoch_ + 1) +
                                                 ", step " + std::to_string(opt_.steps() + 1));
    }
    if (cfg_.grad_clip > 0) clip_grad_norm(opt_.params(), cfg_.grad_clip);
    opt_.step(lr);
    return loss;
}

template <Scalar T>
double Trainer<T>::evaluate_test() const {
    if (data_.n_test() == 0) return std::nan("");
    if (trajectories()) {
        return rollout_eval(model_, data_.test_inputs, data_.test_targets, data_.input_norm,
                            data_.test_targets.dim(1) / data_.frame_channels)
            .rel_l2;
    }
    return evaluate_fields(model_, data_.test_inputs, data_.test_targets, data_.input_norm, data_.target_norm,
                           cfg_.batch_size);
}

template <Scalar T>
double Trainer<T>::evaluate_train() const {
    if (trajectories()) {
        return rollout_eval(model_, data_.train_inputs, data_.train_targets, data_.input_norm,
                            data_.train_targets.dim(1) / data_.frame_channels)
            .rel_l2;
    }
    return evaluate_fields(model_, data_.train_inputs, data_.train_targets, data_.input_norm, data_.target_norm,
                           cfg_.batch_size);
}

template <Scalar T>
EpochMetrics Trainer<T>::run_epoch() {
    const auto start = std::chrono::steady_clock::now();
    const double lr = step_lr(epoch_, cfg_.lr, cfg_.step_size, cfg_.gamma);
    const std::size_t n = data_.n_train();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    // Fisher-Yates on raw engine output so the permutation does not depend on
    // the standard library's distribution implementation.
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng_() % i]);

    double weighted = 0;
    for (std::size_t b = 0; b < n; b += cfg_.batch_size) {
        const std::vector<std::size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(b),
                                           order.begin() + static_cast<std::ptrdiff_t>(std::min(n, b + cfg_.batch_size)));
        weighted += train_batch(idx, lr) * static_cast<double>(idx.size());
    }
    ++epoch_;
    EpochMetrics m{epoch_, lr, weighted / static_cast<double>(n), evaluate_test(), 0.0};
    m.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history_.push_back(m);
    return m;
}

template <Scalar T>
void Trainer<T>::train(const std::function<void(const EpochMetrics&)>& on_epoch,
                       const std::optional<fs::path>& checkpoint_dir) {
    while (epoch_ < cfg_.epochs) {
        const EpochMetrics m = run_epoch();
        if (on_epoch) on_epoch(m);
        if (checkpoint_dir && cfg_.checkpoint_every > 0 && epoch_ % cfg_.checkpoint_every == 0 && epoch_ < cfg_.epochs) {
            save_checkpoint(*checkpoint_dir, {});
        }
    }
}

template <Scalar T>
void Trainer<T>::save_checkpoint(const fs::path& dir, const std::string& config_text) const {
    fs::path staging = dir;
    staging += ".partial";
    std::error_code ec;
    fs::remove_all(staging, ec);
    fs::create_directories(staging / "params", ec);
    fs::create_directories(staging / "adam_m", ec);
    fs::create_directories(staging / "adam_v", ec);
    if (ec) throw DataError(Errc::io_failure, "cannot create " + staging.string() + ": " + ec.message());

    const auto& params = opt_.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
        const std::string file = param_file(k, params[k]->name);
        io::write_tensor(staging / "params" / file, params[k]->value);
        io::write_tensor(staging / "adam_m" / file, opt_.first_moments()[k]);
        io::write_tensor(staging / "adam_v" / file, opt_.second_moments()[k]);
    }
    io::write_tensor(staging / "input_norm.dsnt", data_.input_norm.to_tensor());
    io::write_tensor(staging / "target_norm.dsnt", data_.target_norm.to_tensor());
    io::write_text_file(staging / "history.csv", history_csv(history_));

    // A periodic save keeps the config text of the last full save.
    std::string cfg_text = config_text;
    if (cfg_text.empty() && fs::exists(dir / "config.cfg")) cfg_text = io::read_text_file(dir / "config.cfg");
    if (!cfg_text.empty()) io::write_text_file(staging / "config.cfg", cfg_text);

    std::ostringstream rng_state;
    rng_state << rng_;
    std::ostringstream meta;
    meta << "format = " << kCheckpointFormat << '\n'
         << "kind = " << model_.kind() << '\n'
         << "dtype = " << to_string(dtype_of<T>()) << '\n'
         << "epoch = " << epoch_ << '\n'
         << "step = " << opt_.steps() << '\n'
         << "seed = " << cfg_.seed << '\n'
         << "config_hash = " << hex64(io::fnv1a64(cfg_text)) << '\n'
         << "parameters = " << params.size() << '\n'
         << "rng = " << rng_state.str() << '\n';
    io::write_text_file(staging / "checkpoint.txt", meta.str());

    fs::remove_all(dir, ec);
    fs::rename(staging, dir, ec);
    if (ec) throw DataError(Errc::io_failure, "cannot move checkpoint into " + dir.string() + ": " + ec.message());
}

CheckpointInfo read_checkpoint_info(const fs::path& dir) {
    const fs::path path = dir / "checkpoint.txt";
    std::vector<io::KeyValue> entries;
    try {
        entries = io::parse_key_values(io::read_text_file(path), path.string());
    } catch (const ConfigError& e) {
        throw DataError(Errc::corrupt_file, e.what());
    }
    CheckpointInfo info;
    bool has_format = false;
    try {
        for (const io::KeyValue& kv : entries) {
            if (kv.key == "format") {
                if (io::parse_long(kv.value, kv.key) != kCheckpointFormat) {
                    throw DataError(Errc::corrupt_file, path.string() + ": unsupported format " + kv.value);
                }
                has_format = true;
            } else if (kv.key == "kind") {
                info.kind = kv.value;
            } else if (kv.key == "dtype") {
                if (kv.value == "float32") info.dtype = DType::float32;
                else if (kv.value == "float64") info.dtype = DType::float64;
                else throw DataError(Errc::corrupt_file, path.string() + ": unknown dtype " + kv.value);
            } else if (kv.key == "epoch") {
                info.epoch = io::parse_size(kv.value, kv.key);
            } else if (kv.key == "step") {
                info.step = io::parse_size(kv.value, kv.key);
            } else if (kv.key == "seed") {
                info.seed = io::parse_size(kv.value, kv.key);
            } else if (kv.key == "config_hash") {
                info.config_hash = std::stoull(kv.value, nullptr, 16);
            } else if (kv.key == "rng") {
                info.rng_state = kv.value;
            }
        }
    } catch (const ConfigError& e) {
        throw DataError(Errc::corrupt_file, path.string() + ": " + e.what());
    } catch (const std::logic_error& e) {
        throw DataError(Errc::corrupt_file, path.string() + ": bad config_hash");
    }
    if (!has_format) throw DataError(Errc::corrupt_file, path.string() + ": missing format line");
    return info;
}

template <Scalar T>
void load_parameters(nn::NeuralOperator<T>& model, const fs::path& dir) {
    const CheckpointInfo info = read_checkpoint_info(dir);
    if (info.kind != model.kind()) {
        throw DataError(Errc::data_mismatch, dir.string() + " holds a " + info.kind + " model, not " + model.kind());
    }
    const auto params = model.parameters();
    for (std::size_t k = 0; k < params.size(); ++k) {
        const fs::path file = dir / "params" / param_file(k, params[k]->name);
        Tensor<T> value = io::read_tensor_exact<T>(file);
        if (value.shape() != params[k]->value.shape()) {
            throw DataError(Errc::shape_mismatch, file.string() + ": shape " + shape_string(value.shape()) +
                                                      ", model expects " + shape_string(params[k]->value.shape()));
        }
        params[k]->value = std::move(value);
    }
}

CheckpointNormalizers read_checkpoint_normalizers(const fs::path& dir) {
    return {io::Normalizer::from_tensor(io::read_tensor_exact<double>(dir / "input_norm.dsnt")),
            io::Normalizer::from_tensor(io::read_tensor_exact<double>(dir / "target_norm.dsnt"))};
}

template <Scalar T>
void Trainer<T>::load_checkpoint(const fs::path& dir, const std::string& config_text) {
    const CheckpointInfo info = read_checkpoint_info(dir);
    if (info.dtype != dtype_of<T>()) {
        throw DataError(Errc::dtype_mismatch, dir.string() + " was written with " + std::string(to_string(info.dtype)));
    }
    if (!config_text.empty() && info.config_hash != io::fnv1a64(config_text)) {
        throw ConfigError(dir.string() + " was written for a different run configuration");
    }
    const CheckpointNormalizers norms = read_checkpoint_normalizers(dir);
    if (!(norms.input == data_.input_norm) || !(norms.target == data_.target_norm)) {
        throw DataError(Errc::data_mismatch, dir.string() + ": stored normalizer differs from the dataset's");
    }
    load_parameters(model_, dir);
    const auto& params = opt_.params();
    for (std::size_t k = 0; k < params.size(); ++k) {
        const std::string file = param_file(k, params[k]->name);
        opt_.first_moments()[k] = io::read_tensor_exact<T>(dir / "adam_m" / file);
        opt_.second_moments()[k] = io::read_tensor_exact<T>(dir / "adam_v" / file);
        if (opt_.first_moments()[k].shape() != params[k]->value.shape() ||
            opt_.second_moments()[k].shape() != params[k]->value.shape()) {
            throw DataError(Errc::shape_mismatch, dir.string() + ": optimizer moments of " + params[k]->name +
                                                      " have the wrong shape");
        }
    }
    opt_.set_steps(info.step);
    epoch_ = info.epoch;
    std::istringstream rng_in(info.rng_state);
    rng_in >> rng_;
    if (rng_in.fail()) throw DataError(Errc::corrupt_file, dir.string() + ": unreadable RNG state");
    history_ = parse_history(io::read_text_file(dir / "history.csv"), (dir / "history.csv").string());
    if (history_.size() != epoch_) {
        throw DataError(Errc::corrupt_file, dir.string() + ": history holds " + std::to_string(history_.size()) +
                                                " epochs, metadata says " + std::to_string(epoch_));
    }
}

#define DSENO_INSTANTIATE(T)                                                                                     \
    template class Trainer<T>;                                                                                   \
    template double evaluate_fields(const nn::NeuralOperator<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                    const io::Normalizer&, const io::Normalizer&, std::size_t);                 \
    template Tensor<T> predict_fields(const nn::NeuralOperator<T>&, const Tensor<T>&, const io::Normalizer&,   \
                                      const io::Normalizer&, std::size_t);                                      \
    template Rollout<T> rollout_eval(const nn::NeuralOperator<T>&, const Tensor<T>&, const Tensor<T>&,          \
                                     const io::Normalizer&, std::size_t);                                        \
    template Tensor<T> shift_window(const Tensor<T>&, const Tensor<T>&);                                        \
    template double rollout_loss_with_grad(nn::NeuralOperator<T>&, const Tensor<T>&, const Tensor<T>&,           \
                                           const io::Normalizer&);                                        \
    template Tensor<T> channel_slice(const Tensor<T>&, std::size_t, std::size_t);                               \
    template void load_parameters(nn::NeuralOperator<T>&, const fs::path&);

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::train
