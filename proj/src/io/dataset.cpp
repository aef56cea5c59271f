#include "dseno/io/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <numeric>

#include "dseno/io/tensor_file.hpp"

namespace dseno::io {

namespace {

std::string dims_string(const Shape& s) { return shape_string(s); }

void require_file(const std::filesystem::path& path, const char* key) {
    if (path.empty()) throw DataError(Errc::io_failure, std::string("manifest key '") + key + "' is empty");
    if (!std::filesystem::is_regular_file(path)) {
        throw DataError(Errc::io_failure, std::string("missing ") + key + " file " + path.string());
    }
}

// (S, C, H, W, T) -> (C, T, H, W) for sample s.
template <Scalar T>
Tensor<T> trajectory_of(const Tensor<T>& all, std::size_t s) {
    const std::size_t c = all.dim(1), h = all.dim(2), w = all.dim(3), steps = all.dim(4);
    Tensor<T> out({c, steps, h, w});
    const T* src = all.raw() + s * c * h * w * steps;
    for (std::size_t ch = 0; ch < c; ++ch)
        for (std::size_t y = 0; y < h; ++y)
            for (std::size_t x = 0; x < w; ++x)
                for (std::size_t t = 0; t < steps; ++t)
                    out(ch, t, y, x) = src[((ch * h + y) * w + x) * steps + t];
    return out;
}

// Stacks rank-3 tensors into (N, C, H, W).
template <Scalar T>
Tensor<T> stack(const std::vector<Tensor<T>>& items) {
    Shape shape{items.size()};
    shape.insert(shape.end(), items.front().shape().begin(), items.front().shape().end());
    Tensor<T> out(shape);
    const std::size_t stride = items.front().size();
    for (std::size_t i = 0; i < items.size(); ++i) std::copy_n(items[i].raw(), stride, out.raw() + i * stride);
    return out;
}

void check_split(const Manifest& m, std::size_t stored, std::size_t n_train, std::size_t n_test) {
    if (n_train == 0) throw DataError("manifest '" + m.name + "': n_train must be positive");
    if (n_train + n_test > stored) {
        throw DataError("manifest '" + m.name + "': n_train + n_test = " + std::to_string(n_train + n_test) +
                        " exceeds the " + std::to_string(stored) + " stored samples");
    }
}

std::size_t resolved(std::size_t requested, std::size_t declared, const char* what) {
    if (requested == 0) return declared;
    if (requested > declared) {
        throw ConfigError(std::string(what) + " = " + std::to_string(requested) + " exceeds the manifest's " +
                          std::to_string(declared));
    }
    return requested;
}

}  // namespace

template <Scalar T>
Tensor<T> darcy_subsample(const Tensor<T>& field, std::size_t stride) {
    if (field.rank() < 2) throw ConfigError(Errc::shape_mismatch, "subsampling needs a rank >= 2 tensor");
    const std::size_t h = field.dim(field.rank() - 2), w = field.dim(field.rank() - 1);
    if (stride == 0 || (h - 1) % stride != 0 || (w - 1) % stride != 0) {
        throw ConfigError("stride " + std::to_string(stride) + " does not divide extents " + std::to_string(h - 1) +
                          " and " + std::to_string(w - 1) + " of a " + std::to_string(h) + "x" + std::to_string(w) +
                          " grid");
    }
    if (stride == 1) return field;
    const std::size_t rh = (h - 1) / stride + 1, rw = (w - 1) / stride + 1;
    Shape shape = field.shape();
    shape[shape.size() - 2] = rh;
    shape[shape.size() - 1] = rw;
    Tensor<T> out(shape);
    const std::size_t planes = field.size() / (h * w);
    for (std::size_t p = 0; p < planes; ++p)
        for (std::size_t y = 0; y < rh; ++y)
            for (std::size_t x = 0; x < rw; ++x)
                out[(p * rh + y) * rw + x] = field[(p * h + y * stride) * w + x * stride];
    return out;
}

template <Scalar T>
Tensor<T> append_coordinates(const Tensor<T>& x) {
    require_rank4(x, "coordinate input");
    const std::size_t n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    Tensor<T> out({n, c + 2, h, w});
    for (std::size_t s = 0; s < n; ++s) {
        for (std::size_t ch = 0; ch < c; ++ch) {
            auto src = x.plane(s, ch);
            std::copy(src.begin(), src.end(), out.plane(s, ch).begin());
        }
        auto cx = out.plane(s, c);
        auto cy = out.plane(s, c + 1);
        for (std::size_t yy = 0; yy < h; ++yy)
            for (std::size_t xx = 0; xx < w; ++xx) {
                cx[yy * w + xx] = w > 1 ? static_cast<T>(static_cast<double>(xx) / static_cast<double>(w - 1)) : T{0};
                cy[yy * w + xx] = h > 1 ? static_cast<T>(static_cast<double>(yy) / static_cast<double>(h - 1)) : T{0};
            }
    }
    return out;
}

template <Scalar T>
Window<T> ns_windows(const Tensor<T>& trajectory, std::size_t history, std::size_t horizon) {
    if (trajectory.rank() != 4) {
        throw DataError(Errc::shape_mismatch, "trajectory must be (C_t, T, H, W), got " + dims_string(trajectory.shape()));
    }
    const std::size_t c = trajectory.dim(0), steps = trajectory.dim(1), h = trajectory.dim(2), w = trajectory.dim(3);
    if (history == 0 || horizon == 0) throw ConfigError("history and horizon must be positive");
    if (steps < history + horizon) {
        throw DataError(Errc::shape_mismatch, "trajectory has " + std::to_string(steps) + " frames, windows need " +
                                                  std::to_string(history + horizon));
    }
    Window<T> out{Tensor<T>({history * c, h, w}), Tensor<T>({horizon * c, h, w})};
    const std::size_t hw = h * w;
    for (std::size_t t = 0; t < history + horizon; ++t)
        for (std::size_t ch = 0; ch < c; ++ch) {
            const T* src = trajectory.raw() + (ch * steps + t) * hw;
            T* dst = t < history ? out.input.raw() + (t * c + ch) * hw : out.target.raw() + ((t - history) * c + ch) * hw;
            std::copy_n(src, hw, dst);
        }
    return out;
}

template <Scalar T>
Tensor<T> gather(const Tensor<T>& batch, const std::vector<std::size_t>& indices) {
    if (indices.empty()) throw ConfigError(Errc::shape_mismatch, "cannot gather zero samples");
    Shape shape = batch.shape();
    const std::size_t stride = batch.size() / shape[0];
    shape[0] = indices.size();
    Tensor<T> out(shape);
    for (std::size_t i = 0; i < indices.size(); ++i) {
        if (indices[i] >= batch.dim(0)) {
            throw ConfigError(Errc::shape_mismatch, "sample index " + std::to_string(indices[i]) + " out of range");
        }
        std::copy_n(batch.raw() + indices[i] * stride, stride, out.raw() + i * stride);
    }
    return out;
}

template <Scalar T>
Tensor<T> slice_samples(const Tensor<T>& batch, std::size_t begin, std::size_t end) {
    std::vector<std::size_t> idx(end - begin);
    std::iota(idx.begin(), idx.end(), begin);
    return gather(batch, idx);
}

template <Scalar T>
Dataset<T> make_dataset(const Manifest& manifest, const Tensor<T>& inputs, const Tensor<T>& targets,
                        const LoadOptions& options) {
    manifest.validate();
    Dataset<T> d;
    d.manifest = manifest;
    const std::size_t n_train = resolved(options.n_train, manifest.n_train, "n_train");
    const std::size_t n_test = resolved(options.n_test, manifest.n_test, "n_test");
    d.manifest.n_train = n_train;
    d.manifest.n_test = n_test;
    const std::size_t stored = inputs.dim(0);
    check_split(manifest, stored, n_train, n_test);

    Tensor<T> in_all, out_all;
    if (manifest.trajectories()) {
        if (inputs.rank() != 5) {
            throw DataError(Errc::shape_mismatch, "trajectory inputs must be (S, C, H, W, T), got " +
                                                      dims_string(inputs.shape()));
        }
        std::vector<Tensor<T>> win_in, win_out;
        for (std::size_t s = 0; s < stored; ++s) {
            if (s >= n_train && s < stored - n_test) continue;
            Tensor<T> traj = darcy_subsample(trajectory_of(inputs, s), options.stride);
            Window<T> win = ns_windows(traj, manifest.ns_history, manifest.ns_horizon);
            win_in.push_back(std::move(win.input));
            win_out.push_back(std::move(win.target));
        }
        in_all = stack(win_in);
        out_all = stack(win_out);
        d.frame_channels = inputs.dim(1);
        // Trajectories between the two splits were skipped above.
        d.train_inputs = slice_samples(in_all, 0, n_train);
        d.train_targets = slice_samples(out_all, 0, n_train);
        if (n_test > 0) {
            d.test_inputs = slice_samples(in_all, n_train, n_train + n_test);
            d.test_targets = slice_samples(out_all, n_train, n_train + n_test);
        }
    } else {
        require_rank4(inputs, "dataset inputs");
        require_rank4(targets, "dataset targets");
        if (targets.dim(0) != stored || targets.dim(2) != inputs.dim(2) || targets.dim(3) != inputs.dim(3)) {
            throw DataError(Errc::shape_mismatch, "inputs " + dims_string(inputs.shape()) + " and targets " +
                                                      dims_string(targets.shape()) + " disagree");
        }
        in_all = darcy_subsample(inputs, options.stride);
        out_all = darcy_subsample(targets, options.stride);
        d.train_inputs = slice_samples(in_all, 0, n_train);
        d.train_targets = slice_samples(out_all, 0, n_train);
        if (n_test > 0) {
            d.test_inputs = slice_samples(in_all, stored - n_test, stored);
            d.test_targets = slice_samples(out_all, stored - n_test, stored);
        }
    }
    if (manifest.append_coords) {
        d.train_inputs = append_coordinates(d.train_inputs);
        if (n_test > 0) d.test_inputs = append_coordinates(d.test_inputs);
    }

    if (manifest.normalize == Normalization::none) {
        d.input_norm = Normalizer::identity(d.train_inputs.dim(1));
        d.target_norm = Normalizer::identity(d.train_targets.dim(1));
    } else if (manifest.trajectories()) {
        // Predicted frames are fed back as inputs, so both sides share one fit.
        d.input_norm = Normalizer::fit<T>({&d.train_inputs, &d.train_targets}, d.frame_channels);
        d.target_norm = d.input_norm;
    } else {
        d.input_norm = Normalizer::fit(d.train_inputs, d.train_inputs.dim(1));
        d.target_norm = Normalizer::fit(d.train_targets, d.train_targets.dim(1));
    }
    return d;
}

template <Scalar T>
Dataset<T> load_dataset(const Manifest& manifest, const LoadOptions& options) {
    manifest.validate();
    require_file(manifest.inputs, "inputs");
    const bool traj = manifest.trajectories();
    if (!traj) require_file(manifest.targets, "targets");

    const TensorHeader hin = read_tensor_header(manifest.inputs);
    const std::size_t want_rank = traj ? 5 : 4;
    if (hin.shape.size() != want_rank) {
        throw DataError(Errc::shape_mismatch, manifest.inputs.string() + ": expected rank " + std::to_string(want_rank) +
                                                  ", got " + dims_string(hin.shape));
    }
    const Shape mesh_in(hin.shape.begin() + 2, hin.shape.end());
    if (mesh_in != manifest.mesh) {
        throw DataError(Errc::shape_mismatch, manifest.inputs.string() + ": mesh " + dims_string(mesh_in) +
                                                  " does not match the manifest's " + dims_string(manifest.mesh));
    }
    if (!manifest.input_channels.empty() && manifest.input_channels.size() != hin.shape[1]) {
        throw DataError(Errc::shape_mismatch, manifest.inputs.string() + ": " + std::to_string(hin.shape[1]) +
                                                  " channels, manifest labels " +
                                                  std::to_string(manifest.input_channels.size()));
    }
    Tensor<T> targets;
    if (!traj) {
        const TensorHeader hout = read_tensor_header(manifest.targets);
        if (hout.shape.size() != 4 || Shape(hout.shape.begin() + 2, hout.shape.end()) != manifest.mesh ||
            hout.shape[0] != hin.shape[0]) {
            throw DataError(Errc::shape_mismatch, manifest.targets.string() + ": dims " + dims_string(hout.shape) +
                                                      " do not match inputs " + dims_string(hin.shape) +
                                                      " and mesh " + dims_string(manifest.mesh));
        }
        if (!manifest.target_channels.empty() && manifest.target_channels.size() != hout.shape[1]) {
            throw DataError(Errc::shape_mismatch, manifest.targets.string() + ": " + std::to_string(hout.shape[1]) +
                                                      " channels, manifest labels " +
                                                      std::to_string(manifest.target_channels.size()));
        }
        targets = read_tensor_as<T>(manifest.targets);
    }
    check_split(manifest, hin.shape[0], resolved(options.n_train, manifest.n_train, "n_train"),
                resolved(options.n_test, manifest.n_test, "n_test"));
    const Tensor<T> inputs = read_tensor_as<T>(manifest.inputs);
    return make_dataset(manifest, inputs, targets, options);
}

#define DSENO_INSTANTIATE(T)                                                                               \
    template Dataset<T> load_dataset<T>(const Manifest&, const LoadOptions&);                             \
    template Dataset<T> make_dataset(const Manifest&, const Tensor<T>&, const Tensor<T>&, const LoadOptions&); \
    template Tensor<T> darcy_subsample(const Tensor<T>&, std::size_t);                                    \
    template Tensor<T> append_coordinates(const Tensor<T>&);                                              \
    template Window<T> ns_windows(const Tensor<T>&, std::size_t, std::size_t);                            \
    template Tensor<T> gather(const Tensor<T>&, const std::vector<std::size_t>&);                         \
    template Tensor<T> slice_samples(const Tensor<T>&, std::size_t, std::size_t);

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::io
