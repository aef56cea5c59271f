#pragma once

#include <cstddef>
#include <vector>

#include "dseno/core/tensor.hpp"

namespace dseno::io {

/// Per-channel z-score: encode(x) = (x - mean) / (std + eps).
/// Channel c of an (N, C, H, W) tensor uses statistics group c % groups, so a
/// history window of C_t-channel frames shares one set per physical channel.
class Normalizer {
public:
    static constexpr double kEps = 1e-8;

    Normalizer() = default;
    Normalizer(std::vector<double> mean, std::vector<double> stddev, double eps);

    /// mean 0, std 1, eps 0: encode and decode are exact no-ops.
    static Normalizer identity(std::size_t groups);

    /// Population statistics over every tensor in `data`, accumulated in double.
    template <Scalar T>
    static Normalizer fit(const std::vector<const Tensor<T>*>& data, std::size_t groups, double eps = kEps);
    template <Scalar T>
    static Normalizer fit(const Tensor<T>& data, std::size_t groups, double eps = kEps) {
        return fit<T>(std::vector<const Tensor<T>*>{&data}, groups, eps);
    }

    template <Scalar T>
    Tensor<T> encode(const Tensor<T>& x) const;
    template <Scalar T>
    Tensor<T> decode(const Tensor<T>& z) const;
    /// Chain rule through decode: multiplies channel c by std + eps.
    template <Scalar T>
    Tensor<T> decode_backward(const Tensor<T>& grad) const;

    std::size_t groups() const noexcept { return mean_.size(); }
    const std::vector<double>& mean() const noexcept { return mean_; }
    const std::vector<double>& stddev() const noexcept { return std_; }
    double eps() const noexcept { return eps_; }

    /// (3, groups) rows: mean, std, eps broadcast. Used by checkpoints.
    Tensor<double> to_tensor() const;
    static Normalizer from_tensor(const Tensor<double>& t);

    friend bool operator==(const Normalizer&, const Normalizer&) = default;

private:
    template <Scalar T>
    void check(const Tensor<T>& x) const;

    std::vector<double> mean_;
    std::vector<double> std_;
    double eps_ = kEps;
};

}  // namespace dseno::io
