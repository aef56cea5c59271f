#include "dseno/io/normalizer.hpp"

#include <cmath>

namespace dseno::io {

Normalizer::Normalizer(std::vector<double> mean, std::vector<double> stddev, double eps)
    : mean_(std::move(mean)), std_(std::move(stddev)), eps_(eps) {
    if (mean_.empty() || mean_.size() != std_.size()) {
        throw DataError(Errc::shape_mismatch, "normalizer needs matching, non-empty mean and std vectors");
    }
}

Normalizer Normalizer::identity(std::size_t groups) {
    return Normalizer(std::vector<double>(groups, 0.0), std::vector<double>(groups, 1.0), 0.0);
}

template <Scalar T>
Normalizer Normalizer::fit(const std::vector<const Tensor<T>*>& data, std::size_t groups, double eps) {
    if (groups == 0) throw ConfigError("normalizer needs at least one channel group");
    std::vector<double> sum(groups, 0.0), count(groups, 0.0);
    for (const Tensor<T>* t : data) {
        require_rank4(*t, "normalizer data");
        if (t->dim(1) % groups != 0) {
            throw DataError(Errc::shape_mismatch, std::to_string(t->dim(1)) + " channels do not split into " +
                                                      std::to_string(groups) + " groups");
        }
        for (std::size_t n = 0; n < t->dim(0); ++n)
            for (std::size_t c = 0; c < t->dim(1); ++c) {
                for (T v : t->plane(n, c)) sum[c % groups] += v;
                count[c % groups] += static_cast<double>(t->dim(2) * t->dim(3));
            }
    }
    std::vector<double> mean(groups), var(groups, 0.0);
    for (std::size_t g = 0; g < groups; ++g) {
        if (count[g] == 0) throw DataError("normalizer fitted on empty data");
        mean[g] = sum[g] / count[g];
    }
    // Second pass keeps the variance free of cancellation.
    for (const Tensor<T>* t : data)
        for (std::size_t n = 0; n < t->dim(0); ++n)
            for (std::size_t c = 0; c < t->dim(1); ++c)
                for (T v : t->plane(n, c)) {
                    const double d = v - mean[c % groups];
                    var[c % groups] += d * d;
                }
    std::vector<double> stddev(groups);
    for (std::size_t g = 0; g < groups; ++g) stddev[g] = std::sqrt(var[g] / count[g]);
    return Normalizer(std::move(mean), std::move(stddev), eps);
}

template <Scalar T>
void Normalizer::check(const Tensor<T>& x) const {
    require_rank4(x, "normalizer input");
    if (mean_.empty() || x.dim(1) % mean_.size() != 0) {
        throw DataError(Errc::shape_mismatch, "normalizer with " + std::to_string(mean_.size()) +
                                                  " groups cannot map " + std::to_string(x.dim(1)) + " channels");
    }
}

template <Scalar T>
Tensor<T> Normalizer::encode(const Tensor<T>& x) const {
    check(x);
    Tensor<T> out(x.shape());
    for (std::size_t n = 0; n < x.dim(0); ++n)
        for (std::size_t c = 0; c < x.dim(1); ++c) {
            const double m = mean_[c % groups()], s = std_[c % groups()] + eps_;
            auto src = x.plane(n, c);
            auto dst = out.plane(n, c);
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>((src[i] - m) / s);
        }
    return out;
}

template <Scalar T>
Tensor<T> Normalizer::decode(const Tensor<T>& z) const {
    check(z);
    Tensor<T> out(z.shape());
    for (std::size_t n = 0; n < z.dim(0); ++n)
        for (std::size_t c = 0; c < z.dim(1); ++c) {
            const double m = mean_[c % groups()], s = std_[c % groups()] + eps_;
            auto src = z.plane(n, c);
            auto dst = out.plane(n, c);
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i] * s + m);
        }
    return out;
}

template <Scalar T>
Tensor<T> Normalizer::decode_backward(const Tensor<T>& grad) const {
    check(grad);
    Tensor<T> out(grad.shape());
    for (std::size_t n = 0; n < grad.dim(0); ++n)
        for (std::size_t c = 0; c < grad.dim(1); ++c) {
            const double s = std_[c % groups()] + eps_;
            auto src = grad.plane(n, c);
            auto dst = out.plane(n, c);
            for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<T>(src[i] * s);
        }
    return out;
}

Tensor<double> Normalizer::to_tensor() const {
    Tensor<double> t({3, groups()});
    for (std::size_t g = 0; g < groups(); ++g) {
        t[g] = mean_[g];
        t[groups() + g] = std_[g];
        t[2 * groups() + g] = eps_;
    }
    return t;
}

Normalizer Normalizer::from_tensor(const Tensor<double>& t) {
    if (t.rank() != 2 || t.dim(0) != 3) {
        throw DataError(Errc::corrupt_file, "normalizer state must be (3, groups), got " + shape_string(t.shape()));
    }
    const std::size_t g = t.dim(1);
    std::vector<double> mean(t.raw(), t.raw() + g), stddev(t.raw() + g, t.raw() + 2 * g);
    return Normalizer(std::move(mean), std::move(stddev), t[2 * g]);
}

#define DSENO_INSTANTIATE(T)                                                                              \
    template Normalizer Normalizer::fit<T>(const std::vector<const Tensor<T>*>&, std::size_t, double); \
    template Tensor<T> Normalizer::encode(const Tensor<T>&) const;                                     \
    template Tensor<T> Normalizer::decode(const Tensor<T>&) const;                                     \
    template Tensor<T> Normalizer::decode_backward(const Tensor<T>&) const;

DSENO_INSTANTIATE(float)
DSENO_INSTANTIATE(double)
#undef DSENO_INSTANTIATE

}  // namespace dseno::io
