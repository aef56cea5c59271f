#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <new>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "dseno/core/error.hpp"

namespace dseno {

using Shape = std::vector<std::size_t>;

enum class DType : std::uint8_t { float32 = 0, float64 = 1 };

std::string_view to_string(DType dtype) noexcept;

template <typename T>
concept Scalar = std::is_same_v<T, float> || std::is_same_v<T, double>;

template <Scalar T>
constexpr DType dtype_of() noexcept {
    return std::is_same_v<T, float> ? DType::float32 : DType::float64;
}

/// Cache-line aligned storage. Vectorized kernels pick code paths by pointer
/// alignment, so fixed alignment keeps results independent of the heap layout.
template <typename T>
struct AlignedAllocator {
    using value_type = T;
    static constexpr std::align_val_t kAlign{64};

    AlignedAllocator() = default;
    template <typename U>
    AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

    T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
    void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

    template <typename U>
    friend bool operator==(const AlignedAllocator&, const AlignedAllocator<U>&) noexcept {
        return true;
    }
};

std::size_t numel(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense row-major array. Rank-4 tensors use the (N, C, H, W) layout.
template <Scalar T>
class Tensor {
public:
    using value_type = T;
    using Storage = std::vector<T, AlignedAllocator<T>>;

    Tensor() = default;

    explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)) {
        validate_shape();
        data_.assign(numel(shape_), fill);
    }

    Tensor(Shape shape, std::initializer_list<T> data) : Tensor(std::move(shape), Storage(data)) {}
    Tensor(Shape shape, const std::vector<T>& data)
        : Tensor(std::move(shape), Storage(data.begin(), data.end())) {}
    Tensor(Shape shape, Storage data) : shape_(std::move(shape)), data_(std::move(data)) {
        validate_shape();
        if (data_.size() != numel(shape_)) {
            throw ConfigError(Errc::shape_mismatch,
                              "tensor data holds " + std::to_string(data_.size()) +
                                  " values but shape " + shape_string(shape_) + " needs " +
                                  std::to_string(numel(shape_)));
        }
    }

    static constexpr DType dtype() noexcept { return dtype_of<T>(); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<T> data() noexcept { return data_; }
    std::span<const T> data() const noexcept { return data_; }
    T* raw() noexcept { return data_.data(); }
    const T* raw() const noexcept { return data_.data(); }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) noexcept {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }
    const T& operator()(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return data_[((n * shape_[1] + c) * shape_[2] + y) * shape_[3] + x];
    }

    /// Contiguous H*W plane of sample n, channel c (rank 4 only).
    std::span<T> plane(std::size_t n, std::size_t c) noexcept {
        const std::size_t hw = shape_[2] * shape_[3];
        return {data_.data() + (n * shape_[1] + c) * hw, hw};
    }
    std::span<const T> plane(std::size_t n, std::size_t c) const noexcept {
        const std::size_t hw = shape_[2] * shape_[3];
        return {data_.data() + (n * shape_[1] + c) * hw, hw};
    }

    void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

    Tensor reshaped(Shape shape) const {
        return Tensor(std::move(shape), data_);
    }

    template <Scalar U>
    Tensor<U> cast() const {
        typename Tensor<U>::Storage out(data_.begin(), data_.end());
        return Tensor<U>(shape_, std::move(out));
    }

    bool all_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    void validate_shape() const {
        for (std::size_t extent : shape_) {
            if (extent == 0) {
                throw ConfigError(Errc::shape_mismatch,
                                  "tensor extents must be positive, got " + shape_string(shape_));
            }
        }
    }

    Shape shape_;
    Storage data_;
};

/// Throws NumericError naming `what` if any value is NaN or infinite.
template <Scalar T>
void require_finite(const Tensor<T>& t, std::string_view what) {
    if (!t.all_finite()) {
        throw NumericError(Errc::non_finite, "non-finite value in " + std::string(what));
    }
}

template <Scalar T>
void require_rank4(const Tensor<T>& t, std::string_view what) {
    if (t.rank() != 4) {
        throw ConfigError(Errc::shape_mismatch, std::string(what) + " must be rank 4 (N,C,H,W), got " +
                                                    shape_string(t.shape()));
    }
}

/// Fills with U(-bound, bound) draws from `rng` in storage order.
template <Scalar T>
void fill_uniform(Tensor<T>& t, double bound, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (T& v : t.data()) v = static_cast<T>(dist(rng));
}

template <Scalar T>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double bound = 1.0) {
    Tensor<T> t(std::move(shape));
    fill_uniform(t, bound, rng);
    return t;
}

/// a += b, shapes must match.
template <Scalar T>
void add_inplace(Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ConfigError(Errc::shape_mismatch,
                          "cannot add " + shape_string(b.shape()) + " into " + shape_string(a.shape()));
    }
    auto out = a.data();
    auto in = b.data();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += in[i];
}

}  // namespace dseno
