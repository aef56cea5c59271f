#pragma once

// Row-major GEMM entry points on raw buffers, backed by Eigen. Each call is
// rewritten as the equivalent column-major product, which is the orientation
// Eigen's packed kernels handle best for our tall-skinny shapes.

#include <cstddef>

#include <Eigen/Core>

namespace dseno::nn::detail {

template <typename T>
using ColMajor = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>>;
template <typename T>
using ConstColMajor =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>>;

inline Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }

/// C(MxN) = [C +] A(MxK) * B(KxN)
template <typename T>
void gemm_ab(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
             bool accumulate) {
    ColMajor<T> ct(c, idx(n), idx(m));
    ConstColMajor<T> bt(b, idx(n), idx(k));
    ConstColMajor<T> at(a, idx(k), idx(m));
    if (accumulate) {
        ct.noalias() += bt * at;
    } else {
        ct.noalias() = bt * at;
    }
}

/// C(MxN) = [C +] A(MxK) * B(NxK)^T
template <typename T>
void gemm_abt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
              bool accumulate) {
    ColMajor<T> ct(c, idx(n), idx(m));
    ConstColMajor<T> bt(b, idx(k), idx(n));
    ConstColMajor<T> at(a, idx(k), idx(m));
    if (accumulate) {
        ct.noalias() += bt.transpose() * at;
    } else {
        ct.noalias() = bt.transpose() * at;
    }
}

/// C(MxN) = [C +] A(KxM)^T * B(KxN)
template <typename T>
void gemm_atb(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
              bool accumulate) {
    ColMajor<T> ct(c, idx(n), idx(m));
    ConstColMajor<T> bt(b, idx(n), idx(k));
    ConstColMajor<T> at(a, idx(m), idx(k));
    if (accumulate) {
        ct.noalias() += bt * at.transpose();
    } else {
        ct.noalias() = bt * at.transpose();
    }
}

// Tile variants: the N-extent operand is a column block of a wider row-major
// matrix with leading dimension ld.
template <typename T>
using StridedColMajor = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>, 0,
                                   Eigen::OuterStride<>>;
template <typename T>
using ConstStridedColMajor =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>, 0,
               Eigen::OuterStride<>>;

/// C(MxN, leading dim ldc) = A(MxK) * B(KxN)
template <typename T>
void gemm_ab_tile(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
                  std::size_t ldc) {
    StridedColMajor<T> ct(c, idx(n), idx(m), Eigen::OuterStride<>(idx(ldc)));
    ConstColMajor<T> bt(b, idx(n), idx(k));
    ConstColMajor<T> at(a, idx(k), idx(m));
    ct.noalias() = bt * at;
}

/// C(MxN) = [C +] A(MxK, leading dim lda) * B(NxK)^T
template <typename T>
void gemm_abt_tile(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
                   T* c, bool accumulate) {
    ColMajor<T> ct(c, idx(n), idx(m));
    ConstColMajor<T> bt(b, idx(k), idx(n));
    ConstStridedColMajor<T> at(a, idx(k), idx(m), Eigen::OuterStride<>(idx(lda)));
    if (accumulate) {
        ct.noalias() += bt.transpose() * at;
    } else {
        ct.noalias() = bt.transpose() * at;
    }
}

/// C(MxN) = A(KxM)^T * B(KxN, leading dim ldb)
template <typename T>
void gemm_atb_tile(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, std::size_t ldb,
                   T* c) {
    ColMajor<T> ct(c, idx(n), idx(m));
    ConstStridedColMajor<T> bt(b, idx(n), idx(k), Eigen::OuterStride<>(idx(ldb)));
    ConstColMajor<T> at(a, idx(m), idx(k));
    ct.noalias() = bt * at.transpose();
}

}  // namespace dseno::nn::detail
