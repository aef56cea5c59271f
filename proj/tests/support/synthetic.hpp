#pragma once

#include <cstdint>

#include "dseno/core/tensor.hpp"

namespace dseno::testing {



struct FieldPairs {
    Tensor<float> inputs;   // (N, 1, s, s)
    Tensor<float> targets;  // (N, 1, s, s)
};

/// Darcy flow -div(a grad u) = 1 on the unit square, u = 0 on the boundary.
/// a is a thresholded Gaussian random field (12 where the field is positive,
/// 3 elsewhere); u comes from a five-point finite-volume solve with
/// harmonic-mean face coefficients.
FieldPairs synthetic_darcy(std::size_t n, std::size_t size, std::uint64_t seed);

/// Periodic advection-diffusion of a few random Fourier modes on an h x w
/// grid. Returns (N, 1, h, w, steps), the on-disk trajectory layout.
Tensor<float> synthetic_trajectories(std::size_t n, std::size_t h, std::size_t w, std::size_t steps,
                                     std::uint64_t seed);

}  // namespace dseno::testing
