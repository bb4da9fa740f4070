// Seeded random draws. Every stream is derived from (seed, stream id) so that
// parallel trials stay reproducible regardless of scheduling.

#pragma once

#include <cstdint>
#include <random>

#include "lowrank/matcore.hpp"

namespace lowrank {

using Rng = std::mt19937_64;

// splitmix64 finalizer applied to a seed/stream combination.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng);
Vector gaussian_vector(Index n, Rng& rng);

// Random rank-k matrix with unit Frobenius norm (product of Gaussian factors).
Matrix random_low_rank_unit(Index n, Index m, Index k, Rng& rng);

// Uniform point in the ball of given radius in R^dim: Gaussian direction
// scaled by radius * u^(1/dim).
Vector uniform_ball_point(Index dim, double radius, Rng& rng);

}  // namespace lowrank
