// Extreme eigenpairs of a symmetric operator given only as a matrix-vector
// product. Lanczos with full reorthogonalization.

#pragma once

#include <cstdint>
#include <functional>

#include "lowrank/matcore.hpp"

namespace lowrank {

enum class SpectrumEnd { kSmallest, kLargest };

struct EigenProbe {
  double value = 0.0;
  Vector vector;           // unit norm
  double residual = 0.0;   // ||A v - value v||
  double norm_estimate = 0.0;  // max |Ritz value| seen
  int iterations = 0;
  bool converged = false;
};

using LinearMap = std::function<Vector(const Vector&)>;

// Stops when the residual of the wanted Ritz pair is at most
// tol * norm_estimate, or when the Krylov space exhausts the dimension.
EigenProbe lanczos_extreme(const LinearMap& apply, Index dim, SpectrumEnd which,
                           double tol, int max_iter, std::uint64_t seed);

}  // namespace lowrank
