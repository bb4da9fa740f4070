// Shared helpers for the unit and acceptance tests: seeded random inputs and
// finite-difference oracles that do not go through the library's derivatives.

#pragma once

#include <cmath>
#include <functional>

#include "lowrank/matcore.hpp"
#include "lowrank/random.hpp"

namespace lowrank::testing {

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1e-300, std::max(std::abs(a), std::abs(b))); }

inline double rel_err(const Matrix& a, const Matrix& b) {
  const double s = std::max(a.norm(), b.norm());
  return s == 0.0 ? 0.0 : (a - b).norm() / s;
}

inline Matrix random_orthogonal(Index k, Rng& rng) {
  Eigen::HouseholderQR<Matrix> qr(gaussian_matrix(k, k, rng));
  Matrix q = qr.householderQ();
  return q;
}

inline FactorPair random_pair(Index n, Index m, Index r, Rng& rng, double scale = 1.0) {
  return {scale * gaussian_matrix(n, r, rng), scale * gaussian_matrix(m, r, rng)};
}

// Central difference of a scalar function of a FactorPair along every coordinate.
inline FactorPair central_gradient(const std::function<double(const FactorPair&)>& f, const FactorPair& x,
                                   double h) {
  FactorPair g = FactorPair::zeros(x.n(), x.m(), x.r());
  FactorPair p = x;
  for (Index j = 0; j < x.U.cols(); ++j)
    for (Index i = 0; i < x.U.rows(); ++i) {
      const double v = p.U(i, j);
      p.U(i, j) = v + h;
      const double fp = f(p);
      p.U(i, j) = v - h;
      const double fm = f(p);
      p.U(i, j) = v;
      g.U(i, j) = (fp - fm) / (2 * h);
    }
  for (Index j = 0; j < x.V.cols(); ++j)
    for (Index i = 0; i < x.V.rows(); ++i) {
      const double v = p.V(i, j);
      p.V(i, j) = v + h;
      const double fp = f(p);
      p.V(i, j) = v - h;
      const double fm = f(p);
      p.V(i, j) = v;
      g.V(i, j) = (fp - fm) / (2 * h);
    }
  return g;
}

// (f(x + t d) - 2 f(x) + f(x - t d)) / t^2.
inline double second_difference(const std::function<double(const FactorPair&)>& f, const FactorPair& x,
                                const FactorPair& d, double t) {
  return (f(x + t * d) - 2 * f(x) + f(x - t * d)) / (t * t);
}

}  // namespace lowrank::testing
