#include "lowrank/lanczos.hpp"

#include <cmath>
#include <random>

namespace lowrank {

namespace {

Vector random_unit(Index dim, std::mt19937_64& gen) {
  std::normal_distribution<double> normal;
  Vector v(dim);
  for (Index i = 0; i < dim; ++i) v(i) = normal(gen);
  return v / v.norm();
}

// Two passes of classical Gram-Schmidt against the first k columns of Q.
void orthogonalize(Vector& w, const Matrix& q, Index k) {
  if (k == 0) return;
  for (int pass = 0; pass < 2; ++pass) {
    const Vector c = q.leftCols(k).transpose() * w;
    w.noalias() -= q.leftCols(k) * c;
  }
}

}  // namespace

EigenProbe lanczos_extreme(const LinearMap& apply, Index dim, SpectrumEnd which,
                           double tol, int max_iter, std::uint64_t seed) {
  EigenProbe out;
  if (dim <= 0) {
    out.converged = true;
    return out;
  }
  const Index kmax = std::min<Index>(dim, std::max(1, max_iter));
  std::mt19937_64 gen(seed);

  Matrix q(dim, kmax);
  Vector alpha(kmax), beta(kmax);
  q.col(0) = random_unit(dim, gen);

  Eigen::SelfAdjointEigenSolver<Matrix> tri;
  for (Index j = 0; j < kmax; ++j) {
    Vector w = apply(q.col(j));
    alpha(j) = q.col(j).dot(w);
    w -= alpha(j) * q.col(j);
    if (j > 0) w -= beta(j - 1) * q.col(j - 1);
    orthogonalize(w, q, j + 1);
    beta(j) = w.norm();

    const Index k = j + 1;
    tri.computeFromTridiagonal(alpha.head(k), beta.head(k - 1), Eigen::ComputeEigenvectors);
    const Index pick = which == SpectrumEnd::kSmallest ? 0 : k - 1;
    const double theta = tri.eigenvalues()(pick);
    out.norm_estimate = std::max(std::abs(tri.eigenvalues()(0)),
                                 std::abs(tri.eigenvalues()(k - 1)));
    const double res = std::abs(beta(j) * tri.eigenvectors()(k - 1, pick));
    out.value = theta;
    out.residual = res;
    out.iterations = static_cast<int>(k);

    const double scale = std::max(out.norm_estimate, 1e-300);
    const bool exhausted = k == dim;
    if (res <= tol * scale || exhausted) {
      out.converged = true;
      break;
    }
    if (k == kmax) break;

    // An invariant subspace was found; continue in its complement so that the
    // wanted end of the full spectrum is still reachable.
    if (beta(j) <= 1e-13 * scale) {
      Vector fresh = random_unit(dim, gen);
      orthogonalize(fresh, q, k);
      const double fn = fresh.norm();
      if (fn == 0.0) {
        out.converged = true;
        break;
      }
      beta(j) = 0.0;
      q.col(k) = fresh / fn;
    } else {
      q.col(k) = w / beta(j);
    }
  }
  const Index k = out.iterations;
  const Index pick = which == SpectrumEnd::kSmallest ? 0 : k - 1;
  out.vector = q.leftCols(k) * tri.eigenvectors().col(pick);
  out.vector.normalize();
  return out;
}

}  // namespace lowrank
