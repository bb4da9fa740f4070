#include "lowrank/random.hpp"

#include <cmath>

namespace lowrank {

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Matrix gaussian_matrix(Index rows, Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix x(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) x(i, j) = normal(rng);
  return x;
}

Vector gaussian_vector(Index n, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = normal(rng);
  return v;
}

Matrix random_low_rank_unit(Index n, Index m, Index k, Rng& rng) {
  const Matrix a = gaussian_matrix(n, k, rng);
  const Matrix b = gaussian_matrix(m, k, rng);
  Matrix x = a * b.transpose();
  return x / x.norm();
}

Vector uniform_ball_point(Index dim, double radius, Rng& rng) {
  Vector d = gaussian_vector(dim, rng);
  d.normalize();
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng);
  return d * (radius * std::pow(u, 1.0 / static_cast<double>(dim)));
}

}  // namespace lowrank
