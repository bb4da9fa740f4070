// Dense matrix primitives: thin SVD, Procrustes alignment, block projections,
// factor stacking and text I/O.
//
// Matrices are Eigen::MatrixXd, column-major.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace lowrank {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Base for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultRankTol = 1e-6;

struct SvdResult {
  Matrix left;     // n x k, orthonormal columns
  Vector singulars;  // nonincreasing, k = min(n, m)
  Matrix right;    // m x k, orthonormal columns

  // Count of singular values above tau * sigma_1. Zero matrices have rank 0.
  Index rank(double tau = kDefaultRankTol) const;
};

// Thin SVD with sign canonicalization: the largest-magnitude entry of every
// left singular vector is made positive. Throws Error on non-convergence.
SvdResult thin_svd(const Matrix& x);

Index numerical_rank(const Matrix& x, double tau = kDefaultRankTol);

// Rank of a factor U read on the scale of U U^T: counts sigma_i(U)^2 > tau *
// sigma_1(U)^2, so that factor ranks and product ranks use the same cutoff.
Index factor_rank(const Matrix& u, double tau = kDefaultRankTol);

struct FactorPair {
  Matrix U;
  Matrix V;

  FactorPair() = default;
  FactorPair(Matrix u, Matrix v);

  Index n() const { return U.rows(); }
  Index m() const { return V.rows(); }
  Index r() const { return U.cols(); }
  Matrix product() const { return U * V.transpose(); }
  double squared_norm() const { return U.squaredNorm() + V.squaredNorm(); }
  double norm() const { return std::sqrt(squared_norm()); }

  static FactorPair zeros(Index n, Index m, Index r);

  FactorPair& operator+=(const FactorPair& o);
  FactorPair& operator-=(const FactorPair& o);
  FactorPair& operator*=(double s);
};

FactorPair operator+(FactorPair a, const FactorPair& b);
FactorPair operator-(FactorPair a, const FactorPair& b);
FactorPair operator*(double s, FactorPair a);
double inner(const FactorPair& a, const FactorPair& b);

// W = (U; V) and W_hat = (U; -V).
Matrix stack(const FactorPair& fp);
Matrix stack_hat(const FactorPair& fp);
FactorPair unstack(const Matrix& w, Index n);

// Keep the diagonal blocks (split at n) / keep the off-diagonal blocks.
Matrix p_on(const Matrix& a, Index n);
Matrix p_off(const Matrix& a, Index n);

struct ProcrustesResult {
  Matrix rotation;
  double distance = 0.0;
};

// argmin over orthogonal R of ||A - B R||_F.
ProcrustesResult procrustes(const Matrix& a, const Matrix& b);

// sigma_1 by power iteration on X^T X from a fixed-seed start vector.
double spectral_norm(const Matrix& x, double tol = 1e-10);

// Text format: "rows cols" header, then one whitespace-separated row per line,
// 17 significant digits.
void write_matrix(std::ostream& os, const Matrix& x);
Matrix read_matrix(std::istream& is);
void save_matrix(const std::string& path, const Matrix& x);
Matrix load_matrix(const std::string& path);

// Vectors: length on the first line, then one value per line.
void write_vector(std::ostream& os, const Vector& v);
Vector read_vector(std::istream& is);
void save_vector(const std::string& path, const Vector& v);
Vector load_vector(const std::string& path);

// Formats a double with 17 significant digits.
std::string format_double(double x);

}  // namespace lowrank
