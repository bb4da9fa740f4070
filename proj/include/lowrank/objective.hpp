// The loss f, the factored objective
//   Phi(U, V) = f(U V^T) + lambda/2 (||U||_F^2 + ||V||_F^2),
// its gradient and matrix-free Hessian, the Xi map and a smallest-eigenvalue
// probe.

#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "lowrank/matcore.hpp"
#include "lowrank/report.hpp"
#include "lowrank/sampling.hpp"

namespace lowrank {

// Twice differentiable loss on n x m matrices.
class Loss {
 public:
  virtual ~Loss() = default;
  virtual Index rows() const = 0;
  virtual Index cols() const = 0;
  virtual double value(const Matrix& x) const = 0;
  virtual Matrix grad(const Matrix& x) const = 0;
  // Returns f(x) and writes grad f(x), sharing work where possible.
  virtual double value_and_grad(const Matrix& x, Matrix* g) const;
  // D^2 f(x)[h] as an n x m matrix.
  virtual Matrix hess_apply(const Matrix& x, const Matrix& h) const = 0;
  virtual double hess_quadform(const Matrix& x, const Matrix& h) const;
  // Data scale used to normalize stopping residuals (||y|| for least squares).
  virtual double data_norm() const = 0;
};

// f(X) = scale * ||A(X) - y||^2 with the scale taken from the operator.
class LeastSquaresLoss final : public Loss {
 public:
  LeastSquaresLoss(OperatorPtr op, Vector y);

  Index rows() const override { return op_->rows(); }
  Index cols() const override { return op_->cols(); }
  double value(const Matrix& x) const override;
  Matrix grad(const Matrix& x) const override;
  double value_and_grad(const Matrix& x, Matrix* g) const override;
  Matrix hess_apply(const Matrix& x, const Matrix& h) const override;
  double hess_quadform(const Matrix& x, const Matrix& h) const override;
  double data_norm() const override { return y_.norm(); }

  // 2 * scale * ||A(H)||^2, the same at every base point.
  double hess_quadform(const Matrix& h) const;
  // 2 * scale * <A(Y), A(Z)>.
  double hess_bilinear(const Matrix& y, const Matrix& z) const;

  const SamplingOperator& op() const { return *op_; }
  const OperatorPtr& op_ptr() const { return op_; }
  const Vector& y() const { return y_; }
  double scale() const { return op_->loss_scale(); }

 private:
  OperatorPtr op_;
  Vector y_;
};

using LossPtr = std::shared_ptr<const Loss>;

std::shared_ptr<const LeastSquaresLoss> make_loss(const RecoveryInstance& inst);
// Full observation of M: f(X) = 1/2 ||X - M||_F^2.
std::shared_ptr<const LeastSquaresLoss> make_full_observation_loss(const Matrix& m);

double f_value(const Loss& loss, const Matrix& x);
Matrix f_grad(const Loss& loss, const Matrix& x);
double hess_quadform_f(const LeastSquaresLoss& loss, const Matrix& h);

struct RegularizedObjective {
  LossPtr loss;
  double lambda = 0.0;
  Index r = 0;

  RegularizedObjective() = default;
  RegularizedObjective(LossPtr loss, double lambda, Index r);

  Index n() const { return loss->rows(); }
  Index m() const { return loss->cols(); }
};

// Xi(X) = [[lambda I, grad f(X)], [grad f(X)^T, lambda I]].
Matrix xi_matrix(const Loss& loss, const Matrix& x, double lambda);
// ||Xi(X)|| = lambda + ||grad f(X)|| (eigenvalues are lambda +- sigma_i).
double xi_norm(const Loss& loss, const Matrix& x, double lambda);

double phi_value(const RegularizedObjective& obj, const FactorPair& fp);
FactorPair phi_grad(const RegularizedObjective& obj, const FactorPair& fp);
double phi_value_and_grad(const RegularizedObjective& obj, const FactorPair& fp, FactorPair* g);

// Hessian of Phi applied to a direction, and its quadratic form.
FactorPair phi_hess_apply(const RegularizedObjective& obj, const FactorPair& fp,
                          const FactorPair& dir);
double phi_hess_quadform(const RegularizedObjective& obj, const FactorPair& fp,
                         const FactorPair& dir);

// Dense Hessian in the coordinates (vec U; vec V). Refuses more than
// kDenseHessianCap variables.
inline constexpr Index kDenseHessianCap = 400;
Matrix dense_hessian(const RegularizedObjective& obj, const FactorPair& fp);

Vector flatten(const FactorPair& fp);
FactorPair unflatten(const Vector& v, Index n, Index m, Index r);

struct HessianProbe {
  double min_eig = 0.0;
  FactorPair direction;  // unit norm
  double norm_estimate = 0.0;
  double residual = 0.0;
  int iterations = 0;
  bool converged = false;
};

HessianProbe min_eig_hessian(const RegularizedObjective& obj, const FactorPair& fp,
                             double tol = 1e-8, int max_iter = 600);

// PSD verdict: min eig >= -1e-6 (lambda + ||grad f(X)||).
bool hessian_psd(const HessianProbe& probe, double lambda, double grad_norm);

enum class FrameDirection { kToDiagonal, kFromDiagonal };

// (P^T U, Q^T V) or (P U, Q V); P and Q must be orthogonal.
FactorPair rotate_frame(const FactorPair& fp, const Matrix& p, const Matrix& q,
                        FrameDirection direction);

// Full observation of a rectangular diagonal Sigma (nonincreasing, >= 0).
struct DiagonalObjective {
  Vector sigma;  // length min(n, m)
  Index n = 0;
  Index m = 0;
  double lambda = 0.0;
  Index r = 0;

  DiagonalObjective() = default;
  DiagonalObjective(Vector sigma, Index n, Index m, double lambda, Index r);

  Matrix sigma_matrix() const;
  Vector sigma_top() const { return sigma.head(r); }
  double sigma_at(Index i) const { return i < sigma.size() ? sigma(i) : 0.0; }  // 0-based
  // Distinct values of the top-r block, decreasing, ties at relative 1e-9.
  std::vector<double> distinct_top_values(double rel_tol = 1e-9) const;
  RegularizedObjective objective() const;
};

// Restricted isometry check on the loss Hessian: for sampled
// rank-kappa Y, Z, |2/(a+b) D2f(Y, Z) - <Y, Z>| <= (b-a)/(a+b) ||Y|| ||Z||
// where (a, b) are the loss moduli derived from the operator spectrum.
Check restricted_isometry_audit(const LeastSquaresLoss& loss, const SpectrumEstimate& op_spectrum,
                                Index kappa, Index samples, std::uint64_t seed);

}  // namespace lowrank
