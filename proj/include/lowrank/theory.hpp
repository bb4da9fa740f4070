// Numeric audits of the error-bound chain, critical-point characterizations,
// the full-observation global minimizers, KL probes, the repeated-value
// counterexample, calmness and the convex/factored equivalence.

#pragma once

#include <cstdint>
#include <vector>

#include "lowrank/matcore.hpp"
#include "lowrank/objective.hpp"
#include "lowrank/report.hpp"
#include "lowrank/sampling.hpp"

namespace lowrank {

inline constexpr double kAdmissibleRatio = 1.38;
// Gradient residual gate for "critical": ||grad Phi|| <= kCriticalGate (1 + ||y||).
inline constexpr double kCriticalGate = 1e-8;

struct GammaConstants {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  double gamma_hat = 0.0;  // gamma2 / gamma1 when admissible, NaN otherwise
  bool admissible = false;
};

// gamma1 = 63a/(128b) - 1/8 - 16(7+sqrt2)(b-a)^2/(15(a+b)^2),
// gamma2 = 2048(7+sqrt2)/(15(a+b)^2) + 64/(ab).
GammaConstants gamma_hat(double alpha, double beta);

// Noiseless full observation of a given matrix.
RecoveryInstance observed_instance(const Matrix& m, Index rank);

// Balanced factors of the top-rank SVD of M*: (P1 S^{1/2}; Q1 S^{1/2}).
FactorPair true_factors(const RecoveryInstance& inst);

// ||W W^T - Ws Ws^T||_F^2 from Gram matrices.
double gram_gap_squared(const Matrix& w, const Matrix& ws);

// <Xi(X), W W^T - Ws Ws^T> = lambda (||W||^2 - ||Ws||^2) + 2 <grad f(X), U V^T - Us Vs^T>.
double xi_inner_gap(const Matrix& grad, double lambda, const FactorPair& fp, const FactorPair& star);

// Three inequalities of the error-bound chain plus the final bound. The
// premises are criticality, rank(UV^T) <= r*, a PSD Hessian (when psd_check)
// and an admissible spectrum; `spectrum` describes the operator.
TheoryReport error_bound_audit(const RecoveryInstance& inst, const FactorPair& fp, double lambda,
                               const SpectrumEstimate& spectrum, bool psd_check = true);

// Gamma-weighted first-order inequality and its consequence with the
// 15/64 coefficient.
TheoryReport critical_inequality_audit(const RecoveryInstance& inst, const FactorPair& fp,
                                       double lambda, const SpectrumEstimate& spectrum);

// Second-order identity along Delta = W - [W* 0] R*, the lower bound on
// ||W Delta^T||^2 and the PSD property of W^T W* R1*.
TheoryReport xi_identity_audit(const RecoveryInstance& inst, const FactorPair& fp, double lambda,
                               const SpectrumEstimate& spectrum);

// Balance residual ||U^T U - V^T V||, the rank chain of U, V, UV^T, W and
// max |sigma_i(W) - sqrt2 sigma_i(V)|.
TheoryReport balance_audit(const FactorPair& fp, double rel_tol = 1e-6);

// Critical-set characterization for f = 1/2 ||X - D||^2 with lambda > d_{r*+1}.
// r_star < 0 selects the number of d_i >= lambda.
Check diag_critical_audit(const FactorPair& fp, const Matrix& d, double lambda, Index r_star = -1);

struct FullObsOptimum {
  FactorPair minimizer;
  double value = 0.0;
};

// Representative (P = I, R = I) of the global minimizer set of the diagonal
// problem and the optimal value. Throws unless sigma_r > sigma_{r+1}.
FullObsOptimum global_set_fullobs(const DiagonalObjective& diag);

// Phi(fp) - Phi(center) evaluated from differences (no cancellation of the
// two objective values).
double phi_gap(const RegularizedObjective& obj, const FactorPair& fp, const FactorPair& center);

struct KlProbeOptions {
  Index samples = 200;
  std::uint64_t seed = 1;
  double radius = 0.0;          // > 0 overrides the delta cap
  bool require_global = true;   // center must be a global minimizer
  bool null_probes = true;      // multi-scale probes along Hessian null directions
  int null_scales = 8;
};

// Empirical KL-1/2 modulus: min over probes with positive gap of
// ||grad Phi||^2 / (Phi - Phi(center)). Passes when it is >= 1e-8 lambda.
Check kl_probe(const DiagonalObjective& diag, const FactorPair& center,
               const KlProbeOptions& options = {});

// Center of the repeated-value example: U1 = V1 = Diag(0, sqrt(a - lambda)).
DiagonalObjective example_objective(double a, double lambda, Index n, Index m);
FactorPair example_center(double a, double lambda, Index n, Index m);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual_se = 0.0;
  double r2 = 0.0;
  Index count = 0;
};

// Ordinary least squares of y on x.
LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

struct CounterexamplePoint {
  int k = 0;
  double gap = 0.0;
  double grad_sq = 0.0;
  double ratio = 0.0;
};

struct CounterexampleResult {
  double a = 0.0;
  double lambda = 0.0;
  double base_value = 0.0;
  std::vector<CounterexamplePoint> points;  // k = 1..k_max
  LinearFit gap_fit;                        // log gap vs log k over [k_max/10, k_max]
  LinearFit grad_fit;
};

// Sequence U1 = V1 = [[0, 1/k^2], [1/k^2, sqrt d + 1/k^4]] with d = a - lambda
// on the 2 x 2 problem Sigma = a I, evaluated in extended precision.
CounterexampleResult counterexample_sequence(double a, double lambda, int k_max);

// Slope bands (gap -4 +- 0.2, grad^2 -8 +- 0.3) and strict ratio decrease for k >= 5.
TheoryReport counterexample_report(const CounterexampleResult& result);

// 2c + e + sqrt((2c + e)^2 + 4ce) with e = ||A*(omega)||.
double calmness_threshold(double c_bar, double noise_norm);

struct CalmnessEstimate {
  double c1 = 0.0;  // lower bounds on the calmness moduli
  double c2 = 0.0;
  std::vector<double> c1_running;  // running max after each sample
  std::vector<double> c2_running;
};

// Y1(U, V) = [2 s A*A(UV^T - M*)] V and Y2 = [2 s A*A(UV^T - M*)]^T U with
// s the loss scale; sampled difference quotients in the eps-ball.
CalmnessEstimate calmness_estimate(const RecoveryInstance& inst, const FactorPair& center,
                                   double eps_ball, Index samples, std::uint64_t seed);

// Objective agreement of the convex and factored solves, the factorization
// of the convex solution, and ||UV^T||_* <= 1/2 (||U||^2 + ||V||^2).
TheoryReport equivalence_audit(const LeastSquaresLoss& loss, const Matrix& apg_x,
                               const FactorPair& aal_fp, double lambda, bool converged = true,
                               double objective_rel_tol = 1e-3);

}  // namespace lowrank
