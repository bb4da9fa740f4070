// Accelerated alternating linearized minimization (AAL) for the factored
// objective, and an accelerated proximal gradient (APG) baseline for
// f(X) + lambda ||X||_*.

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "lowrank/objective.hpp"
#include "lowrank/sampling.hpp"

namespace lowrank {

enum class ScheduleKind { kNone, kNesterov, kFixed };

struct Schedule {
  ScheduleKind kind = ScheduleKind::kNone;
  double beta = 0.0;  // kFixed only

  static Schedule none() { return {}; }
  static Schedule nesterov() { return {ScheduleKind::kNesterov, 0.0}; }
  static Schedule fixed(double b) { return {ScheduleKind::kFixed, b}; }
};

std::string to_string(const Schedule& s);

struct AalConfig {
  double lf = 0.0;       // block Lipschitz constant; <= 0 selects lf_scale * auto_lf
  double lf_scale = 1.0;  // > 0; below 1 only makes sense with backtracking
  double l = 0.0;        // extrapolation cap constant L >= L_F; <= 0 means L = l_factor * L_F
  double l_factor = 1.0;  // >= 1
  Schedule schedule;
  double epsilon = 1e-10;
  int max_iters = 5000;
  bool record_trace = false;
  bool record_timing = false;  // wall times break byte-determinism of traces
  bool backtracking = false;
};

struct TraceRecord {
  int iter = 0;
  double obj = 0.0;
  double res1 = 0.0;
  double res2 = 0.0;
  double dist_to_final = 0.0;
  double time_ms = 0.0;
};

using SolverTrace = std::vector<TraceRecord>;

enum class StopReason { kConverged, kIterationCap };
std::string to_string(StopReason s);

struct AalResult {
  FactorPair fp;
  SolverTrace trace;
  StopReason stop = StopReason::kIterationCap;
  int iterations = 0;
  double lf = 0.0;
  double objective = 0.0;
  double res1 = 0.0;
  double res2 = 0.0;
  int clipped_steps = 0;  // Nesterov steps whose beta hit the cap
  int backtracks = 0;
};

// Balanced pair from the top-r SVD of X0: (P sqrt(S), Q sqrt(S)).
FactorPair init_spectral(const Matrix& x0, Index r);
// X0 = A*(y).
FactorPair init_spectral(const RecoveryInstance& inst, Index r);

// One AAL iteration with extrapolation beta from (previous -> current).
FactorPair aal_step(const RegularizedObjective& obj, const FactorPair& current,
                    const FactorPair& previous, double beta, double lf);

// beta_k = (theta_{k-1} - 1) / theta_k, theta_{k+1} = (1 + sqrt(1 + 4 theta_k^2)) / 2.
std::pair<double, double> nesterov_beta(double theta_prev, double theta);
// sqrt(L / (L + L_F)).
double beta_cap(double l, double lf);

// Largest curvature of the loss: 2 * scale * ||A||_op^2 for least squares,
// a Lanczos estimate of ||D2 f(x)|| otherwise.
double loss_curvature(const Loss& loss, const Matrix& at);

// L_F = 2 max(curvature * max(||U0||^2, ||V0||^2), ||grad f(0)||) (spectral norms).
double auto_lf(const RegularizedObjective& obj, const FactorPair& start);

AalResult aal_solve(const RegularizedObjective& obj, const AalConfig& config,
                    const FactorPair& start);

// Singular-value soft-thresholding.
Matrix svt(const Matrix& z, double tau, double* nuclear_norm_out = nullptr);
double nuclear_norm(const Matrix& x);
double convex_objective(const Loss& loss, const Matrix& x, double lambda);

struct ApgConfig {
  double lambda = 0.0;
  double step = 0.0;  // <= 0 selects 1 / curvature
  bool backtracking = false;
  double epsilon = 1e-5;
  int max_iters = 5000;
};

struct ApgResult {
  Matrix x;
  std::vector<double> objective;
  StopReason stop = StopReason::kIterationCap;
  int iterations = 0;
  int restarts = 0;
  double step = 0.0;
  double final_objective = 0.0;
};

// Accelerated proximal gradient with function-value restart; starts at 0
// unless a start point is given.
ApgResult apg_nuclear(const Loss& loss, const ApgConfig& config, const Matrix* start = nullptr);

// CSV with header iter,obj,res1,res2,dist_to_final,time_ms.
void write_trace_csv(std::ostream& os, const SolverTrace& trace);

}  // namespace lowrank
