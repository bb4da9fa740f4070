// Experiment harness: lambda sweep (RMSE and rank against nu), convergence
// traces with a log-linear fit, theory verification runs, the counterexample
// sequence, and CSV/JSON persistence.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lowrank/matcore.hpp"
#include "lowrank/report.hpp"
#include "lowrank/sampling.hpp"
#include "lowrank/solvers.hpp"
#include "lowrank/theory.hpp"

namespace lowrank {

// ||Xf - M*||_F / ||M*||_F.
double rmse(const Matrix& xf, const Matrix& mstar);

std::string version_string();

enum class ExperimentKind { kRmseSweep, kConvergence, kVerify, kCounterexample };
std::string to_string(ExperimentKind k);
ExperimentKind experiment_kind_from_string(const std::string& s);

struct LambdaRule {
  enum class Kind { kAbsolute, kNuTimesNoise, kFractionOfSigma };
  Kind kind = Kind::kNuTimesNoise;
  double value = 1.0;  // lambda, nu or the fraction c
  Index index = 1;     // 1-based singular value index for kFractionOfSigma
};

struct VerifySettings {
  Index diag_n = 40;           // full-observation oracle size
  Index crit_n = 20;           // diagonal critical-point instance size
  Index kl_n = 30;             // KL probe size
  Index kl_samples = 200;
  Index equiv_n = 40;          // sensing instance for the equivalence audit
  Index equiv_p = 2000;
  Index equiv_r_star = 2;
  double equiv_lambda_factor = 2.0;  // lambda = factor * ||grad f(M*)||
  double example_a = 2.0;
  double example_lambda = 1.0;
  int counterexample_k_max = 200;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::kRmseSweep;
  Index n = 60;
  Index m = 60;
  Index r_star = 3;
  Index r = 9;
  OperatorSpec op;
  NoiseSpec noise;
  LambdaRule lambda_rule;
  std::vector<double> nu_grid;
  AalConfig aal;
  ApgConfig apg;
  int trials = 5;
  // Relative cutoff for reported output ranks; sweeps use a value above the
  // stopping tolerance so unresolved tails are not counted.
  double rank_tol = kDefaultRankTol;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  VerifySettings verify;
  double ce_a = 2.0;  // counterexample
  double ce_lambda = 1.0;
  int ce_k_max = 200;
};

// Defaults for each experiment kind (desk scale).
ExperimentConfig default_config(ExperimentKind kind);

// Parse a JSON config; absent fields keep the defaults of its kind.
ExperimentConfig config_from_json(const std::string& text);
ExperimentConfig load_config(const std::string& path);
// Canonical JSON (sorted keys, output_dir omitted) used for hashing.
std::string config_to_json(const ExperimentConfig& cfg);
// FNV-1a 64 of the canonical JSON, 16 hex digits.
std::string config_hash(const ExperimentConfig& cfg);

// lambda for an instance under a rule; the noise rule uses ||grad f(M*)||.
double lambda_from_rule(const LambdaRule& rule, const RecoveryInstance& inst);

struct TrialRecord {
  double nu = 0.0;
  int trial = 0;
  std::uint64_t seed = 0;
  double lambda = 0.0;
  double aal_rmse = 0.0;
  double apg_rmse = 0.0;
  Index aal_rank = 0;
  Index apg_rank = 0;
  int aal_iters = 0;
  int apg_iters = 0;
  std::string aal_stop;
  std::string apg_stop;
  std::string error;  // non-empty when the trial failed
};

struct SweepRow {
  double nu = 0.0;
  double lambda = 0.0;  // mean over successful trials
  double aal_rmse = 0.0;
  double apg_rmse = 0.0;
  double aal_rank = 0.0;
  double apg_rank = 0.0;
  int trials = 0;  // successful trials
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by nu
  std::vector<TrialRecord> trials;
};

SweepResult run_rmse_sweep(const ExperimentConfig& cfg);

struct ConvergenceResult {
  AalResult aal;
  double lambda = 0.0;
  LinearFit fit;  // log10(dist_to_final) against iteration
  bool reliable = false;
  double window_lo = 1e-9;
  double window_hi = 1e-1;
  double final_rmse = 0.0;
};

ConvergenceResult run_convergence(const ExperimentConfig& cfg);

TheoryReport run_verify(const ExperimentConfig& cfg);

// Writes outputs into cfg.output_dir; each returns the list of files written.
std::vector<std::string> write_sweep_outputs(const ExperimentConfig& cfg, const SweepResult& res);
std::vector<std::string> write_convergence_outputs(const ExperimentConfig& cfg,
                                                   const ConvergenceResult& res);
std::vector<std::string> write_verify_outputs(const ExperimentConfig& cfg, const TheoryReport& rep);
std::vector<std::string> write_counterexample_outputs(const ExperimentConfig& cfg,
                                                      const CounterexampleResult& res);

// Plot CSVs: fig1 (nu, lambda, rmse and rank per solver) and fig2 (iteration,
// residuals, dist_to_final and its log10). The first line is a comment with
// the version and config hash.
void emit_plot_data(const SweepResult& res, const std::string& path, const std::string& header);
void emit_plot_data(const SolverTrace& trace, const std::string& path, const std::string& header);

// Output header comment: "# lowrank <version> config_hash=<hash>".
std::string output_header(const ExperimentConfig& cfg);

// Reads a CSV written by this module (skipping '#' lines) into rows of doubles.
std::vector<std::vector<double>> read_csv_numbers(const std::string& path,
                                                  std::vector<std::string>* header = nullptr);

}  // namespace lowrank
