// Acceptance run: one PASS/FAIL line per criterion 1-14 with its wall time.
// Expected values come from independent evaluations in this file wherever a
// closed form or a direct dense computation exists.
//
// Usage: lowrank_acceptance [output_dir]

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "lowrank/experiments.hpp"
#include "lowrank/objective.hpp"
#include "lowrank/random.hpp"
#include "lowrank/sampling.hpp"
#include "lowrank/solvers.hpp"
#include "lowrank/theory.hpp"
#include "test_util.hpp"

namespace fs = std::filesystem;
using namespace lowrank;
using lowrank::testing::central_gradient;
using lowrank::testing::random_pair;
using lowrank::testing::rel_err;
using lowrank::testing::second_difference;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

// Singular values by one-sided Jacobi, independent of the library SVD.
Vector jacobi_singulars(const Matrix& x) {
  if (x.size() == 0) return Vector();
  return Eigen::JacobiSVD<Matrix>(x).singularValues();
}

// Counts sigma_i > tau sigma_1.
Index count_above(const Vector& s, double tau) {
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Index k = 0;
  for (Index i = 0; i < s.size(); ++i)
    if (s(i) > tau * s(0)) ++k;
  return k;
}

// Factor ranks on the product scale: sigma_i(U)^2 > tau sigma_1(U)^2.
Index factor_rank_sq(const Matrix& u, double tau) { return count_above(jacobi_singulars(u).cwiseAbs2(), tau); }

double top_sv(const Matrix& x) {
  const Vector s = jacobi_singulars(x);
  return s.size() ? s(0) : 0.0;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

AalConfig tight_aal() {
  AalConfig c;
  c.schedule = Schedule::nesterov();
  c.epsilon = 1e-10;
  c.max_iters = 20000;
  return c;
}

Vector diag_spectrum(Index n, std::initializer_list<double> head, const std::function<double(Index)>& tail) {
  Vector s(n);
  Index i = 0;
  for (double h : head) s(i++) = h;
  for (; i < n; ++i) s(i) = tail(i);
  return s;
}

// ---------------------------------------------------------------- criteria

Outcome c1_derivatives() {
  Rng rng(101);
  double worst_g = 0.0, worst_h = 0.0;
  for (int t = 0; t < 20; ++t) {
    OperatorSpec spec;
    spec.kind = OperatorKind::kGaussianSensing;
    spec.p = 3 * 12 * 12;
    const RecoveryInstance inst = generate_instance(12, 12, 3, spec, NoiseSpec::relative(0.1), 1000 + t);
    const RegularizedObjective obj(make_loss(inst), 0.05 + 0.1 * t, 3);
    const FactorPair fp = random_pair(12, 12, 3, rng);
    const FactorPair d = random_pair(12, 12, 3, rng);
    const auto f = [&](const FactorPair& x) { return phi_value(obj, x); };
    const FactorPair fd = central_gradient(f, fp, 1e-5 * std::max(1.0, fp.norm()));
    const FactorPair g = phi_grad(obj, fp);
    worst_g = std::max(worst_g, (g - fd).norm() / g.norm());
    worst_h = std::max(worst_h, rel_err(phi_hess_quadform(obj, fp, d), second_difference(f, fp, d, 1e-3)));
  }
  return {worst_g <= 1e-6 && worst_h <= 1e-4,
          "grad rel " + fmt(worst_g) + " (<= 1e-6), hess rel " + fmt(worst_h) + " (<= 1e-4)"};
}

Outcome c2_adjoint() {
  Rng rng(202);
  const Index n = 9, m = 7;
  std::vector<std::pair<std::string, OperatorPtr>> ops;
  ops.emplace_back("full", make_full_observation(n, m));
  ops.emplace_back("gaussian", make_gaussian_sensing(n, m, 120, 17));
  const Matrix h = (1.0 + 0.1 * gaussian_matrix(n, m, rng).array()).abs().matrix();
  ops.emplace_back("weighted", make_weighted_hadamard(h));
  double worst = 0.0;
  std::string detail;
  for (const auto& [name, op] : ops) {
    double w = 0.0;
    for (int t = 0; t < 50; ++t) {
      const Matrix x = gaussian_matrix(n, m, rng);
      const Vector v = gaussian_vector(op->measurements(), rng);
      const double lhs = op->apply(x).dot(v);
      const Matrix av = op->adjoint(v);
      const double rhs = (x.array() * av.array()).sum();
      w = std::max(w, std::abs(lhs - rhs) / (x.norm() * av.norm()));
    }
    worst = std::max(worst, w);
    detail += name + " " + fmt(w) + " ";
  }
  return {worst <= 1e-10, detail + "(<= 1e-10)"};
}

Outcome c3_fullobs_oracle() {
  const Index n = 40, r = 5;
  const Vector s = diag_spectrum(n, {}, [&](Index i) { return 1.0 + 0.5 * static_cast<double>(n - 1 - i); });
  const double lam = 0.5 * s(r - 1);
  // Oracle: soft-thresholded top-r block; value lambda^2/2 per kept value,
  // sigma^2/2 per dropped value, plus lambda times the shrunk sum.
  Matrix xa = Matrix::Zero(n, n);
  double opt = 0.0;
  for (Index i = 0; i < n; ++i) {
    if (i < r) {
      xa(i, i) = s(i) - lam;
      opt += 0.5 * lam * lam + lam * (s(i) - lam);
    } else {
      opt += 0.5 * s(i) * s(i);
    }
  }
  const DiagonalObjective diag(s, n, n, lam, r);
  const AalResult res = aal_solve(diag.objective(), tight_aal(), init_spectral(diag.sigma_matrix(), r));
  const double val = phi_value(diag.objective(), res.fp);
  const double obj_rel = std::abs(val - opt) / opt;
  const double prod = (res.fp.product() - xa).norm() / xa.norm();
  return {res.stop == StopReason::kConverged && obj_rel <= 1e-8 && prod <= 1e-6,
          "objective rel " + fmt(obj_rel) + " (<= 1e-8), product rel " + fmt(prod) + " (<= 1e-6), " +
              to_string(res.stop) + " after " + std::to_string(res.iterations)};
}

Outcome c4_balance() {
  std::vector<FactorPair> outs;
  Index attempted = 0;
  auto keep = [&](const AalResult& r) {
    ++attempted;
    if (r.stop == StopReason::kConverged) outs.push_back(r.fp);
  };
  const AalConfig cfg = tight_aal();
  // Diagonal full observation with several spectra and random starts.
  const double lams[] = {0.7, 2.5, 4.5, 6.0};
  for (int t = 0; t < 4; ++t) {
    const Index n = 20 + 3 * t;
    const Vector s = diag_spectrum(n, {9.0, 7.0, 5.0, 3.0}, [](Index i) { return 2.0 / static_cast<double>(i); });
    const DiagonalObjective diag(s, n, n, lams[t], 4 + t % 2);
    Rng rng(derive_seed(404, t));
    const FactorPair start(0.5 * gaussian_matrix(n, diag.r, rng), 0.5 * gaussian_matrix(n, diag.r, rng));
    keep(aal_solve(diag.objective(), cfg, start));
  }
  // Noisy full observation and Gaussian sensing with factor width above r*.
  for (int t = 0; t < 3; ++t) {
    const RecoveryInstance inst =
        generate_instance(30, 30, 3, OperatorSpec{}, NoiseSpec::relative(0.1), derive_seed(405, t));
    const double lam = 1.5 * noise_adjoint_norm(inst);
    keep(aal_solve(RegularizedObjective(make_loss(inst), lam, 5), cfg, init_spectral(inst, 5)));
  }
  for (int t = 0; t < 3; ++t) {
    OperatorSpec spec;
    spec.kind = OperatorKind::kGaussianSensing;
    spec.p = 500;
    const RecoveryInstance inst =
        generate_instance(15, 15, 2, spec, NoiseSpec::relative(0.1), derive_seed(406, t));
    const double lam = 2.0 * noise_adjoint_norm(inst);
    keep(aal_solve(RegularizedObjective(make_loss(inst), lam, 4), cfg, init_spectral(inst, 4)));
  }

  double worst_gram = 0.0;
  int rank_mismatch = 0;
  for (const FactorPair& fp : outs) {
    const Matrix gu = fp.U.transpose() * fp.U, gv = fp.V.transpose() * fp.V;
    worst_gram = std::max(worst_gram, (gu - gv).norm() / std::max(gu.norm(), 1e-300));
    const double tau = 1e-6;
    const Index ru = factor_rank_sq(fp.U, tau), rv = factor_rank_sq(fp.V, tau);
    const Index rx = count_above(jacobi_singulars(fp.product()), tau);
    Matrix w(fp.n() + fp.m(), fp.r());
    w << fp.U, fp.V;
    const Index rw = factor_rank_sq(w, tau);
    if (ru != rv || rv != rx || rx != rw) ++rank_mismatch;
  }
  const bool enough = outs.size() >= 10;
  return {enough && worst_gram <= 1e-6 && rank_mismatch == 0,
          std::to_string(outs.size()) + "/" + std::to_string(attempted) + " converged solves, gram rel " +
              fmt(worst_gram) + " (<= 1e-6), rank mismatches " + std::to_string(rank_mismatch)};
}

Outcome c5_diag_critical() {
  const Index n = 20, r = 5;
  const Vector d = diag_spectrum(n, {10.0, 8.0, 6.0, 3.0, 2.0, 1.0},
                                 [](Index i) { return std::ldexp(1.0, -static_cast<int>(i - 5)); });
  const double lam = 4.0;
  const Index rs = 3;  // entries >= lambda; lambda > d_4 = 3
  const DiagonalObjective diag(d, n, n, lam, r);
  Rng rng(505);
  const FactorPair start(0.1 * gaussian_matrix(n, r, rng), 0.1 * gaussian_matrix(n, r, rng));
  const AalResult res = aal_solve(diag.objective(), tight_aal(), start);
  const FactorPair& fp = res.fp;
  const Matrix u1 = fp.U.topRows(rs), v1 = fp.V.topRows(rs);
  const double r_sym = (u1 - v1).norm();
  const double r_u2 = fp.U.bottomRows(n - rs).norm();
  const double r_v2 = fp.V.bottomRows(n - rs).norm();
  // Stationarity of the top block: (D1 - U1 V1^T) V1 = lambda U1.
  const Matrix d1 = d.head(rs).asDiagonal();
  const double r_eq = ((d1 - u1 * v1.transpose()) * v1 - lam * u1).norm();
  const double worst = std::max({r_sym, r_u2, r_v2, r_eq});
  const Check lib = diag_critical_audit(fp, diag.sigma_matrix(), lam);
  return {res.stop == StopReason::kConverged && worst <= 1e-6 && lib.verdict == Verdict::kPass,
          "residuals " + fmt(r_sym) + ", " + fmt(r_u2) + ", " + fmt(r_v2) + ", " + fmt(r_eq) +
              " (<= 1e-6), audit " + to_string(lib.verdict)};
}

Outcome c6_gamma() {
  auto g1 = [](double a, double b) {
    return 63.0 * a / (128.0 * b) - 1.0 / 8.0 -
           16.0 * (7.0 + std::sqrt(2.0)) * (b - a) * (b - a) / (15.0 * (a + b) * (a + b));
  };
  auto g2 = [](double a, double b) {
    return 2048.0 * (7.0 + std::sqrt(2.0)) / (15.0 * (a + b) * (a + b)) + 64.0 / (a * b);
  };
  const GammaConstants unit = gamma_hat(1.0, 1.0);
  const double e_unit = std::abs(unit.gamma1 - 47.0 / 128.0);
  double worst = 0.0;
  for (double a : {0.5, 1.0, 2.0})
    for (double ratio : {1.0, 1.1, 1.25, 1.38}) {
      const GammaConstants g = gamma_hat(a, a * ratio);
      worst = std::max(worst, rel_err(g.gamma1, g1(a, a * ratio)));
      worst = std::max(worst, rel_err(g.gamma2, g2(a, a * ratio)));
      worst = std::max(worst, rel_err(g.gamma_hat, g2(a, a * ratio) / g1(a, a * ratio)));
    }
  const GammaConstants at138 = gamma_hat(1.0, 1.38), at15 = gamma_hat(1.0, 1.5);
  const bool flip = at138.admissible && g1(1.0, 1.38) > 0.0 && at138.gamma1 > 0.0 && !at15.admissible &&
                    std::isnan(at15.gamma_hat);
  return {e_unit <= 1e-12 && worst <= 1e-12 && flip,
          "|gamma1(1,1) - 47/128| " + fmt(e_unit) + ", formula rel " + fmt(worst) + ", gamma1(1,1.38) " +
              fmt(at138.gamma1) + ", 1.5 admissible " + (at15.admissible ? "yes" : "no")};
}

struct VerifyInstance {
  RecoveryInstance inst;
  double lambda = 0.0;
  AalResult aal;
  SpectrumEstimate spectrum;
};

VerifyInstance make_verify_instance() {
  const ExperimentConfig cfg = default_config(ExperimentKind::kVerify);
  VerifyInstance v;
  v.inst = generate_instance(60, 60, 4, OperatorSpec{}, NoiseSpec::relative(0.1), cfg.seed);
  // Full observation: A*(omega) is omega reshaped.
  const Matrix adj = Eigen::Map<const Matrix>(v.inst.omega.data(), 60, 60);
  v.lambda = 1.2 * top_sv(adj);
  v.aal = aal_solve(RegularizedObjective(make_loss(v.inst), v.lambda, 4), tight_aal(), init_spectral(v.inst, 4));
  v.spectrum = estimate_restricted_spectrum(*v.inst.op, 16, 200, 7);
  return v;
}

Outcome c7_error_bound(const VerifyInstance& v) {
  const TheoryReport rep = error_bound_audit(v.inst, v.aal.fp, v.lambda, v.spectrum);
  std::string detail;
  bool ok = v.aal.stop == StopReason::kConverged && rep.checks.size() == 4;
  for (const Check& c : rep.checks) {
    ok = ok && c.verdict == Verdict::kPass && c.premises_verified() && c.margin >= 0.0;
    detail += c.id.substr(c.id.find('.') + 1) + " margin " + fmt(c.margin) + "; ";
  }
  // Independent first inequality: 2 ||X - M*||^2 <= ||W W^T - W* W*^T||^2.
  const Eigen::JacobiSVD<Matrix> svd(v.inst.m_star, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector root = svd.singularValues().head(4).cwiseSqrt();
  Matrix ws(120, 4), w(120, 4);
  ws << svd.matrixU().leftCols(4) * root.asDiagonal(), svd.matrixV().leftCols(4) * root.asDiagonal();
  w << v.aal.fp.U, v.aal.fp.V;
  const double lhs = 2.0 * (v.aal.fp.product() - v.inst.m_star).squaredNorm();
  const double rhs = (w * w.transpose() - ws * ws.transpose()).squaredNorm();
  const Check* first = rep.find("error_bound.product-vs-gram");
  const bool agree = first && rel_err(first->lhs, lhs) <= 1e-8 && rel_err(first->rhs, rhs) <= 1e-8;
  const Index rank = count_above(jacobi_singulars(v.aal.fp.product()), 1e-6);
  ok = ok && agree && lhs <= rhs && rank <= 4;
  return {ok, detail + "rank " + std::to_string(rank) + ", direct recomputation " + (agree ? "agrees" : "differs")};
}

Outcome c8_xi_identity(const VerifyInstance& v) {
  TheoryReport rep = critical_inequality_audit(v.inst, v.aal.fp, v.lambda, v.spectrum);
  rep.append(xi_identity_audit(v.inst, v.aal.fp, v.lambda, v.spectrum));
  bool ok = !rep.checks.empty();
  std::string failed;
  for (const Check& c : rep.checks)
    if (c.verdict != Verdict::kPass) {
      ok = false;
      failed += c.id + " ";
    }
  const Check* id = rep.find("xi-identity.identity");
  const Check* psd = rep.find("xi-identity.psd-rotation");
  double id_rel = NAN, min_eig = NAN;
  if (id) {
    const double mag = std::abs(id->metrics.at("hessian_along_delta")) +
                       std::abs(id->metrics.at("loss_curvature_term")) + std::abs(id->metrics.at("xi_term"));
    id_rel = id->lhs / mag;
  }
  if (psd) min_eig = psd->metrics.at("min_eig");
  ok = ok && id_rel <= 1e-8 && min_eig >= -1e-10;
  return {ok, "identity rel " + fmt(id_rel) + " (<= 1e-8), min eig " + fmt(min_eig) + " (>= -1e-10)" +
                  (failed.empty() ? "" : ", failed: " + failed)};
}

Outcome c9_counterexample() {
  const CounterexampleResult res = counterexample_sequence(2.0, 1.0, 200);
  const TheoryReport rep = counterexample_report(res);
  const bool gap_ok = std::abs(res.gap_fit.slope + 4.0) <= 0.2;
  const bool grad_ok = std::abs(res.grad_fit.slope + 8.0) <= 0.3;
  bool decreasing = true;
  for (size_t i = 1; i < res.points.size(); ++i)
    if (res.points[i].k >= 5 && !(res.points[i].ratio < res.points[i - 1].ratio)) decreasing = false;
  return {gap_ok && grad_ok && decreasing && rep.applicable_pass(),
          "gap slope " + fmt(res.gap_fit.slope) + " (-4 +- 0.2), grad^2 slope " + fmt(res.grad_fit.slope) +
              " (-8 +- 0.3), ratio decreasing " + (decreasing ? "yes" : "no")};
}

Outcome c10_kl() {
  const Index n = 30;
  const Vector s = diag_spectrum(n, {10.0, 10.0, 7.0, 7.0, 4.0},
                                 [](Index i) { return std::pow(0.9, static_cast<double>(i - 5)); });
  bool ok = true;
  std::string detail;
  const std::pair<const char*, double> cases[] = {{"k=0", 12.0}, {"k=1", 8.5}, {"k=s", 2.0}};
  std::uint64_t seed = 1001;
  for (const auto& [label, lam] : cases) {
    const DiagonalObjective diag(s, n, n, lam, 5);
    KlProbeOptions opt;
    opt.samples = 200;
    opt.seed = seed++;
    const Check c = kl_probe(diag, global_set_fullobs(diag).minimizer, opt);
    ok = ok && c.verdict == Verdict::kPass && c.rhs > 0.0;
    detail += std::string(label) + " eta " + fmt(c.rhs) + "; ";
  }
  const double a = 2.0, lam = 1.0;
  KlProbeOptions opt;
  opt.samples = 200;
  opt.seed = 1010;
  opt.require_global = false;
  opt.radius = 0.1;
  const Check ex = kl_probe(example_objective(a, lam, 2, 2), example_center(a, lam, 2, 2), opt);
  const double eta = ex.metrics.count("eta_hat") ? ex.metrics.at("eta_hat") : NAN;
  ok = ok && ex.premises_verified() && eta < 1e-6 * lam;
  return {ok, detail + "repeated-value min ratio " + fmt(eta) + " (< 1e-6 lambda)"};
}

Outcome c11_equivalence() {
  OperatorSpec spec;
  spec.kind = OperatorKind::kGaussianSensing;
  spec.p = 2000;
  const RecoveryInstance inst = generate_instance(40, 40, 2, spec, NoiseSpec::relative(0.1), 1111);
  const auto loss = make_loss(inst);
  const double lam = 2.0 * top_sv(f_grad(*loss, inst.m_star));
  const Index r = 6;
  const AalResult a = aal_solve(RegularizedObjective(loss, lam, r), tight_aal(), init_spectral(inst, r));
  ApgConfig pc;
  pc.lambda = lam;
  pc.epsilon = 1e-10;
  pc.max_iters = 20000;
  const ApgResult p = apg_nuclear(*loss, pc);
  const Vector sx = jacobi_singulars(p.x);
  const Index rank = count_above(sx, 1e-6);
  const double convex = loss->value(p.x) + lam * sx.sum();
  const double factored = loss->value(a.fp.product()) + 0.5 * lam * a.fp.squared_norm();
  const double gap = std::abs(convex - factored) / std::abs(convex);
  // Factorization of the convex solution: (P sqrt S, Q sqrt S) on the top r.
  const Eigen::JacobiSVD<Matrix> svd(p.x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector root = svd.singularValues().head(r).cwiseSqrt();
  const FactorPair fac(svd.matrixU().leftCols(r) * root.asDiagonal(), svd.matrixV().leftCols(r) * root.asDiagonal());
  const double fac_val = loss->value(fac.product()) + 0.5 * lam * fac.squared_norm();
  const double fac_rel = std::abs(fac_val - convex) / std::abs(convex);
  const TheoryReport rep =
      equivalence_audit(*loss, p.x, a.fp, lam, a.stop == StopReason::kConverged && p.stop == StopReason::kConverged);
  std::string detail = "APG rank " + std::to_string(rank) + " (r = 6), objective gap " + fmt(gap) +
                       " (<= 1e-3), factorization rel " + fmt(fac_rel) + " (<= 1e-6), audit " +
                       (rep.applicable_pass() ? "pass" : "fail");
  if (rank > r) return {true, "premise not met (vacuous); " + detail};
  return {gap <= 1e-3 && fac_rel <= 1e-6 && rep.applicable_pass(), detail};
}

Outcome c12_convergence(ConvergenceResult* keep) {
  const ConvergenceResult res = run_convergence(default_config(ExperimentKind::kConvergence));
  *keep = res;
  return {res.reliable && res.fit.r2 >= 0.98,
          "R^2 " + fmt(res.fit.r2) + " (>= 0.98) over " + std::to_string(res.fit.count) + " points, slope " +
              fmt(res.fit.slope) + ", " + to_string(res.aal.stop) + " after " + std::to_string(res.aal.iterations)};
}

Outcome c13_sweep(const fs::path& dir) {
  ExperimentConfig cfg = default_config(ExperimentKind::kRmseSweep);
  cfg.output_dir = (dir / "sweep").string();
  const SweepResult res = run_rmse_sweep(cfg);
  write_sweep_outputs(cfg, res);
  bool ok = res.rows.size() == cfg.nu_grid.size();
  std::string detail;
  for (const SweepRow& row : res.rows) {
    const double ratio = std::max(row.aal_rmse, row.apg_rmse) / std::min(row.aal_rmse, row.apg_rmse);
    const bool rank_ok = row.nu > 1.5 || row.aal_rank <= row.apg_rank;
    ok = ok && row.trials == cfg.trials && ratio <= 1.5 && rank_ok;
    detail += "nu " + fmt(row.nu) + ": rmse ratio " + fmt(ratio) + ", rank " + fmt(row.aal_rank) + "/" +
              fmt(row.apg_rank) + "; ";
  }
  return {ok, detail};
}

// Runs every producer twice into separate directories and compares bytes.
Outcome c14_determinism(const fs::path& dir, const ConvergenceResult& conv) {
  auto producers = [&](const fs::path& into, bool first) {
    ExperimentConfig cc = default_config(ExperimentKind::kConvergence);
    cc.output_dir = (into / "convergence").string();
    write_convergence_outputs(cc, first ? conv : run_convergence(cc));

    ExperimentConfig vc = default_config(ExperimentKind::kVerify);
    vc.output_dir = (into / "verify").string();
    write_verify_outputs(vc, run_verify(vc));

    ExperimentConfig ce = default_config(ExperimentKind::kCounterexample);
    ce.output_dir = (into / "counterexample").string();
    write_counterexample_outputs(ce, counterexample_sequence(ce.ce_a, ce.ce_lambda, ce.ce_k_max));

    ExperimentConfig sw = default_config(ExperimentKind::kRmseSweep);
    sw.n = sw.m = 16;
    sw.r_star = 2;
    sw.r = 6;
    sw.op.p = 200;
    sw.nu_grid = {0.5, 1.0};
    sw.trials = 2;
    sw.output_dir = (into / "sweep").string();
    write_sweep_outputs(sw, run_rmse_sweep(sw));
  };
  const fs::path a = dir / "run_a", b = dir / "run_b";
  fs::remove_all(a);
  fs::remove_all(b);
  producers(a, true);
  producers(b, false);
  int files = 0, diffs = 0;
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    ++files;
    const fs::path other = b / fs::relative(e.path(), a);
    if (!fs::exists(other) || slurp(e.path()) != slurp(other)) ++diffs;
  }
  int files_b = 0;
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) ++files_b;
  return {files > 0 && diffs == 0 && files == files_b,
          std::to_string(files) + " files compared, " + std::to_string(diffs) + " differ"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path dir = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::create_directories(dir);
  int failures = 0;

  auto run = [&](int id, double budget_s, const std::function<Outcome()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = body();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (secs > budget_s) {
      o.pass = false;
      o.detail += " [over budget " + fmt(budget_s) + " s]";
    }
    if (!o.pass) ++failures;
    std::cout << "CRITERION " << id << ": " << (o.pass ? "PASS" : "FAIL") << " (" << fmt(secs) << " s) " << o.detail
              << std::endl;
  };

  run(1, 5, c1_derivatives);
  run(2, 5, c2_adjoint);
  run(3, 30, c3_fullobs_oracle);
  run(4, 120, c4_balance);
  run(5, 10, c5_diag_critical);
  run(6, 1, c6_gamma);

  // Criteria 7 and 8 share one instance and solve; each is charged the setup.
  VerifyInstance vi;
  double setup_s = 0.0;
  std::string setup_error;
  {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      vi = make_verify_instance();
    } catch (const std::exception& e) {
      setup_error = e.what();
    }
    setup_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
  auto with_setup = [&](const std::function<Outcome()>& body) {
    return [&, body]() -> Outcome {
      if (!setup_error.empty()) return {false, "setup: " + setup_error};
      Outcome o = body();
      o.detail += " (shared setup " + fmt(setup_s) + " s)";
      return o;
    };
  };
  run(7, 60 - setup_s, with_setup([&] { return c7_error_bound(vi); }));
  run(8, 60 - setup_s, with_setup([&] { return c8_xi_identity(vi); }));

  run(9, 5, c9_counterexample);
  run(10, 60, c10_kl);
  run(11, 120, c11_equivalence);
  ConvergenceResult conv;
  run(12, 180, [&] { return c12_convergence(&conv); });
  run(13, 300, [&] { return c13_sweep(dir); });
  run(14, 900, [&] { return c14_determinism(dir, conv); });

  std::cout << (failures == 0 ? "ALL CRITERIA PASS" : std::to_string(failures) + " CRITERIA FAIL") << std::endl;
  return failures == 0 ? 0 : 1;
}
