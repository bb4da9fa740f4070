#include "lowrank/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lowrank/random.hpp"
#include "lowrank/solvers.hpp"

namespace lowrank {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

double tolerance_for(double lhs, double rhs, double rel) {
  return rel * std::max({std::abs(lhs), std::abs(rhs), 1e-300});
}

double top_singular(const Matrix& x) {
  if (x.size() == 0) return 0.0;
  return thin_svd(x).singulars(0);
}

struct AuditSetup {
  std::shared_ptr<const LeastSquaresLoss> loss;
  RegularizedObjective obj;
  FactorPair star;
  SpectrumEstimate moduli;
  Index r_star = 0;
};

AuditSetup setup_audit(const RecoveryInstance& inst, const FactorPair& fp, double lambda,
                       const SpectrumEstimate& spectrum) {
  AuditSetup s;
  s.loss = make_loss(inst);
  s.obj = RegularizedObjective(s.loss, lambda, fp.r());
  s.star = true_factors(inst);
  s.moduli = hessian_moduli(spectrum, s.loss->scale());
  s.r_star = inst.rank;
  return s;
}

// Shared premises: approximate criticality and rank(UV^T) <= r*.
std::vector<Premise> critical_premises(const AuditSetup& s, const FactorPair& fp) {
  std::vector<Premise> out;
  const double gnorm = phi_grad(s.obj, fp).norm();
  const double gate = kCriticalGate * (1.0 + s.loss->data_norm());
  std::ostringstream d;
  d << "gate " << format_double(gate);
  out.push_back({"critical", gnorm <= gate, gnorm, d.str()});
  const Index rk = numerical_rank(fp.product());
  out.push_back({"rank-le-rstar", rk <= s.r_star, static_cast<double>(rk),
                 "r* = " + std::to_string(s.r_star)});
  return out;
}

Premise psd_premise(const AuditSetup& s, const FactorPair& fp) {
  const HessianProbe probe = min_eig_hessian(s.obj, fp);
  const double gnorm = top_singular(f_grad(*s.loss, fp.product()));
  const bool ok = probe.converged && hessian_psd(probe, s.obj.lambda, gnorm);
  return {"hessian-psd", ok, probe.min_eig, probe.converged ? "" : "eigen probe did not converge"};
}

Check make_check(std::string id, const std::vector<Premise>& premises) {
  Check c;
  c.id = std::move(id);
  c.premises = premises;
  return c;
}

Matrix dense_gram_difference(const Matrix& w, const Matrix& ws) {
  return w * w.transpose() - ws * ws.transpose();
}

}  // namespace

GammaConstants gamma_hat(double alpha, double beta) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw Error("gamma_hat: moduli must be positive");
  if (beta < alpha) throw Error("gamma_hat: beta must be at least alpha");
  GammaConstants g;
  g.alpha = alpha;
  g.beta = beta;
  const double c = 7.0 + std::sqrt(2.0);
  const double s2 = (alpha + beta) * (alpha + beta);
  g.gamma1 = 63.0 * alpha / (128.0 * beta) - 0.125 -
             16.0 * c * (beta - alpha) * (beta - alpha) / (15.0 * s2);
  g.gamma2 = 2048.0 * c / (15.0 * s2) + 64.0 / (alpha * beta);
  g.admissible = beta / alpha <= kAdmissibleRatio && g.gamma1 > 0.0;
  g.gamma_hat = g.admissible ? g.gamma2 / g.gamma1 : kNaN;
  return g;
}

RecoveryInstance observed_instance(const Matrix& m, Index rank) {
  RecoveryInstance inst;
  inst.m_star = m;
  inst.op = make_full_observation(m.rows(), m.cols());
  inst.omega = Vector::Zero(m.size());
  inst.y = inst.op->apply(m);
  inst.rank = rank;
  inst.op_spec.kind = OperatorKind::kFullObservation;
  return inst;
}

FactorPair true_factors(const RecoveryInstance& inst) {
  const Index rs = inst.rank;
  if (rs < 1) throw Error("true_factors: instance rank must be positive");
  const SvdResult s = thin_svd(inst.m_star);
  const Vector root = s.singulars.head(rs).cwiseSqrt();
  return FactorPair(s.left.leftCols(rs) * root.asDiagonal(), s.right.leftCols(rs) * root.asDiagonal());
}

double gram_gap_squared(const Matrix& w, const Matrix& ws) {
  if (w.rows() <= 4000) return dense_gram_difference(w, ws).squaredNorm();
  const double a = (w.transpose() * w).squaredNorm();
  const double b = (w.transpose() * ws).squaredNorm();
  const double c = (ws.transpose() * ws).squaredNorm();
  return std::max(0.0, a - 2.0 * b + c);
}

double xi_inner_gap(const Matrix& grad, double lambda, const FactorPair& fp, const FactorPair& star) {
  const Matrix d = fp.product() - star.product();
  return lambda * (fp.squared_norm() - star.squared_norm()) + 2.0 * (grad.array() * d.array()).sum();
}

TheoryReport error_bound_audit(const RecoveryInstance& inst, const FactorPair& fp, double lambda,
                               const SpectrumEstimate& spectrum, bool psd_check) {
  const AuditSetup s = setup_audit(inst, fp, lambda, spectrum);
  std::vector<Premise> premises = critical_premises(s, fp);
  if (psd_check)
    premises.push_back(psd_premise(s, fp));
  else
    premises.push_back({"hessian-psd", false, kNaN, "check disabled by caller"});
  GammaConstants gam;
  try {
    gam = gamma_hat(s.moduli.alpha, s.moduli.beta);
  } catch (const Error& e) {
    gam.gamma_hat = kNaN;
  }
  premises.push_back({"spectrum-admissible", gam.admissible,
                      s.moduli.alpha > 0.0 ? s.moduli.beta / s.moduli.alpha : kNaN,
                      "method " + to_string(spectrum.method)});

  const Matrix w = stack(fp), ws = stack(s.star);
  const double gap2 = gram_gap_squared(w, ws);
  const double err2 = (fp.product() - inst.m_star).squaredNorm();
  const double gstar = top_singular(f_grad(*s.loss, inst.m_star));
  const double xi = lambda + gstar;
  const double rs = static_cast<double>(s.r_star);
  const double final_rhs = 2.0 * gam.gamma_hat * rs * (lambda * lambda + gstar * gstar);

  std::string notes = "spectrum " + to_string(spectrum.method) +
                      "; middle inequality uses gamma_hat ||Xi(M*)||^2 with no r* factor";
  if (!spectrum.exact()) notes += "; moduli are Monte-Carlo estimates, not certificates";

  auto fill = [&](const std::string& id, double lhs, double rhs) {
    Check c = make_check(id, premises);
    c.lhs = lhs;
    c.rhs = rhs;
    c.tolerance = tolerance_for(lhs, rhs, 1e-9);
    c.notes = notes;
    c.metrics["lambda"] = lambda;
    c.metrics["gamma_hat"] = gam.gamma_hat;
    c.metrics["gamma1"] = gam.gamma1;
    c.metrics["xi_norm"] = xi;
    c.metrics["grad_f_mstar"] = gstar;
    c.metrics["r_star"] = rs;
    c.finalize();
    return c;
  };

  TheoryReport rep;
  rep.add(fill("error_bound.product-vs-gram", 2.0 * err2, gap2));
  rep.add(fill("error_bound.gram-vs-xi", gap2, gam.gamma_hat * xi * xi));
  rep.add(fill("error_bound.xi-vs-noise", gam.gamma_hat * xi * xi, final_rhs));
  rep.add(fill("error_bound.final", 2.0 * err2, final_rhs));
  return rep;
}

TheoryReport critical_inequality_audit(const RecoveryInstance& inst, const FactorPair& fp,
                                       double lambda, const SpectrumEstimate& spectrum) {
  const AuditSetup s = setup_audit(inst, fp, lambda, spectrum);
  std::vector<Premise> premises = critical_premises(s, fp);
  const double a = s.moduli.alpha, b = s.moduli.beta;
  premises.push_back({"moduli-positive", a > 0.0 && b >= a, a, ""});

  const Matrix w = stack(fp), ws = stack(s.star);
  const SvdResult sw = thin_svd(w);
  const Index k = sw.rank();
  const Matrix q = sw.left.leftCols(k);
  const Matrix gamma = (w * (w.transpose() * q) - ws * (ws.transpose() * q)) * q.transpose();
  const Matrix xi = xi_matrix(*s.loss, inst.m_star, lambda);
  const double gn = gamma.norm();
  const double ip = (xi.array() * gamma.array()).sum();
  const double err = (fp.product() - inst.m_star).norm();
  const double gap2 = dense_gram_difference(w, ws).squaredNorm();
  const double xin = xi_norm(*s.loss, inst.m_star, lambda);
  const double rs = static_cast<double>(s.r_star);

  TheoryReport rep;
  {
    Check c = make_check("critical-inequality.inequality", premises);
    c.lhs = 0.5 * gn * gn + 2.0 / (a + b) * ip;
    c.rhs = (b - a) / (a + b) * err * gn;
    c.tolerance = 1e-6 * (0.5 * gn * gn + 2.0 / (a + b) * std::abs(ip) + c.rhs) + 1e-300;
    c.metrics["gamma_norm"] = gn;
    c.metrics["xi_inner_gamma"] = ip;
    c.metrics["basis_rank"] = static_cast<double>(k);
    c.finalize();
    rep.add(c);
  }
  {
    Check c = make_check("critical-inequality.fcond", premises);
    c.lhs = 15.0 / 64.0 * gn * gn;
    c.rhs = 64.0 * rs / ((a + b) * (a + b)) * xin * xin +
            (b - a) * (b - a) / (2.0 * (a + b) * (a + b)) * gap2;
    c.tolerance = tolerance_for(c.lhs, c.rhs, 1e-6);
    c.metrics["xi_norm"] = xin;
    c.metrics["gram_gap_sq"] = gap2;
    c.finalize();
    rep.add(c);
  }
  return rep;
}

TheoryReport xi_identity_audit(const RecoveryInstance& inst, const FactorPair& fp, double lambda,
                               const SpectrumEstimate& spectrum) {
  const AuditSetup s = setup_audit(inst, fp, lambda, spectrum);
  std::vector<Premise> premises = critical_premises(s, fp);
  premises.push_back(psd_premise(s, fp));
  const double a = s.moduli.alpha, b = s.moduli.beta;
  premises.push_back({"moduli-positive", a > 0.0 && b >= a, a, ""});
  const Index r = fp.r(), rs = s.r_star;
  premises.push_back({"r-ge-rstar", r >= rs, static_cast<double>(r), ""});

  TheoryReport rep;
  if (r < rs) {
    for (const char* id : {"xi-identity.identity", "xi-identity.goal-ineq", "xi-identity.psd-rotation"}) {
      Check c = make_check(id, premises);
      c.notes = "factor width below the true rank";
      c.finalize();
      rep.add(c);
    }
    return rep;
  }

  const Index n = fp.n();
  const Matrix w = stack(fp), ws = stack(s.star);
  Matrix bpad = Matrix::Zero(w.rows(), r);
  bpad.leftCols(rs) = ws;
  const ProcrustesResult pr = procrustes(w, bpad);
  const Matrix delta = w - bpad * pr.rotation;
  const FactorPair dfp = unstack(delta, n);
  const Matrix x = fp.product();
  const Matrix h = fp.U * dfp.V.transpose() + dfp.U * fp.V.transpose();

  const double curv = phi_hess_quadform(s.obj, fp, dfp);
  const double hf = s.loss->hess_quadform(x, h);
  const double xi_x = xi_inner_gap(f_grad(*s.loss, x), lambda, fp, s.star);
  {
    Check c = make_check("xi-identity.identity", premises);
    const double mag = std::abs(curv) + std::abs(hf) + std::abs(xi_x);
    c.lhs = std::abs(curv - (hf - xi_x));
    c.rhs = 1e-8 * std::max(mag, 1e-300);
    c.metrics["hessian_along_delta"] = curv;
    c.metrics["loss_curvature_term"] = hf;
    c.metrics["xi_term"] = xi_x;
    c.metrics["procrustes_distance"] = pr.distance;
    c.notes = "both sides evaluated independently; rhs is the relative allowance";
    c.finalize();
    rep.add(c);
  }
  {
    std::vector<Premise> p2 = premises;
    p2.push_back({"curvature-along-delta", curv >= -1e-8 * (std::abs(hf) + std::abs(xi_x)), curv, ""});
    Check c = make_check("xi-identity.goal-ineq", p2);
    const double gap2 = dense_gram_difference(w, ws).squaredNorm();
    const double xi_star = xi_inner_gap(f_grad(*s.loss, inst.m_star), lambda, fp, s.star);
    c.lhs = std::max(0.0, a / (2.0 * b) * gap2 + xi_star / b);
    c.rhs = ((w.transpose() * w) * (delta.transpose() * delta)).trace();
    c.tolerance = tolerance_for(c.lhs, c.rhs, 1e-8);
    c.metrics["gram_gap_sq"] = gap2;
    c.metrics["xi_star_term"] = xi_star;
    c.finalize();
    rep.add(c);
  }
  {
    Check c = make_check("xi-identity.psd-rotation", premises);
    const Matrix r1 = pr.rotation.topRows(rs);
    const Matrix mprod = w.transpose() * (ws * r1);
    const Matrix sym = 0.5 * (mprod + mprod.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues()(0);
    c.lhs = -min_eig;
    c.rhs = 0.0;
    c.tolerance = 1e-10;
    c.metrics["min_eig"] = min_eig;
    c.metrics["asymmetry"] = (mprod - mprod.transpose()).norm();
    c.finalize();
    rep.add(c);
  }
  return rep;
}

TheoryReport balance_audit(const FactorPair& fp, double rel_tol) {
  TheoryReport rep;
  const Matrix gu = fp.U.transpose() * fp.U;
  const Matrix gv = fp.V.transpose() * fp.V;
  const double abs_res = (gu - gv).norm();
  const double scale = gu.norm();
  const Matrix w = stack(fp);

  double sigma_gap = 0.0;
  if (fp.r() > 0 && fp.m() > 0) {
    const Vector sw = thin_svd(w).singulars;
    const Vector sv = thin_svd(fp.V).singulars;
    const Index k = std::min(sw.size(), sv.size());
    for (Index i = 0; i < k; ++i)
      sigma_gap = std::max(sigma_gap, std::abs(sw(i) - std::sqrt(2.0) * sv(i)));
  }
  {
    Check c;
    c.id = "balance.gram";
    c.lhs = abs_res;
    c.rhs = rel_tol * scale;
    c.metrics["absolute"] = abs_res;
    c.metrics["relative"] = scale > 0.0 ? abs_res / scale : 0.0;
    c.metrics["sigma_w_vs_sqrt2_sigma_v"] = sigma_gap;
    c.finalize();
    rep.add(c);
  }
  {
    const Index ru = factor_rank(fp.U), rv = factor_rank(fp.V), rx = numerical_rank(fp.product()),
                rw = factor_rank(w);
    Check c;
    c.id = "balance.rank-chain";
    c.lhs = static_cast<double>(std::max({ru, rv, rx, rw}) - std::min({ru, rv, rx, rw}));
    c.rhs = 0.0;
    c.metrics["rank_u"] = static_cast<double>(ru);
    c.metrics["rank_v"] = static_cast<double>(rv);
    c.metrics["rank_uv"] = static_cast<double>(rx);
    c.metrics["rank_w"] = static_cast<double>(rw);
    c.finalize();
    rep.add(c);
  }
  return rep;
}

Check diag_critical_audit(const FactorPair& fp, const Matrix& d, double lambda, Index r_star) {
  const Index n = d.rows(), m = d.cols();
  if (fp.n() != n || fp.m() != m) throw Error("diag_critical_audit: shape mismatch");
  const Index len = std::min(n, m);
  const Vector diag = d.diagonal();
  Matrix off = d;
  off.diagonal().setZero();
  if (off.cwiseAbs().maxCoeff() > 0.0) throw Error("diag_critical_audit: D must be diagonal");
  for (Index i = 1; i < len; ++i)
    if (diag(i) > diag(i - 1)) throw Error("diag_critical_audit: D must be nonincreasing");

  Index rs = r_star;
  if (rs < 0) {
    rs = 0;
    while (rs < len && diag(rs) >= lambda) ++rs;
  }
  if (rs > len) throw Error("diag_critical_audit: r* exceeds min(n, m)");
  const double d_next = rs < len ? diag(rs) : 0.0;

  Check c;
  c.id = "diag_critical";
  c.premise("lambda-above-next", lambda > d_next, d_next, "r* = " + std::to_string(rs));

  const Matrix u1 = fp.U.topRows(rs), v1 = fp.V.topRows(rs);
  const double r_sym = (u1 - v1).norm();
  const double r_u2 = fp.U.bottomRows(n - rs).norm();
  const double r_v2 = fp.V.bottomRows(m - rs).norm();
  Matrix core = u1 * u1.transpose();
  core.diagonal() -= diag.head(rs);
  core.diagonal().array() += lambda;
  const double r_eq = (core * u1).norm();

  c.lhs = std::max({r_sym, r_u2, r_v2, r_eq});
  c.rhs = 1e-6 * (1.0 + fp.U.norm());
  c.metrics["u1_minus_v1"] = r_sym;
  c.metrics["u2"] = r_u2;
  c.metrics["v2"] = r_v2;
  c.metrics["stationarity"] = r_eq;
  c.metrics["r_star"] = static_cast<double>(rs);
  c.finalize();
  return c;
}

FullObsOptimum global_set_fullobs(const DiagonalObjective& diag) {
  const Index r = diag.r;
  if (!(diag.sigma_at(r - 1) > diag.sigma_at(r))) {
    std::ostringstream msg;
    msg << "global_set_fullobs: needs sigma_r > sigma_{r+1}, got " << diag.sigma_at(r - 1)
        << " and " << diag.sigma_at(r);
    throw Error(msg.str());
  }
  FullObsOptimum out;
  out.minimizer = FactorPair::zeros(diag.n, diag.m, r);
  double value = 0.0;
  for (Index i = 0; i < r; ++i) {
    const double s = diag.sigma(i);
    const double z = std::max(s - diag.lambda, 0.0);
    out.minimizer.U(i, i) = std::sqrt(z);
    out.minimizer.V(i, i) = std::sqrt(z);
    value += 0.5 * (z - s) * (z - s) + diag.lambda * z;
  }
  for (Index i = r; i < diag.sigma.size(); ++i) value += 0.5 * diag.sigma(i) * diag.sigma(i);
  out.value = value;
  return out;
}

double phi_gap(const RegularizedObjective& obj, const FactorPair& fp, const FactorPair& center) {
  const FactorPair d = fp - center;
  const double reg = 0.5 * obj.lambda *
                     ((d.U.array() * (fp.U + center.U).array()).sum() +
                      (d.V.array() * (fp.V + center.V).array()).sum());
  auto* ls = dynamic_cast<const LeastSquaresLoss*>(obj.loss.get());
  if (!ls) return obj.loss->value(fp.product()) - obj.loss->value(center.product()) + reg;
  const Matrix diff = d.U * fp.V.transpose() + center.U * d.V.transpose();
  const Matrix sum = fp.product() + center.product();
  const Vector ad = ls->op().apply(diff);
  const Vector as = ls->op().apply(sum) - 2.0 * ls->y();
  return ls->scale() * ad.dot(as) + reg;
}

namespace {

// Unit directions spanning the Hessian null space at the center, with the
// tangent of the rotation orbit {(U W, V W) : W skew} projected out.
std::vector<Vector> transverse_null_directions(const RegularizedObjective& obj,
                                               const FactorPair& center) {
  const Index n = center.n(), m = center.m(), r = center.r();
  const Matrix h = dense_hessian(obj, center);
  Eigen::SelfAdjointEigenSolver<Matrix> es(h);
  const Vector mu = es.eigenvalues();
  const double mu_max = mu.cwiseAbs().maxCoeff();
  std::vector<Index> idx;
  for (Index i = 0; i < mu.size(); ++i)
    if (std::abs(mu(i)) <= 1e-8 * std::max(mu_max, 1e-300)) idx.push_back(i);
  if (idx.empty()) return {};
  Matrix null(h.rows(), static_cast<Index>(idx.size()));
  for (size_t j = 0; j < idx.size(); ++j) null.col(static_cast<Index>(j)) = es.eigenvectors().col(idx[j]);

  std::vector<Vector> tangent;
  for (Index i = 0; i < r; ++i)
    for (Index j = i + 1; j < r; ++j) {
      Matrix om = Matrix::Zero(r, r);
      om(i, j) = 1.0;
      om(j, i) = -1.0;
      tangent.push_back(flatten(FactorPair(center.U * om, center.V * om)));
    }
  Matrix proj = null;
  if (!tangent.empty()) {
    Matrix t(h.rows(), static_cast<Index>(tangent.size()));
    for (size_t j = 0; j < tangent.size(); ++j) t.col(static_cast<Index>(j)) = tangent[j];
    const SvdResult st = thin_svd(t);
    const Index kt = st.rank(1e-10);
    if (kt > 0) {
      const Matrix basis = st.left.leftCols(kt);
      proj -= basis * (basis.transpose() * proj);
    }
  }
  const SvdResult sp = thin_svd(proj);
  std::vector<Vector> out;
  for (Index j = 0; j < sp.singulars.size(); ++j)
    if (sp.singulars(j) > 1e-6) out.push_back(sp.left.col(j));
  (void)n;
  (void)m;
  return out;
}

}  // namespace

Check kl_probe(const DiagonalObjective& diag, const FactorPair& center, const KlProbeOptions& opt) {
  const RegularizedObjective obj = diag.objective();
  const double lam = diag.lambda;
  Check c;
  c.id = "kl_probe";
  const std::vector<double> tops = diag.distinct_top_values();
  const Index s = static_cast<Index>(tops.size());
  const double sig1 = diag.sigma(0);
  const double margin = 1e-9 * sig1;
  bool boundary = false;
  Index k = 0;
  for (double t : tops) {
    if (std::abs(t - lam) <= margin) boundary = true;
    if (t > lam) ++k;
  }
  c.premise("lambda-in-gap", !boundary && lam > 0.0, static_cast<double>(k),
            "s = " + std::to_string(s));

  double cap = std::numeric_limits<double>::infinity();
  if (sig1 > 0.0) {
    if (k >= 1) cap = std::min(cap, std::sqrt(std::max(tops[k - 1] - lam, 0.0)) / 2.0);
    const double next = k < s ? tops[k] : 0.0;
    cap = std::min(cap, (lam - next) / (2.0 * std::sqrt(sig1)));
    if (k == s) cap = std::min(cap, (tops[s - 1] - diag.sigma_at(diag.r)) / (4.0 * std::sqrt(sig1)));
  }
  const double delta = opt.radius > 0.0 ? opt.radius : cap;
  c.premise("radius-positive", delta > 0.0 && std::isfinite(delta), delta);

  const double gnorm = phi_grad(obj, center).norm();
  const double gate = kCriticalGate * (1.0 + diag.sigma.norm());
  if (opt.require_global) {
    bool ok = false;
    double diff = kNaN;
    std::string detail;
    try {
      const FullObsOptimum best = global_set_fullobs(diag);
      diff = std::abs(phi_value(obj, center) - best.value);
      ok = diff <= 1e-8 * (1.0 + std::abs(best.value)) && gnorm <= gate;
    } catch (const Error& e) {
      detail = e.what();
    }
    c.premise("center-global", ok, diff, detail);
  } else {
    c.premise("center-critical", gnorm <= gate, gnorm);
  }

  c.metrics["delta"] = delta;
  c.metrics["delta_cap"] = cap;
  c.metrics["k"] = static_cast<double>(k);
  c.metrics["s"] = static_cast<double>(s);
  if (!c.premises_verified()) {
    c.finalize();
    return c;
  }

  const double phi0 = phi_value(obj, center);
  const double floor = 1e-13 * (1.0 + std::abs(phi0));
  const Index n = center.n(), m = center.m(), r = center.r();
  const Index dim = (n + m) * r;
  double eta_ball = std::numeric_limits<double>::infinity();
  double eta_null = std::numeric_limits<double>::infinity();
  Index used = 0, skipped = 0;

  auto probe = [&](const FactorPair& fp, double* eta) {
    const double gap = phi_gap(obj, fp, center);
    if (!(gap > floor)) {
      ++skipped;
      return;
    }
    const double ratio = phi_grad(obj, fp).squared_norm() / gap;
    *eta = std::min(*eta, ratio);
    ++used;
  };

  for (Index t = 0; t < opt.samples; ++t) {
    Rng rng(derive_seed(opt.seed, static_cast<std::uint64_t>(t)));
    const Vector p = uniform_ball_point(dim, delta, rng);
    probe(center + unflatten(p, n, m, r), &eta_ball);
  }

  Index null_dim = 0;
  if (opt.null_probes && dim <= kDenseHessianCap) {
    std::vector<Vector> dirs = transverse_null_directions(obj, center);
    null_dim = static_cast<Index>(dirs.size());
    if (dirs.size() > 1) {
      Rng rng(derive_seed(opt.seed, 0x6e756c6cULL));
      for (int j = 0; j < 4; ++j) {
        Vector mix = Vector::Zero(dim);
        for (const auto& d : dirs) mix += std::normal_distribution<double>()(rng) * d;
        if (mix.norm() > 0.0) dirs.push_back(mix.normalized());
      }
    }
    for (const auto& d : dirs)
      for (double sign : {1.0, -1.0})
        for (int j = 0; j < opt.null_scales; ++j) {
          const double t = sign * delta * std::ldexp(1.0, -j);
          probe(center + unflatten(t * d, n, m, r), &eta_null);
        }
  }

  const double eta = std::min(eta_ball, eta_null);
  c.lhs = 1e-8 * lam;
  c.rhs = std::isfinite(eta) ? eta : kNaN;
  c.tolerance = 0.0;
  c.metrics["eta_hat"] = c.rhs;
  c.metrics["eta_ball"] = std::isfinite(eta_ball) ? eta_ball : kNaN;
  c.metrics["eta_null"] = std::isfinite(eta_null) ? eta_null : kNaN;
  c.metrics["probes_used"] = static_cast<double>(used);
  c.metrics["probes_skipped"] = static_cast<double>(skipped);
  c.metrics["null_dim"] = static_cast<double>(null_dim);
  c.notes = "eta_hat is a sampled minimum, an upper estimate of the true modulus";
  c.finalize();
  return c;
}

DiagonalObjective example_objective(double a, double lambda, Index n, Index m) {
  if (!(a > 0.0) || !(lambda > 0.0) || !(lambda < a))
    throw Error("example_objective: needs 0 < lambda < a");
  return DiagonalObjective(Vector::Constant(std::min(n, m), a), n, m, lambda, 2);
}

FactorPair example_center(double a, double lambda, Index n, Index m) {
  FactorPair fp = FactorPair::zeros(n, m, 2);
  fp.U(1, 1) = std::sqrt(a - lambda);
  fp.V(1, 1) = std::sqrt(a - lambda);
  return fp;
}

LinearFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error("fit_line: size mismatch");
  LinearFit f;
  const Index n = static_cast<Index>(x.size());
  f.count = n;
  if (n < 2) {
    f.slope = f.intercept = f.residual_se = f.r2 = kNaN;
    return f;
  }
  double mx = 0.0, my = 0.0;
  for (Index i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (Index i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  double ssr = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double e = y[i] - (f.intercept + f.slope * x[i]);
    ssr += e * e;
  }
  f.residual_se = n > 2 ? std::sqrt(ssr / static_cast<double>(n - 2)) : 0.0;
  f.r2 = syy > 0.0 ? 1.0 - ssr / syy : 1.0;
  return f;
}

namespace {

using Quad = __float128;

Quad sqrt_quad(Quad x) {
  if (x <= 0) return 0;
  Quad s = std::sqrt(static_cast<double>(x));
  for (int i = 0; i < 3; ++i) s = 0.5 * (s + x / s);
  return s;
}

struct Quad2 {
  Quad a, b, c, d;  // [[a, b], [c, d]]
};

// Phi on the 2 x 2 problem with U = V = u and Sigma = alpha I:
// 1/2 ||u u^T - alpha I||^2 + lambda ||u||^2.
Quad example_phi(const Quad2& u, Quad alpha, Quad lambda) {
  const Quad x11 = u.a * u.a + u.b * u.b - alpha;
  const Quad x12 = u.a * u.c + u.b * u.d;
  const Quad x22 = u.c * u.c + u.d * u.d - alpha;
  const Quad un = u.a * u.a + u.b * u.b + u.c * u.c + u.d * u.d;
  return 0.5 * (x11 * x11 + 2 * x12 * x12 + x22 * x22) + lambda * un;
}

// ||grad||^2 = 2 ||(u u^T - alpha I + lambda I) u||^2.
Quad example_grad_sq(const Quad2& u, Quad alpha, Quad lambda) {
  const Quad m11 = u.a * u.a + u.b * u.b - alpha + lambda;
  const Quad m12 = u.a * u.c + u.b * u.d;
  const Quad m22 = u.c * u.c + u.d * u.d - alpha + lambda;
  const Quad g11 = m11 * u.a + m12 * u.c, g12 = m11 * u.b + m12 * u.d;
  const Quad g21 = m12 * u.a + m22 * u.c, g22 = m12 * u.b + m22 * u.d;
  return 2 * (g11 * g11 + g12 * g12 + g21 * g21 + g22 * g22);
}

}  // namespace

CounterexampleResult counterexample_sequence(double a, double lambda, int k_max) {
  if (!(lambda > 0.0) || !(lambda < a)) throw Error("counterexample_sequence: needs 0 < lambda < a");
  if (k_max < 20) throw Error("counterexample_sequence: k_max must be at least 20");
  CounterexampleResult out;
  out.a = a;
  out.lambda = lambda;
  const Quad qa = a, ql = lambda;
  const Quad sd = sqrt_quad(qa - ql);
  const Quad2 base{0, 0, 0, sd};
  const Quad phi0 = example_phi(base, qa, ql);
  out.base_value = static_cast<double>(phi0);

  std::vector<double> lk, lg, lq;
  const int k_lo = std::max(1, k_max / 10);
  for (int k = 1; k <= k_max; ++k) {
    const Quad t = Quad(1) / (Quad(k) * Quad(k));
    const Quad2 u{0, t, t, sd + t * t};
    CounterexamplePoint p;
    p.k = k;
    p.gap = static_cast<double>(example_phi(u, qa, ql) - phi0);
    p.grad_sq = static_cast<double>(example_grad_sq(u, qa, ql));
    p.ratio = p.grad_sq / p.gap;
    out.points.push_back(p);
    if (k >= k_lo) {
      lk.push_back(std::log(static_cast<double>(k)));
      lg.push_back(std::log(p.gap));
      lq.push_back(std::log(p.grad_sq));
    }
  }
  out.gap_fit = fit_line(lk, lg);
  out.grad_fit = fit_line(lk, lq);
  return out;
}

TheoryReport counterexample_report(const CounterexampleResult& res) {
  TheoryReport rep;
  auto slope_check = [&](const std::string& id, const LinearFit& f, double target, double band) {
    Check c;
    c.id = id;
    c.lhs = std::abs(f.slope - target);
    c.rhs = band;
    c.metrics["slope"] = f.slope;
    c.metrics["intercept"] = f.intercept;
    c.metrics["residual_se"] = f.residual_se;
    c.metrics["points"] = static_cast<double>(f.count);
    c.finalize();
    return c;
  };
  rep.add(slope_check("counterexample.gap-slope", res.gap_fit, -4.0, 0.2));
  rep.add(slope_check("counterexample.grad-slope", res.grad_fit, -8.0, 0.3));
  {
    Check c;
    c.id = "counterexample.ratio-decreasing";
    double violations = 0.0;
    for (size_t i = 1; i < res.points.size(); ++i)
      if (res.points[i - 1].k >= 5 && !(res.points[i].ratio < res.points[i - 1].ratio)) violations += 1.0;
    c.lhs = violations;
    c.rhs = 0.0;
    if (!res.points.empty()) c.metrics["last_ratio"] = res.points.back().ratio;
    c.finalize();
    rep.add(c);
  }
  {
    Check c;
    c.id = "counterexample.base-value";
    const double expect = 0.5 * (res.a * res.a + res.lambda * res.lambda) + res.lambda * (res.a - res.lambda);
    c.lhs = std::abs(res.base_value - expect);
    c.rhs = 1e-12 * std::abs(expect);
    c.metrics["base_value"] = res.base_value;
    c.finalize();
    rep.add(c);
  }
  return rep;
}

double calmness_threshold(double c_bar, double noise_norm) {
  if (c_bar < 0.0 || noise_norm < 0.0) throw Error("calmness_threshold: arguments must be nonnegative");
  const double t = 2.0 * c_bar + noise_norm;
  return t + std::sqrt(t * t + 4.0 * c_bar * noise_norm);
}

CalmnessEstimate calmness_estimate(const RecoveryInstance& inst, const FactorPair& center,
                                   double eps_ball, Index samples, std::uint64_t seed) {
  if (!(eps_ball > 0.0)) throw Error("calmness_estimate: eps_ball must be positive");
  const SamplingOperator& op = *inst.op;
  const double w = 2.0 * op.loss_scale();
  auto upsilon = [&](const FactorPair& fp) {
    const Matrix res = w * op.adjoint(op.apply(fp.product() - inst.m_star));
    return FactorPair(res * fp.V, res.transpose() * fp.U);
  };
  const FactorPair y0 = upsilon(center);
  const Index n = center.n(), m = center.m(), r = center.r();
  CalmnessEstimate out;
  for (Index t = 0; t < samples; ++t) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
    const Vector p = uniform_ball_point((n + m) * r, eps_ball, rng);
    const double dist = p.norm();
    if (dist > 0.0) {
      const FactorPair y = upsilon(center + unflatten(p, n, m, r));
      out.c1 = std::max(out.c1, (y.U - y0.U).norm() / dist);
      out.c2 = std::max(out.c2, (y.V - y0.V).norm() / dist);
    }
    out.c1_running.push_back(out.c1);
    out.c2_running.push_back(out.c2);
  }
  return out;
}

TheoryReport equivalence_audit(const LeastSquaresLoss& loss, const Matrix& apg_x,
                               const FactorPair& aal_fp, double lambda, bool converged,
                               double objective_rel_tol) {
  const Index r = aal_fp.r();
  const SvdResult sx = thin_svd(apg_x);
  const Index rank_apg = sx.rank();
  std::vector<Premise> premises;
  premises.push_back({"solves-converged", converged, converged ? 1.0 : 0.0, ""});
  premises.push_back({"apg-rank-le-r", rank_apg <= r, static_cast<double>(rank_apg),
                      "r = " + std::to_string(r)});

  auto shared = std::shared_ptr<const Loss>(std::shared_ptr<const Loss>{}, &loss);
  const RegularizedObjective obj(shared, lambda, r);
  const double convex = loss.value(apg_x) + lambda * sx.singulars.sum();
  const double factored = phi_value(obj, aal_fp);

  TheoryReport rep;
  {
    Check c = make_check("equivalence.objective-gap", premises);
    c.lhs = std::abs(convex - factored) / std::max(std::abs(convex), 1e-300);
    c.rhs = objective_rel_tol;
    c.metrics["convex_objective"] = convex;
    c.metrics["factored_objective"] = factored;
    c.finalize();
    rep.add(c);
  }
  {
    Check c = make_check("equivalence.factorization", premises);
    const Index k = std::min(r, sx.singulars.size());
    const Vector root = sx.singulars.head(k).cwiseSqrt();
    FactorPair fac = FactorPair::zeros(apg_x.rows(), apg_x.cols(), r);
    fac.U.leftCols(k) = sx.left.leftCols(k) * root.asDiagonal();
    fac.V.leftCols(k) = sx.right.leftCols(k) * root.asDiagonal();
    const double val = phi_value(obj, fac);
    c.lhs = std::abs(val - convex) / std::max(std::abs(convex), 1e-300);
    c.rhs = 1e-6;
    c.metrics["factorization_objective"] = val;
    c.finalize();
    rep.add(c);
  }
  {
    Check c;
    c.id = "equivalence.nuclear-char";
    c.lhs = nuclear_norm(aal_fp.product());
    c.rhs = 0.5 * aal_fp.squared_norm();
    c.tolerance = 1e-10 * std::max(1.0, c.rhs);
    c.finalize();
    rep.add(c);
  }
  return rep;
}

}  // namespace lowrank
