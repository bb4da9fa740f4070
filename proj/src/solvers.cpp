#include "lowrank/solvers.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <sstream>

#include "lowrank/lanczos.hpp"

namespace lowrank {

std::string to_string(const Schedule& s) {
  switch (s.kind) {
    case ScheduleKind::kNone: return "none";
    case ScheduleKind::kNesterov: return "nesterov";
    case ScheduleKind::kFixed: return "fixed(" + format_double(s.beta) + ")";
  }
  return "unknown";
}

std::string to_string(StopReason s) {
  return s == StopReason::kConverged ? "converged" : "iteration-cap";
}

FactorPair init_spectral(const Matrix& x0, Index r) {
  if (r < 1 || r > std::min(x0.rows(), x0.cols())) throw Error("init_spectral: rank out of range");
  const SvdResult s = thin_svd(x0);
  const Vector root = s.singulars.head(r).cwiseSqrt();
  return FactorPair(s.left.leftCols(r) * root.asDiagonal(), s.right.leftCols(r) * root.asDiagonal());
}

FactorPair init_spectral(const RecoveryInstance& inst, Index r) {
  return init_spectral(inst.op->adjoint(inst.y), r);
}

std::pair<double, double> nesterov_beta(double theta_prev, double theta) {
  const double beta = (theta_prev - 1.0) / theta;
  const double next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
  return {beta, next};
}

double beta_cap(double l, double lf) { return std::sqrt(l / (l + lf)); }

double loss_curvature(const Loss& loss, const Matrix& at) {
  if (auto* ls = dynamic_cast<const LeastSquaresLoss*>(&loss)) {
    const double a = ls->op().operator_norm();
    return 2.0 * ls->scale() * a * a;
  }
  const Index n = loss.rows(), m = loss.cols();
  auto hv = [&](const Vector& v) -> Vector {
    const Matrix h = loss.hess_apply(at, Eigen::Map<const Matrix>(v.data(), n, m));
    return Eigen::Map<const Vector>(h.data(), h.size());
  };
  return std::abs(lanczos_extreme(hv, n * m, SpectrumEnd::kLargest, 1e-8, 300, 0xc0ffeeULL).value);
}

namespace {

double squared_spectral(const Matrix& a) {
  if (a.size() == 0 || a.cwiseAbs().maxCoeff() == 0.0) return 0.0;
  const double s = thin_svd(a).singulars(0);
  return s * s;
}

struct StepWork {
  FactorPair next;
  Matrix ut, vt;
  Matrix grad1_t;  // grad_U F(U~, V^k)
  Matrix grad2_t;  // grad_V F(U^{k+1}, V~)
  bool have_next = false;  // f and grad f at U^{k+1} V^{k+1}^T from the last line search
  double f_next = 0.0;
  Matrix g_next;
};

// Closed-form block updates. g_cur, when given, is grad f(U^k V^k^T) and is
// reused for the U block when beta = 0.
StepWork step_impl(const RegularizedObjective& obj, const FactorPair& cur, const FactorPair& prev,
                   double beta, double& lf, const Matrix* g_cur, bool backtracking, int* backtracks) {
  const Loss& loss = *obj.loss;
  const double lam = obj.lambda;
  StepWork w;
  w.ut = cur.U + beta * (cur.U - prev.U);
  Matrix g;
  double f_t = 0.0;
  if (g_cur && beta == 0.0 && !backtracking) {
    g = *g_cur;
  } else {
    f_t = loss.value_and_grad(w.ut * cur.V.transpose(), &g);
  }
  w.grad1_t = g * cur.V;
  Matrix u_next;
  while (true) {
    u_next = (lf * w.ut - w.grad1_t) / (lf + lam);
    if (!backtracking) break;
    const Matrix d = u_next - w.ut;
    const double model = f_t + (w.grad1_t.array() * d.array()).sum() + 0.5 * lf * d.squaredNorm();
    if (loss.value(u_next * cur.V.transpose()) <= model + 1e-12 * std::abs(model)) break;
    lf *= 2.0;
    ++*backtracks;
  }

  w.vt = cur.V + beta * (cur.V - prev.V);
  const double f_v = loss.value_and_grad(u_next * w.vt.transpose(), &g);
  w.grad2_t = g.transpose() * u_next;
  Matrix v_next;
  while (true) {
    v_next = (lf * w.vt - w.grad2_t) / (lf + lam);
    if (!backtracking) break;
    const Matrix d = v_next - w.vt;
    const double model = f_v + (w.grad2_t.array() * d.array()).sum() + 0.5 * lf * d.squaredNorm();
    w.f_next = loss.value_and_grad(u_next * v_next.transpose(), &w.g_next);
    if (w.f_next <= model + 1e-12 * std::abs(model)) {
      w.have_next = true;
      break;
    }
    lf *= 2.0;
    ++*backtracks;
  }
  w.next = FactorPair(std::move(u_next), std::move(v_next));
  return w;
}

using IterateCallback =
    std::function<void(int iter, const FactorPair& fp, double obj, double res1, double res2)>;

AalResult run_aal(const RegularizedObjective& obj, const AalConfig& config, const FactorPair& start,
                  double lf0, const IterateCallback& on_iterate) {
  AalResult out;
  double lf = lf0;
  const double ny = 1.0 + obj.loss->data_norm();
  const double lam = obj.lambda;

  FactorPair prev = start, cur = start;
  Matrix g_cur;
  bool have_g = false;
  double theta_prev = 1.0, theta = 1.0;

  FactorPair best = start;
  double best_obj = std::numeric_limits<double>::infinity();

  for (int k = 1; k <= config.max_iters; ++k) {
    const double l = config.l > 0.0 ? config.l : config.l_factor * lf;
    const double cap = beta_cap(l, lf);
    double beta = 0.0;
    switch (config.schedule.kind) {
      case ScheduleKind::kNone:
        break;
      case ScheduleKind::kFixed:
        beta = config.schedule.beta;
        if (beta < 0.0 || beta > cap) {
          std::ostringstream msg;
          msg << "aal_solve: fixed beta " << beta << " outside [0, " << cap << "]";
          throw Error(msg.str());
        }
        break;
      case ScheduleKind::kNesterov: {
        auto [b, next] = nesterov_beta(theta_prev, theta);
        theta_prev = theta;
        theta = next;
        beta = std::max(0.0, b);
        if (beta > cap) {
          beta = cap;
          ++out.clipped_steps;
        }
        break;
      }
    }

    StepWork w = step_impl(obj, cur, prev, beta, lf, have_g ? &g_cur : nullptr, config.backtracking,
                           &out.backtracks);
    Matrix g_new;
    double f_new = 0.0;
    if (w.have_next) {
      f_new = w.f_next;
      g_new = std::move(w.g_next);
    } else {
      f_new = obj.loss->value_and_grad(w.next.product(), &g_new);
    }
    const double res1 =
        (w.grad1_t - g_new * w.next.V + lf * (w.next.U - w.ut)).norm() / ny;
    const double res2 =
        (w.grad2_t - g_new.transpose() * w.next.U + lf * (w.next.V - w.vt)).norm() / ny;
    const double phi = f_new + 0.5 * lam * w.next.squared_norm();
    if (!std::isfinite(phi) || !w.next.U.allFinite() || !w.next.V.allFinite()) {
      std::ostringstream msg;
      msg << "aal_solve: non-finite iterate at iteration " << k;
      throw Error(msg.str());
    }
    if (on_iterate) on_iterate(k, w.next, phi, res1, res2);

    prev = std::move(cur);
    cur = std::move(w.next);
    g_cur = std::move(g_new);
    have_g = true;
    out.iterations = k;
    out.objective = phi;
    out.res1 = res1;
    out.res2 = res2;
    if (phi < best_obj) {
      best_obj = phi;
      best = cur;
    }
    if (res1 <= config.epsilon && res2 <= config.epsilon) {
      out.stop = StopReason::kConverged;
      break;
    }
  }
  out.lf = lf;
  if (out.stop == StopReason::kConverged || out.iterations == 0) {
    out.fp = cur;
    if (out.iterations == 0) out.objective = phi_value(obj, cur);
  } else {
    out.fp = best;
    out.objective = best_obj;
  }
  return out;
}

}  // namespace

FactorPair aal_step(const RegularizedObjective& obj, const FactorPair& current,
                    const FactorPair& previous, double beta, double lf) {
  int unused = 0;
  return step_impl(obj, current, previous, beta, lf, nullptr, false, &unused).next;
}

double auto_lf(const RegularizedObjective& obj, const FactorPair& start) {
  const double curvature = loss_curvature(*obj.loss, start.product());
  // Critical points have ||U||^2 = ||UV^T|| of order ||grad f(0)|| / curvature,
  // so small starts still get a step that holds along the path.
  const Matrix g0 = obj.loss->grad(Matrix::Zero(obj.n(), obj.m()));
  const double data = std::sqrt(squared_spectral(g0));
  const double lf = 2.0 * std::max(curvature * std::max(squared_spectral(start.U), squared_spectral(start.V)), data);
  return lf > 0.0 ? lf : 2.0 * curvature;
}

AalResult aal_solve(const RegularizedObjective& obj, const AalConfig& config, const FactorPair& start) {
  if (start.n() != obj.n() || start.m() != obj.m() || start.r() != obj.r)
    throw Error("aal_solve: start point shape does not match the objective");
  if (!(config.epsilon > 0.0)) throw Error("aal_solve: epsilon must be positive");
  if (config.max_iters < 0) throw Error("aal_solve: max_iters must be nonnegative");
  if (!(config.l_factor >= 1.0)) throw Error("aal_solve: l_factor must be at least 1");
  if (!(config.lf_scale > 0.0)) throw Error("aal_solve: lf_scale must be positive");
  const double lf = config.lf > 0.0 ? config.lf : config.lf_scale * auto_lf(obj, start);
  if (config.l > 0.0 && config.l < lf && !config.backtracking)
    throw Error("aal_solve: extrapolation constant L must be at least L_F");

  if (!config.record_trace) return run_aal(obj, config, start, lf, nullptr);

  SolverTrace trace;
  const auto t0 = std::chrono::steady_clock::now();
  AalResult out = run_aal(obj, config, start, lf,
                          [&](int k, const FactorPair&, double phi, double r1, double r2) {
                            TraceRecord rec;
                            rec.iter = k;
                            rec.obj = phi;
                            rec.res1 = r1;
                            rec.res2 = r2;
                            if (config.record_timing)
                              rec.time_ms = std::chrono::duration<double, std::milli>(
                                                std::chrono::steady_clock::now() - t0)
                                                .count();
                            trace.push_back(rec);
                          });
  // Distances to the returned point need the final iterate, so replay the
  // (deterministic) iteration once more.
  const FactorPair final_fp = out.fp;
  size_t idx = 0;
  run_aal(obj, config, start, lf, [&](int, const FactorPair& fp, double, double, double) {
    if (idx < trace.size()) trace[idx++].dist_to_final = (fp - final_fp).norm();
  });
  out.trace = std::move(trace);
  return out;
}

Matrix svt(const Matrix& z, double tau, double* nuclear_norm_out) {
  if (tau < 0.0) throw Error("svt: threshold must be nonnegative");
  const SvdResult s = thin_svd(z);
  const Vector shrunk = (s.singulars.array() - tau).max(0.0).matrix();
  if (nuclear_norm_out) *nuclear_norm_out = shrunk.sum();
  Index k = 0;
  while (k < shrunk.size() && shrunk(k) > 0.0) ++k;
  if (k == 0) return Matrix::Zero(z.rows(), z.cols());
  return s.left.leftCols(k) * shrunk.head(k).asDiagonal() * s.right.leftCols(k).transpose();
}

double nuclear_norm(const Matrix& x) { return thin_svd(x).singulars.sum(); }

double convex_objective(const Loss& loss, const Matrix& x, double lambda) {
  return loss.value(x) + lambda * nuclear_norm(x);
}

ApgResult apg_nuclear(const Loss& loss, const ApgConfig& config, const Matrix* start) {
  if (!(config.lambda > 0.0)) throw Error("apg_nuclear: lambda must be positive");
  if (!(config.epsilon > 0.0)) throw Error("apg_nuclear: epsilon must be positive");
  const Index n = loss.rows(), m = loss.cols();
  ApgResult out;
  Matrix x = start ? *start : Matrix::Zero(n, m);
  if (x.rows() != n || x.cols() != m) throw Error("apg_nuclear: start shape mismatch");
  double t = config.step > 0.0 ? config.step : 1.0 / loss_curvature(loss, x);
  double fx = convex_objective(loss, x, config.lambda);
  Matrix z = x;
  double theta = 1.0;

  auto prox_step = [&](const Matrix& from, double* f_out, double* nuc_out) -> Matrix {
    Matrix g;
    const double f_from = loss.value_and_grad(from, &g);
    while (true) {
      Matrix cand = svt(from - t * g, t * config.lambda, nuc_out);
      const double f_cand = loss.value(cand);
      if (config.backtracking) {
        const Matrix d = cand - from;
        const double model = f_from + (g.array() * d.array()).sum() + 0.5 / t * d.squaredNorm();
        if (f_cand > model + 1e-12 * std::abs(model)) {
          t *= 0.5;
          continue;
        }
      }
      *f_out = f_cand;
      return cand;
    }
  };

  for (int k = 1; k <= config.max_iters; ++k) {
    double f_new = 0.0, nuc = 0.0;
    Matrix x_new = prox_step(z, &f_new, &nuc);
    double obj_new = f_new + config.lambda * nuc;
    if (obj_new > fx) {
      ++out.restarts;
      theta = 1.0;
      x_new = prox_step(x, &f_new, &nuc);
      obj_new = f_new + config.lambda * nuc;
      if (obj_new > fx) {
        x_new = x;
        obj_new = fx;
      }
    }
    if (!std::isfinite(obj_new)) {
      std::ostringstream msg;
      msg << "apg_nuclear: non-finite iterate at iteration " << k;
      throw Error(msg.str());
    }
    const double change = (x_new - x).norm() / std::max(1.0, x.norm());
    const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
    z = x_new + ((theta - 1.0) / theta_next) * (x_new - x);
    theta = theta_next;
    x = std::move(x_new);
    fx = obj_new;
    out.objective.push_back(fx);
    out.iterations = k;
    if (change <= config.epsilon) {
      out.stop = StopReason::kConverged;
      break;
    }
  }
  out.x = std::move(x);
  out.step = t;
  out.final_objective = fx;
  return out;
}

void write_trace_csv(std::ostream& os, const SolverTrace& trace) {
  os << "iter,obj,res1,res2,dist_to_final,time_ms\n";
  for (const auto& r : trace)
    os << r.iter << ',' << format_double(r.obj) << ',' << format_double(r.res1) << ','
       << format_double(r.res2) << ',' << format_double(r.dist_to_final) << ','
       << format_double(r.time_ms) << '\n';
}

}  // namespace lowrank
