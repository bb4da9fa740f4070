#include "lowrank/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "lowrank/kernels.hpp"
#include "lowrank/objective.hpp"
#include "lowrank/random.hpp"

#ifndef LOWRANK_VERSION
#define LOWRANK_VERSION "0.0.0"
#endif

namespace lowrank {

using nlohmann::json;

double rmse(const Matrix& xf, const Matrix& mstar) {
  if (xf.rows() != mstar.rows() || xf.cols() != mstar.cols()) throw Error("rmse: shape mismatch");
  const double d = mstar.norm();
  if (d == 0.0) throw Error("rmse: reference matrix is zero");
  return (xf - mstar).norm() / d;
}

std::string version_string() { return LOWRANK_VERSION; }

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::kRmseSweep: return "rmse-sweep";
    case ExperimentKind::kConvergence: return "convergence";
    case ExperimentKind::kVerify: return "verify";
    case ExperimentKind::kCounterexample: return "counterexample";
  }
  return "unknown";
}

ExperimentKind experiment_kind_from_string(const std::string& s) {
  if (s == "rmse-sweep") return ExperimentKind::kRmseSweep;
  if (s == "convergence") return ExperimentKind::kConvergence;
  if (s == "verify") return ExperimentKind::kVerify;
  if (s == "counterexample") return ExperimentKind::kCounterexample;
  throw Error("unknown experiment kind '" + s + "'");
}

namespace {

std::string rule_name(LambdaRule::Kind k) {
  switch (k) {
    case LambdaRule::Kind::kAbsolute: return "absolute";
    case LambdaRule::Kind::kNuTimesNoise: return "nu-times-noise";
    case LambdaRule::Kind::kFractionOfSigma: return "fraction-of-sigma";
  }
  return "unknown";
}

LambdaRule::Kind rule_from(const std::string& s) {
  if (s == "absolute") return LambdaRule::Kind::kAbsolute;
  if (s == "nu-times-noise") return LambdaRule::Kind::kNuTimesNoise;
  if (s == "fraction-of-sigma") return LambdaRule::Kind::kFractionOfSigma;
  throw Error("unknown lambda rule '" + s + "'");
}

std::string schedule_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::kNone: return "none";
    case ScheduleKind::kNesterov: return "nesterov";
    case ScheduleKind::kFixed: return "fixed";
  }
  return "unknown";
}

ScheduleKind schedule_from(const std::string& s) {
  if (s == "none") return ScheduleKind::kNone;
  if (s == "nesterov") return ScheduleKind::kNesterov;
  if (s == "fixed") return ScheduleKind::kFixed;
  throw Error("unknown schedule '" + s + "'");
}

template <class T>
void read_if(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.kind = kind;
  switch (kind) {
    case ExperimentKind::kRmseSweep:
      c.n = c.m = 60;
      c.r_star = 3;
      c.r = 9;
      c.op.kind = OperatorKind::kGaussianSensing;
      c.op.p = 900;
      c.op.scaling = LossScaling::kUnit;
      c.noise = NoiseSpec::relative(0.1);
      c.lambda_rule = {LambdaRule::Kind::kNuTimesNoise, 1.0, 1};
      c.nu_grid = {0.5, 1.0, 1.5, 2.0};
      c.aal.schedule = Schedule::nesterov();
      c.aal.epsilon = 1e-5;
      c.aal.l_factor = 100.0;
      c.aal.lf_scale = 0.125;
      c.aal.backtracking = true;
      c.aal.max_iters = 500;
      c.apg.epsilon = 1e-5;
      c.apg.max_iters = 5000;
      c.trials = 3;
      c.rank_tol = 1e-4;
      break;
    case ExperimentKind::kConvergence:
      c.n = c.m = 200;
      c.r_star = 10;
      c.r = 10;
      c.op.kind = OperatorKind::kFullObservation;
      c.noise = NoiseSpec::relative(0.1);
      c.lambda_rule = {LambdaRule::Kind::kFractionOfSigma, 0.95, 10};
      c.aal.schedule = Schedule::none();
      c.aal.epsilon = 1e-10;
      c.aal.max_iters = 5000;
      c.trials = 1;
      break;
    case ExperimentKind::kVerify:
      c.n = c.m = 60;
      c.r_star = 4;
      c.r = 4;
      c.op.kind = OperatorKind::kFullObservation;
      c.noise = NoiseSpec::relative(0.1);
      c.lambda_rule = {LambdaRule::Kind::kNuTimesNoise, 1.2, 1};
      c.aal.schedule = Schedule::nesterov();
      c.aal.epsilon = 1e-10;
      c.aal.max_iters = 20000;
      c.apg.epsilon = 1e-10;
      c.apg.max_iters = 20000;
      c.trials = 1;
      break;
    case ExperimentKind::kCounterexample:
      c.trials = 1;
      break;
  }
  return c;
}

ExperimentConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  try {
    if (!j.contains("experiment")) throw Error("config: missing 'experiment'");
    ExperimentConfig c = default_config(experiment_kind_from_string(j.at("experiment").get<std::string>()));
    read_if(j, "n", c.n);
    read_if(j, "m", c.m);
    read_if(j, "r_star", c.r_star);
    read_if(j, "r", c.r);
    if (j.contains("p")) c.op.p = j.at("p").get<Index>();
    read_if(j, "trials", c.trials);
    read_if(j, "rank_tol", c.rank_tol);
    read_if(j, "seed", c.seed);
    read_if(j, "output_dir", c.output_dir);
    if (j.contains("nu_grid")) c.nu_grid = j.at("nu_grid").get<std::vector<double>>();
    if (j.contains("operator")) {
      const json& o = j.at("operator");
      if (o.contains("kind")) c.op.kind = operator_kind_from_string(o.at("kind").get<std::string>());
      if (o.contains("loss_scaling"))
        c.op.scaling = loss_scaling_from_string(o.at("loss_scaling").get<std::string>());
      read_if(o, "weight_lo", c.op.weight_lo);
      read_if(o, "weight_hi", c.op.weight_hi);
      read_if(o, "mask_prob", c.op.mask_prob);
      read_if(o, "max_entries", c.op.max_entries);
    }
    if (j.contains("noise")) {
      const json& o = j.at("noise");
      const std::string cal = o.value("calibration", std::string("relative"));
      if (cal == "relative") {
        c.noise = NoiseSpec::relative(o.value("ratio", 0.0));
      } else if (cal == "absolute") {
        c.noise = NoiseSpec::absolute(o.value("sigma", 0.0));
      } else if (cal == "none") {
        c.noise = NoiseSpec::none();
      } else {
        throw Error("config: unknown noise calibration '" + cal + "'");
      }
    }
    if (j.contains("lambda_rule")) {
      const json& o = j.at("lambda_rule");
      if (o.contains("kind")) c.lambda_rule.kind = rule_from(o.at("kind").get<std::string>());
      read_if(o, "value", c.lambda_rule.value);
      read_if(o, "index", c.lambda_rule.index);
    }
    if (j.contains("aal")) {
      const json& o = j.at("aal");
      if (o.contains("schedule")) c.aal.schedule.kind = schedule_from(o.at("schedule").get<std::string>());
      read_if(o, "beta", c.aal.schedule.beta);
      read_if(o, "epsilon", c.aal.epsilon);
      read_if(o, "max_iters", c.aal.max_iters);
      read_if(o, "lf", c.aal.lf);
      read_if(o, "l", c.aal.l);
      read_if(o, "l_factor", c.aal.l_factor);
      read_if(o, "backtracking", c.aal.backtracking);
      read_if(o, "lf_scale", c.aal.lf_scale);
      read_if(o, "record_timing", c.aal.record_timing);
    }
    if (j.contains("apg")) {
      const json& o = j.at("apg");
      read_if(o, "epsilon", c.apg.epsilon);
      read_if(o, "max_iters", c.apg.max_iters);
      read_if(o, "step", c.apg.step);
      read_if(o, "backtracking", c.apg.backtracking);
    }
    if (j.contains("verify")) {
      const json& o = j.at("verify");
      VerifySettings& v = c.verify;
      read_if(o, "diag_n", v.diag_n);
      read_if(o, "crit_n", v.crit_n);
      read_if(o, "kl_n", v.kl_n);
      read_if(o, "kl_samples", v.kl_samples);
      read_if(o, "equiv_n", v.equiv_n);
      read_if(o, "equiv_p", v.equiv_p);
      read_if(o, "equiv_r_star", v.equiv_r_star);
      read_if(o, "equiv_lambda_factor", v.equiv_lambda_factor);
      read_if(o, "example_a", v.example_a);
      read_if(o, "example_lambda", v.example_lambda);
      read_if(o, "counterexample_k_max", v.counterexample_k_max);
    }
    if (j.contains("counterexample")) {
      const json& o = j.at("counterexample");
      read_if(o, "a", c.ce_a);
      read_if(o, "lambda", c.ce_lambda);
      read_if(o, "k_max", c.ce_k_max);
    }
    if (c.n < 1 || c.m < 1 || c.r_star < 1 || c.r < 1) throw Error("config: dimensions must be positive");
    if (c.trials < 1) throw Error("config: trials must be at least 1");
    if (!(c.rank_tol > 0.0 && c.rank_tol < 1.0)) throw Error("config: rank_tol must lie in (0, 1)");
    return c;
  } catch (const json::exception& e) {
    throw Error(std::string("config: bad field type: ") + e.what());
  }
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return config_from_json(ss.str());
}

namespace {

json config_json(const ExperimentConfig& c) {
  json j;
  j["experiment"] = to_string(c.kind);
  j["n"] = c.n;
  j["m"] = c.m;
  j["r_star"] = c.r_star;
  j["r"] = c.r;
  j["p"] = c.op.p;
  j["trials"] = c.trials;
  j["rank_tol"] = c.rank_tol;
  j["seed"] = c.seed;
  j["nu_grid"] = c.nu_grid;
  j["operator"] = {{"kind", to_string(c.op.kind)},
                   {"loss_scaling", to_string(c.op.scaling)},
                   {"weight_lo", c.op.weight_lo},
                   {"weight_hi", c.op.weight_hi},
                   {"mask_prob", c.op.mask_prob},
                   {"max_entries", c.op.max_entries}};
  j["noise"] = {{"calibration",
                 c.noise.calibration == NoiseSpec::Calibration::kRelative ? "relative" : "absolute"},
                {"sigma", c.noise.sigma},
                {"ratio", c.noise.ratio}};
  j["lambda_rule"] = {{"kind", rule_name(c.lambda_rule.kind)},
                      {"value", c.lambda_rule.value},
                      {"index", c.lambda_rule.index}};
  j["aal"] = {{"schedule", schedule_name(c.aal.schedule.kind)},
              {"beta", c.aal.schedule.beta},
              {"epsilon", c.aal.epsilon},
              {"max_iters", c.aal.max_iters},
              {"lf", c.aal.lf},
              {"l", c.aal.l},
              {"l_factor", c.aal.l_factor},
              {"backtracking", c.aal.backtracking},
              {"lf_scale", c.aal.lf_scale},
              {"record_timing", c.aal.record_timing}};
  j["apg"] = {{"epsilon", c.apg.epsilon},
              {"max_iters", c.apg.max_iters},
              {"step", c.apg.step},
              {"backtracking", c.apg.backtracking}};
  const VerifySettings& v = c.verify;
  j["verify"] = {{"diag_n", v.diag_n},
                 {"crit_n", v.crit_n},
                 {"kl_n", v.kl_n},
                 {"kl_samples", v.kl_samples},
                 {"equiv_n", v.equiv_n},
                 {"equiv_p", v.equiv_p},
                 {"equiv_r_star", v.equiv_r_star},
                 {"equiv_lambda_factor", v.equiv_lambda_factor},
                 {"example_a", v.example_a},
                 {"example_lambda", v.example_lambda},
                 {"counterexample_k_max", v.counterexample_k_max}};
  j["counterexample"] = {{"a", c.ce_a}, {"lambda", c.ce_lambda}, {"k_max", c.ce_k_max}};
  return j;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir + "': " + ec.message());
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  return out;
}

void close_out(std::ofstream& out, const std::string& path) {
  out.flush();
  if (!out) throw Error("write failed for '" + path + "'");
}

std::string join_path(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

json fit_json(const LinearFit& f) {
  return {{"slope", number(f.slope)},
          {"intercept", number(f.intercept)},
          {"residual_se", number(f.residual_se)},
          {"r2", number(f.r2)},
          {"points", f.count}};
}

}  // namespace

std::string config_to_json(const ExperimentConfig& cfg) { return config_json(cfg).dump(); }

std::string config_hash(const ExperimentConfig& cfg) {
  const std::string s = config_to_json(cfg);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string output_header(const ExperimentConfig& cfg) {
  return "# lowrank " + version_string() + " config_hash=" + config_hash(cfg);
}

double lambda_from_rule(const LambdaRule& rule, const RecoveryInstance& inst) {
  switch (rule.kind) {
    case LambdaRule::Kind::kAbsolute:
      return rule.value;
    case LambdaRule::Kind::kNuTimesNoise:
      return rule.value * noise_adjoint_norm(inst);
    case LambdaRule::Kind::kFractionOfSigma: {
      const Matrix obs = 2.0 * inst.op->loss_scale() * inst.op->adjoint(inst.y);
      const Vector s = thin_svd(obs).singulars;
      if (rule.index < 1 || rule.index > s.size()) throw Error("lambda rule: singular value index out of range");
      return rule.value * s(rule.index - 1);
    }
  }
  throw Error("lambda rule: unknown kind");
}

// ---------------------------------------------------------------- sweep

SweepResult run_rmse_sweep(const ExperimentConfig& cfg) {
  std::vector<double> grid = cfg.nu_grid;
  if (grid.empty()) throw Error("sweep: empty nu grid");
  std::sort(grid.begin(), grid.end());
  const int trials = cfg.trials;

  std::vector<RecoveryInstance> instances(static_cast<size_t>(trials));
  std::vector<double> noise_norm(static_cast<size_t>(trials), 0.0);
  std::vector<std::string> gen_error(static_cast<size_t>(trials));
  kernels::parallel_for(trials, [&](Index t) {
    try {
      const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));
      instances[t] = generate_instance(cfg.n, cfg.m, cfg.r_star, cfg.op, cfg.noise, seed);
      noise_norm[t] = noise_adjoint_norm(instances[t]);
    } catch (const std::exception& e) {
      gen_error[t] = e.what();
    }
  });

  const Index tasks = static_cast<Index>(grid.size()) * trials;
  std::vector<TrialRecord> recs(static_cast<size_t>(tasks));
  kernels::parallel_for(tasks, [&](Index task) {
    const size_t gi = static_cast<size_t>(task / trials);
    const int t = static_cast<int>(task % trials);
    TrialRecord& rec = recs[task];
    rec.nu = grid[gi];
    rec.trial = t;
    rec.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(t));
    if (!gen_error[t].empty()) {
      rec.error = "instance: " + gen_error[t];
      return;
    }
    const RecoveryInstance& inst = instances[t];
    rec.lambda = rec.nu * noise_norm[t];
    const auto loss = make_loss(inst);
    try {
      const RegularizedObjective obj(loss, rec.lambda, cfg.r);
      const AalResult a = aal_solve(obj, cfg.aal, init_spectral(inst, cfg.r));
      const Matrix x = a.fp.product();
      rec.aal_rmse = rmse(x, inst.m_star);
      rec.aal_rank = numerical_rank(x, cfg.rank_tol);
      rec.aal_iters = a.iterations;
      rec.aal_stop = to_string(a.stop);
    } catch (const std::exception& e) {
      rec.error = std::string("aal: ") + e.what();
      return;
    }
    try {
      ApgConfig ac = cfg.apg;
      ac.lambda = rec.lambda;
      const ApgResult p = apg_nuclear(*loss, ac);
      rec.apg_rmse = rmse(p.x, inst.m_star);
      rec.apg_rank = numerical_rank(p.x, cfg.rank_tol);
      rec.apg_iters = p.iterations;
      rec.apg_stop = to_string(p.stop);
    } catch (const std::exception& e) {
      rec.error = std::string("apg: ") + e.what();
    }
  });

  SweepResult out;
  out.trials = recs;
  for (size_t gi = 0; gi < grid.size(); ++gi) {
    SweepRow row;
    row.nu = grid[gi];
    for (int t = 0; t < trials; ++t) {
      const TrialRecord& rec = recs[gi * static_cast<size_t>(trials) + static_cast<size_t>(t)];
      if (!rec.error.empty()) continue;
      ++row.trials;
      row.lambda += rec.lambda;
      row.aal_rmse += rec.aal_rmse;
      row.apg_rmse += rec.apg_rmse;
      row.aal_rank += static_cast<double>(rec.aal_rank);
      row.apg_rank += static_cast<double>(rec.apg_rank);
    }
    if (row.trials > 0) {
      const double k = row.trials;
      row.lambda /= k;
      row.aal_rmse /= k;
      row.apg_rmse /= k;
      row.aal_rank /= k;
      row.apg_rank /= k;
    }
    out.rows.push_back(row);
  }
  return out;
}

// ---------------------------------------------------------- convergence

ConvergenceResult run_convergence(const ExperimentConfig& cfg) {
  const RecoveryInstance inst = generate_instance(cfg.n, cfg.m, cfg.r_star, cfg.op, cfg.noise, cfg.seed);
  ConvergenceResult out;
  out.lambda = lambda_from_rule(cfg.lambda_rule, inst);
  const RegularizedObjective obj(make_loss(inst), out.lambda, cfg.r);
  AalConfig ac = cfg.aal;
  ac.record_trace = true;
  out.aal = aal_solve(obj, ac, init_spectral(inst, cfg.r));
  std::vector<double> it, ld;
  for (const auto& rec : out.aal.trace)
    if (rec.dist_to_final >= out.window_lo && rec.dist_to_final <= out.window_hi) {
      it.push_back(rec.iter);
      ld.push_back(std::log10(rec.dist_to_final));
    }
  out.fit = fit_line(it, ld);
  out.reliable = out.fit.count >= 10;
  out.final_rmse = rmse(out.aal.fp.product(), inst.m_star);
  return out;
}

// --------------------------------------------------------------- verify

namespace {

Check failed_check(const std::string& id, const std::string& what) {
  Check c;
  c.id = id;
  c.lhs = 1.0;
  c.rhs = 0.0;
  c.verdict = Verdict::kFail;
  c.margin = -1.0;
  c.notes = "audit raised an error: " + what;
  return c;
}

template <class F>
void guarded(TheoryReport& rep, const std::string& id, F&& body) {
  try {
    body();
  } catch (const std::exception& e) {
    rep.add(failed_check(id, e.what()));
  }
}

void prefix_ids(TheoryReport& rep, const std::string& suffix) {
  for (auto& c : rep.checks) c.id += suffix;
}

}  // namespace

TheoryReport run_verify(const ExperimentConfig& cfg) {
  TheoryReport rep;
  const VerifySettings& vs = cfg.verify;
  AalConfig tight = cfg.aal;
  tight.record_trace = false;

  // Noisy instance shared by the balance, critical-inequality, xi-identity and error-bound audits.
  RecoveryInstance inst;
  FactorPair fp;
  double lambda = 0.0;
  bool have_main = false;
  guarded(rep, "verify.main-solve", [&] {
    inst = generate_instance(cfg.n, cfg.m, cfg.r_star, cfg.op, cfg.noise, cfg.seed);
    lambda = lambda_from_rule(cfg.lambda_rule, inst);
    const RegularizedObjective obj(make_loss(inst), lambda, cfg.r);
    fp = aal_solve(obj, tight, init_spectral(inst, cfg.r)).fp;
    have_main = true;
  });

  if (have_main) {
    guarded(rep, "balance", [&] {
      TheoryReport b = balance_audit(fp);
      prefix_ids(b, ".main");
      rep.append(b);
    });
  }

  guarded(rep, "diag_critical", [&] {
    const Index n = vs.crit_n;
    Vector d(n);
    const double head[] = {10.0, 8.0, 6.0, 3.0, 2.0, 1.0};
    for (Index i = 0; i < n; ++i) d(i) = i < 6 ? head[i] : std::ldexp(1.0, -static_cast<int>(i - 5));
    const DiagonalObjective diag(d, n, n, 4.0, 5);
    Rng rng(derive_seed(cfg.seed, 11));
    const FactorPair start(0.1 * gaussian_matrix(n, 5, rng), 0.1 * gaussian_matrix(n, 5, rng));
    const FactorPair out = aal_solve(diag.objective(), tight, start).fp;
    rep.add(diag_critical_audit(out, diag.sigma_matrix(), diag.lambda));
    TheoryReport b = balance_audit(out);
    prefix_ids(b, ".diag");
    rep.append(b);
  });

  guarded(rep, "fullobs", [&] {
    const Index n = vs.diag_n;
    Vector s(n);
    for (Index i = 0; i < n; ++i) s(i) = 1.0 + 0.5 * static_cast<double>(n - 1 - i);
    const double lam = 0.5 * s(4);
    const DiagonalObjective diag(s, n, n, lam, 5);
    const FullObsOptimum opt = global_set_fullobs(diag);
    const FactorPair out =
        aal_solve(diag.objective(), tight, init_spectral(diag.sigma_matrix(), 5)).fp;
    const double val = phi_value(diag.objective(), out);
    Check c1;
    c1.id = "fullobs.objective";
    c1.lhs = std::abs(val - opt.value) / std::abs(opt.value);
    c1.rhs = 1e-8;
    c1.metrics["objective"] = val;
    c1.metrics["optimum"] = opt.value;
    c1.finalize();
    rep.add(c1);
    Check c2;
    c2.id = "fullobs.product";
    const Matrix xa = opt.minimizer.product();
    c2.lhs = (out.product() - xa).norm();
    c2.rhs = 1e-6 * xa.norm();
    c2.finalize();
    rep.add(c2);
    TheoryReport b = balance_audit(out);
    prefix_ids(b, ".fullobs");
    rep.append(b);
  });

  if (have_main) {
    SpectrumEstimate spec;
    guarded(rep, "spectrum", [&] {
      spec = estimate_restricted_spectrum(*inst.op, 4 * cfg.r_star, 200, derive_seed(cfg.seed, 12));
    });
    guarded(rep, "restricted-isometry", [&] {
      const auto loss = make_loss(inst);
      rep.add(restricted_isometry_audit(*loss, spec, 2 * cfg.r_star, 100, derive_seed(cfg.seed, 13)));
    });
    guarded(rep, "critical-inequality", [&] { rep.append(critical_inequality_audit(inst, fp, lambda, spec)); });
    guarded(rep, "xi-identity", [&] { rep.append(xi_identity_audit(inst, fp, lambda, spec)); });
    guarded(rep, "error_bound", [&] { rep.append(error_bound_audit(inst, fp, lambda, spec)); });
  }

  guarded(rep, "kl_probe", [&] {
    const Index n = vs.kl_n;
    Vector s(n);
    const double head[] = {10.0, 10.0, 7.0, 7.0, 4.0};
    for (Index i = 0; i < n; ++i) s(i) = i < 5 ? head[i] : 1.0 * std::pow(0.9, static_cast<double>(i - 5));
    const std::pair<const char*, double> cases[] = {{".k0", 12.0}, {".k1", 8.5}, {".ks", 2.0}};
    std::uint64_t stream = 20;
    for (const auto& [suffix, lam] : cases) {
      const DiagonalObjective diag(s, n, n, lam, 5);
      KlProbeOptions opt;
      opt.samples = vs.kl_samples;
      opt.seed = derive_seed(cfg.seed, stream++);
      Check c = kl_probe(diag, global_set_fullobs(diag).minimizer, opt);
      c.id += suffix;
      rep.add(c);
    }
  });

  guarded(rep, "counterexample", [&] {
    rep.append(counterexample_report(
        counterexample_sequence(vs.example_a, vs.example_lambda, vs.counterexample_k_max)));
  });

  guarded(rep, "equivalence", [&] {
    OperatorSpec os;
    os.kind = OperatorKind::kGaussianSensing;
    os.p = vs.equiv_p;
    os.scaling = cfg.op.kind == OperatorKind::kGaussianSensing ? cfg.op.scaling : LossScaling::kPerMeasurement;
    const RecoveryInstance ei = generate_instance(vs.equiv_n, vs.equiv_n, vs.equiv_r_star, os,
                                                  NoiseSpec::relative(0.1), derive_seed(cfg.seed, 30));
    const double lam = vs.equiv_lambda_factor * noise_adjoint_norm(ei);
    const auto loss = make_loss(ei);
    const Index r = 3 * vs.equiv_r_star;
    const AalResult a = aal_solve(RegularizedObjective(loss, lam, r), tight, init_spectral(ei, r));
    ApgConfig pc = cfg.apg;
    pc.lambda = lam;
    const ApgResult p = apg_nuclear(*loss, pc);
    rep.append(equivalence_audit(*loss, p.x, a.fp, lam,
                                 a.stop == StopReason::kConverged && p.stop == StopReason::kConverged));
  });
  return rep;
}

// -------------------------------------------------------------- outputs

void emit_plot_data(const SweepResult& res, const std::string& path, const std::string& header) {
  std::ofstream out = open_out(path);
  out << header << '\n' << "nu,lambda,aal_rmse,apg_rmse,aal_rank,apg_rank,trials\n";
  for (const auto& r : res.rows)
    out << format_double(r.nu) << ',' << format_double(r.lambda) << ',' << format_double(r.aal_rmse)
        << ',' << format_double(r.apg_rmse) << ',' << format_double(r.aal_rank) << ','
        << format_double(r.apg_rank) << ',' << r.trials << '\n';
  close_out(out, path);
}

void emit_plot_data(const SolverTrace& trace, const std::string& path, const std::string& header) {
  std::ofstream out = open_out(path);
  out << header << '\n' << "iter,res1,res2,dist_to_final,log10_dist_to_final\n";
  for (const auto& r : trace)
    out << r.iter << ',' << format_double(r.res1) << ',' << format_double(r.res2) << ','
        << format_double(r.dist_to_final) << ','
        << format_double(r.dist_to_final > 0.0 ? std::log10(r.dist_to_final)
                                               : -std::numeric_limits<double>::infinity())
        << '\n';
  close_out(out, path);
}

std::vector<std::string> write_sweep_outputs(const ExperimentConfig& cfg, const SweepResult& res) {
  ensure_dir(cfg.output_dir);
  const std::string header = output_header(cfg);
  const std::string fig = join_path(cfg.output_dir, "fig1.csv");
  emit_plot_data(res, fig, header);

  const std::string tpath = join_path(cfg.output_dir, "trials.csv");
  {
    std::ofstream out = open_out(tpath);
    out << header << '\n'
        << "nu,trial,seed,lambda,aal_rmse,apg_rmse,aal_rank,apg_rank,aal_iters,apg_iters,aal_stop,"
           "apg_stop,error\n";
    for (const auto& t : res.trials) {
      std::string err = t.error;
      std::replace(err.begin(), err.end(), ',', ';');
      std::replace(err.begin(), err.end(), '\n', ' ');
      out << format_double(t.nu) << ',' << t.trial << ',' << t.seed << ',' << format_double(t.lambda)
          << ',' << format_double(t.aal_rmse) << ',' << format_double(t.apg_rmse) << ','
          << t.aal_rank << ',' << t.apg_rank << ',' << t.aal_iters << ',' << t.apg_iters << ','
          << t.aal_stop << ',' << t.apg_stop << ',' << err << '\n';
    }
    close_out(out, tpath);
  }

  const std::string jpath = join_path(cfg.output_dir, "sweep.json");
  {
    json j;
    j["version"] = version_string();
    j["config_hash"] = config_hash(cfg);
    j["config"] = config_json(cfg);
    json rows = json::array();
    for (const auto& r : res.rows)
      rows.push_back({{"nu", r.nu},
                      {"lambda", number(r.lambda)},
                      {"aal_rmse", number(r.aal_rmse)},
                      {"apg_rmse", number(r.apg_rmse)},
                      {"aal_rank", number(r.aal_rank)},
                      {"apg_rank", number(r.apg_rank)},
                      {"trials", r.trials}});
    j["rows"] = rows;
    std::ofstream out = open_out(jpath);
    out << j.dump(2) << '\n';
    close_out(out, jpath);
  }
  return {fig, tpath, jpath};
}

std::vector<std::string> write_convergence_outputs(const ExperimentConfig& cfg,
                                                   const ConvergenceResult& res) {
  ensure_dir(cfg.output_dir);
  const std::string header = output_header(cfg);
  const std::string tpath = join_path(cfg.output_dir, "trace.csv");
  {
    std::ofstream out = open_out(tpath);
    out << header << '\n';
    write_trace_csv(out, res.aal.trace);
    close_out(out, tpath);
  }
  const std::string fig = join_path(cfg.output_dir, "fig2.csv");
  emit_plot_data(res.aal.trace, fig, header);
  const std::string jpath = join_path(cfg.output_dir, "fit.json");
  {
    json j;
    j["version"] = version_string();
    j["config_hash"] = config_hash(cfg);
    j["config"] = config_json(cfg);
    j["lambda"] = res.lambda;
    j["iterations"] = res.aal.iterations;
    j["stop"] = to_string(res.aal.stop);
    j["lf"] = res.aal.lf;
    j["objective"] = number(res.aal.objective);
    j["final_rmse"] = number(res.final_rmse);
    j["fit"] = fit_json(res.fit);
    j["fit"]["window"] = {res.window_lo, res.window_hi};
    j["fit"]["reliable"] = res.reliable;
    std::ofstream out = open_out(jpath);
    out << j.dump(2) << '\n';
    close_out(out, jpath);
  }
  return {tpath, fig, jpath};
}

std::vector<std::string> write_verify_outputs(const ExperimentConfig& cfg, const TheoryReport& rep) {
  ensure_dir(cfg.output_dir);
  const std::string path = join_path(cfg.output_dir, "report.json");
  std::ofstream out = open_out(path);
  out << report_to_json(rep, config_hash(cfg), version_string());
  close_out(out, path);
  return {path};
}

std::vector<std::string> write_counterexample_outputs(const ExperimentConfig& cfg,
                                                      const CounterexampleResult& res) {
  ensure_dir(cfg.output_dir);
  const std::string header = output_header(cfg);
  const std::string cpath = join_path(cfg.output_dir, "counterexample.csv");
  {
    std::ofstream out = open_out(cpath);
    out << header << '\n' << "k,gap,grad_sq,ratio\n";
    for (const auto& p : res.points)
      out << p.k << ',' << format_double(p.gap) << ',' << format_double(p.grad_sq) << ','
          << format_double(p.ratio) << '\n';
    close_out(out, cpath);
  }
  const std::string jpath = join_path(cfg.output_dir, "counterexample.json");
  {
    json j = json::parse(report_to_json(counterexample_report(res), config_hash(cfg), version_string()));
    j["a"] = res.a;
    j["lambda"] = res.lambda;
    j["base_value"] = res.base_value;
    j["gap_fit"] = fit_json(res.gap_fit);
    j["grad_fit"] = fit_json(res.grad_fit);
    std::ofstream out = open_out(jpath);
    out << j.dump(2) << '\n';
    close_out(out, jpath);
  }
  return {cpath, jpath};
}

std::vector<std::vector<double>> read_csv_numbers(const std::string& path,
                                                  std::vector<std::string>* header) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!have_header) {
      have_header = true;
      if (header) *header = cells;
      continue;
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      row.push_back(end == c.c_str() ? std::numeric_limits<double>::quiet_NaN() : v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace lowrank
