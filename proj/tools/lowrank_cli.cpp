// lowrank command-line interface.
//
//   lowrank gen            --config cfg.json [--seed S] [--out DIR]
//   lowrank solve-aal      --instance DIR (--lambda L | --nu NU) [--rank R] [--config cfg.json] --out DIR
//   lowrank solve-apg      --instance DIR (--lambda L | --nu NU) [--config cfg.json] --out DIR
//   lowrank sweep          --config cfg.json [--seed S] [--out DIR]
//   lowrank convergence    --config cfg.json [--seed S] [--out DIR]
//   lowrank verify         --config cfg.json [--seed S] [--out DIR]
//   lowrank counterexample [--config cfg.json] [--out DIR]
//
// LOWRANK_THREADS sets the worker-thread count.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "lowrank/experiments.hpp"
#include "lowrank/instance_io.hpp"
#include "lowrank/kernels.hpp"

using namespace lowrank;
using json = nlohmann::ordered_json;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

ExperimentConfig resolve(const Common& c, ExperimentKind kind) {
  ExperimentConfig cfg = c.config.empty() ? default_config(kind) : load_config(c.config);
  if (cfg.kind != kind)
    throw Error("config experiment '" + to_string(cfg.kind) + "' does not match command '" +
                to_string(kind) + "'");
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) cfg.output_dir = c.out;
  return cfg;
}

void add_common(CLI::App* sub, Common& c, bool config_required) {
  auto* opt = sub->add_option("--config", c.config, "JSON experiment config");
  if (config_required) opt->required()->check(CLI::ExistingFile);
  else opt->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "override the config seed");
  sub->add_option("--out", c.out, "output directory (overrides output_dir)");
}

void print_files(const std::vector<std::string>& files) {
  for (const auto& f : files) std::cout << "wrote " << f << "\n";
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw Error("write failed for '" + path + "'");
}

struct SolveArgs {
  std::string instance;
  std::optional<double> lambda;
  std::optional<double> nu;
  std::optional<Index> rank;
  std::string config;
  std::string out;
};

double solve_lambda(const SolveArgs& a, const RecoveryInstance& inst) {
  if (a.lambda.has_value() == a.nu.has_value()) throw Error("give exactly one of --lambda and --nu");
  if (a.lambda) return *a.lambda;
  return lambda_from_rule({LambdaRule::Kind::kNuTimesNoise, *a.nu, 1}, inst);
}

int run_gen(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? default_config(ExperimentKind::kRmseSweep) : load_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  const std::string dir = c.out.empty() ? cfg.output_dir : c.out;
  const RecoveryInstance inst = generate_instance(cfg.n, cfg.m, cfg.r_star, cfg.op, cfg.noise, cfg.seed);
  save_instance(inst, dir);
  std::cout << "wrote instance " << dir << " (n=" << inst.n() << " m=" << inst.m()
            << " rank=" << inst.rank << " p=" << inst.op->measurements() << ")\n";
  return 0;
}

int run_solve_aal(const SolveArgs& a) {
  const RecoveryInstance inst = load_instance(a.instance);
  AalConfig ac = a.config.empty() ? default_config(ExperimentKind::kRmseSweep).aal : load_config(a.config).aal;
  ac.record_trace = true;
  const Index r = a.rank.value_or(3 * inst.rank);
  const double lambda = solve_lambda(a, inst);
  const RegularizedObjective obj(make_loss(inst), lambda, r);
  const AalResult res = aal_solve(obj, ac, init_spectral(inst, r));

  std::filesystem::create_directories(a.out);
  const auto path = [&](const char* name) { return (std::filesystem::path(a.out) / name).string(); };
  save_matrix(path("U.txt"), res.fp.U);
  save_matrix(path("V.txt"), res.fp.V);
  {
    std::ofstream tr(path("trace.csv"), std::ios::binary);
    if (!tr) throw Error("cannot open '" + path("trace.csv") + "' for writing");
    write_trace_csv(tr, res.trace);
  }
  const Matrix x = res.fp.product();
  json j;
  j["version"] = version_string();
  j["solver"] = "aal";
  j["lambda"] = lambda;
  j["r"] = r;
  j["lf"] = res.lf;
  j["schedule"] = to_string(ac.schedule);
  j["iterations"] = res.iterations;
  j["stop"] = to_string(res.stop);
  j["objective"] = res.objective;
  j["res1"] = res.res1;
  j["res2"] = res.res2;
  j["rank"] = numerical_rank(x);
  j["rmse"] = rmse(x, inst.m_star);
  write_text(path("result.json"), j.dump(2) + "\n");
  std::cout << "aal: " << to_string(res.stop) << " after " << res.iterations << " iterations, rmse "
            << j["rmse"].get<double>() << ", rank " << j["rank"].get<Index>() << "\n";
  return 0;
}

int run_solve_apg(const SolveArgs& a) {
  const RecoveryInstance inst = load_instance(a.instance);
  ApgConfig pc = a.config.empty() ? default_config(ExperimentKind::kRmseSweep).apg : load_config(a.config).apg;
  pc.lambda = solve_lambda(a, inst);
  const auto loss = make_loss(inst);
  const ApgResult res = apg_nuclear(*loss, pc);

  std::filesystem::create_directories(a.out);
  const auto path = [&](const char* name) { return (std::filesystem::path(a.out) / name).string(); };
  save_matrix(path("X.txt"), res.x);
  json j;
  j["version"] = version_string();
  j["solver"] = "apg";
  j["lambda"] = pc.lambda;
  j["step"] = res.step;
  j["iterations"] = res.iterations;
  j["restarts"] = res.restarts;
  j["stop"] = to_string(res.stop);
  j["objective"] = res.final_objective;
  j["rank"] = numerical_rank(res.x);
  j["rmse"] = rmse(res.x, inst.m_star);
  write_text(path("result.json"), j.dump(2) + "\n");
  std::cout << "apg: " << to_string(res.stop) << " after " << res.iterations << " iterations, rmse "
            << j["rmse"].get<double>() << ", rank " << j["rank"].get<Index>() << "\n";
  return 0;
}

int run_sweep(const Common& c) {
  const ExperimentConfig cfg = resolve(c, ExperimentKind::kRmseSweep);
  const SweepResult res = run_rmse_sweep(cfg);
  for (const auto& t : res.trials)
    if (!t.error.empty()) std::cerr << "trial nu=" << t.nu << " #" << t.trial << " failed: " << t.error << "\n";
  std::cout << "nu,lambda,aal_rmse,apg_rmse,aal_rank,apg_rank,trials\n";
  for (const auto& r : res.rows)
    std::cout << r.nu << "," << r.lambda << "," << r.aal_rmse << "," << r.apg_rmse << "," << r.aal_rank
              << "," << r.apg_rank << "," << r.trials << "\n";
  print_files(write_sweep_outputs(cfg, res));
  return 0;
}

int run_convergence_cmd(const Common& c) {
  const ExperimentConfig cfg = resolve(c, ExperimentKind::kConvergence);
  const ConvergenceResult res = run_convergence(cfg);
  std::cout << "aal: " << to_string(res.aal.stop) << " after " << res.aal.iterations
            << " iterations; fit slope " << res.fit.slope << " r2 " << res.fit.r2 << " over "
            << res.fit.count << " points" << (res.reliable ? "" : " (unreliable)") << "\n";
  print_files(write_convergence_outputs(cfg, res));
  return 0;
}

int run_verify_cmd(const Common& c) {
  const ExperimentConfig cfg = resolve(c, ExperimentKind::kVerify);
  const TheoryReport rep = run_verify(cfg);
  for (const auto& ch : rep.checks)
    std::cout << to_string(ch.verdict) << "  " << ch.id << "  lhs=" << ch.lhs << " rhs=" << ch.rhs
              << (ch.notes.empty() ? "" : "  (" + ch.notes + ")") << "\n";
  print_files(write_verify_outputs(cfg, rep));
  return rep.applicable_pass() ? 0 : 1;
}

int run_counterexample_cmd(const Common& c) {
  const ExperimentConfig cfg = resolve(c, ExperimentKind::kCounterexample);
  const CounterexampleResult res = counterexample_sequence(cfg.ce_a, cfg.ce_lambda, cfg.ce_k_max);
  const TheoryReport rep = counterexample_report(res);
  std::cout << "gap slope " << res.gap_fit.slope << ", grad^2 slope " << res.grad_fit.slope << "\n";
  for (const auto& ch : rep.checks) std::cout << to_string(ch.verdict) << "  " << ch.id << "\n";
  print_files(write_counterexample_outputs(cfg, res));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regularized low-rank factorization: solvers, experiments and audits"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_string());

  Common gen, sweep, conv, verify, ce;
  SolveArgs aal, apg;

  add_common(app.add_subcommand("gen", "generate and save a recovery instance"), gen, false);
  add_common(app.add_subcommand("sweep", "lambda sweep: RMSE and rank against nu"), sweep, false);
  add_common(app.add_subcommand("convergence", "AAL convergence trace and log-linear fit"), conv, false);
  add_common(app.add_subcommand("verify", "theory audits; exit 1 if an applicable check fails"), verify,
             false);
  add_common(app.add_subcommand("counterexample", "repeated-value sequence and slope fits"), ce, false);

  for (auto [name, args] : {std::pair{"solve-aal", &aal}, std::pair{"solve-apg", &apg}}) {
    auto* sub = app.add_subcommand(name, std::string("solve a saved instance with ") +
                                             (args == &aal ? "AAL" : "APG"));
    sub->add_option("--instance", args->instance, "instance directory")->required();
    auto* l = sub->add_option("--lambda", args->lambda, "regularization parameter");
    auto* nu = sub->add_option("--nu", args->nu, "lambda = nu * ||grad f(M*)||");
    l->excludes(nu);
    if (args == &aal) sub->add_option("--rank", args->rank, "factor width r (default 3 rank)");
    sub->add_option("--config", args->config, "JSON config supplying solver settings")
        ->check(CLI::ExistingFile);
    sub->add_option("--out", args->out, "output directory")->required();
  }

  CLI11_PARSE(app, argc, argv);

  kernels::set_worker_threads(kernels::threads_from_env());

  try {
    if (app.got_subcommand("gen")) return run_gen(gen);
    if (app.got_subcommand("solve-aal")) return run_solve_aal(aal);
    if (app.got_subcommand("solve-apg")) return run_solve_apg(apg);
    if (app.got_subcommand("sweep")) return run_sweep(sweep);
    if (app.got_subcommand("convergence")) return run_convergence_cmd(conv);
    if (app.got_subcommand("verify")) return run_verify_cmd(verify);
    if (app.got_subcommand("counterexample")) return run_counterexample_cmd(ce);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
