#include "lowrank/instance_io.hpp"

#include <filesystem>
#include <fstream>

#include "json.hpp"

namespace lowrank {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json noise_to_json(const RecoveryInstance& inst) {
  json j;
  j["kind"] = "gaussian";
  j["calibration"] = inst.noise.calibration == NoiseSpec::Calibration::kRelative ? "relative" : "absolute";
  j["sigma"] = inst.noise.sigma;
  j["ratio"] = inst.noise.ratio;
  j["sigma_omega"] = inst.sigma_omega;
  return j;
}

}  // namespace

void save_instance(const RecoveryInstance& inst, const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create directory " + dir + ": " + ec.message());

  json meta;
  meta["n"] = inst.n();
  meta["m"] = inst.m();
  meta["rank"] = inst.rank;
  meta["p"] = inst.op->measurements();
  meta["seed"] = inst.seed;
  meta["noise"] = noise_to_json(inst);
  json op;
  op["kind"] = to_string(inst.op->kind());
  op["loss_scale"] = inst.op->loss_scale();

  const fs::path base(dir);
  save_matrix((base / "m_star.txt").string(), inst.m_star);
  save_vector((base / "y.txt").string(), inst.y);
  save_vector((base / "omega.txt").string(), inst.omega);

  if (auto* g = dynamic_cast<const GaussianSensing*>(inst.op.get())) {
    op["scaling"] = to_string(g->scaling());
    save_matrix((base / "measurements.txt").string(), g->measurement_matrix());
  } else if (auto* w = dynamic_cast<const WeightedHadamard*>(inst.op.get())) {
    save_matrix((base / "weights.txt").string(), w->weights());
  } else if (auto* k = dynamic_cast<const BernoulliMask*>(inst.op.get())) {
    save_matrix((base / "mask.txt").string(), k->mask());
  }
  meta["operator"] = op;

  const std::string path = (base / "instance.json").string();
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path + " for writing");
  os << meta.dump(2) << '\n';
}

RecoveryInstance load_instance(const std::string& dir) {
  const fs::path base(dir);
  const std::string path = (base / "instance.json").string();
  std::ifstream is(path);
  if (!is) throw Error("cannot open " + path);
  json meta;
  try {
    is >> meta;
  } catch (const json::exception& e) {
    throw Error(path + ": " + e.what());
  }

  RecoveryInstance inst;
  const Index n = meta.at("n").get<Index>();
  const Index m = meta.at("m").get<Index>();
  inst.rank = meta.at("rank").get<Index>();
  inst.seed = meta.at("seed").get<std::uint64_t>();
  const json& noise = meta.at("noise");
  inst.noise.calibration = noise.at("calibration").get<std::string>() == "relative"
                               ? NoiseSpec::Calibration::kRelative
                               : NoiseSpec::Calibration::kAbsolute;
  inst.noise.sigma = noise.at("sigma").get<double>();
  inst.noise.ratio = noise.at("ratio").get<double>();
  inst.sigma_omega = noise.at("sigma_omega").get<double>();

  inst.m_star = load_matrix((base / "m_star.txt").string());
  inst.y = load_vector((base / "y.txt").string());
  inst.omega = load_vector((base / "omega.txt").string());
  if (inst.m_star.rows() != n || inst.m_star.cols() != m)
    throw Error(dir + ": m_star.txt does not match the recorded dimensions");

  const json& op = meta.at("operator");
  inst.op_spec.kind = operator_kind_from_string(op.at("kind").get<std::string>());
  switch (inst.op_spec.kind) {
    case OperatorKind::kFullObservation:
      inst.op = make_full_observation(n, m);
      break;
    case OperatorKind::kGaussianSensing: {
      inst.op_spec.scaling = loss_scaling_from_string(op.at("scaling").get<std::string>());
      RowMajorMatrix a = load_matrix((base / "measurements.txt").string());
      inst.op_spec.p = a.rows();
      inst.op = std::make_shared<GaussianSensing>(n, m, std::move(a), inst.op_spec.scaling);
      break;
    }
    case OperatorKind::kWeightedHadamard:
      inst.op = make_weighted_hadamard(load_matrix((base / "weights.txt").string()));
      break;
    case OperatorKind::kBernoulliMask:
      inst.op = std::make_shared<BernoulliMask>(load_matrix((base / "mask.txt").string()));
      break;
  }
  if (inst.y.size() != inst.op->measurements() || inst.omega.size() != inst.op->measurements())
    throw Error(dir + ": observation length does not match the operator");
  return inst;
}

}  // namespace lowrank
