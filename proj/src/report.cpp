#include "lowrank/report.hpp"

#include <cmath>

#include "json.hpp"

namespace lowrank {

using nlohmann::json;

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::kPass: return "pass";
    case Verdict::kFail: return "fail";
    case Verdict::kNotApplicable: return "not-applicable";
  }
  return "unknown";
}

bool Check::premises_verified() const {
  for (const auto& p : premises)
    if (!p.verified) return false;
  return true;
}

void Check::finalize() {
  margin = rhs - lhs;
  if (!premises_verified() || !std::isfinite(lhs) || !std::isfinite(rhs)) {
    verdict = Verdict::kNotApplicable;
    return;
  }
  verdict = margin >= -tolerance ? Verdict::kPass : Verdict::kFail;
}

Check& Check::premise(std::string name, bool ok, double value, std::string detail) {
  premises.push_back(Premise{std::move(name), ok, value, std::move(detail)});
  return *this;
}

void TheoryReport::append(const TheoryReport& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

const Check* TheoryReport::find(const std::string& id) const {
  for (const auto& c : checks)
    if (c.id == id) return &c;
  return nullptr;
}

bool TheoryReport::applicable_pass() const {
  for (const auto& c : checks)
    if (c.verdict == Verdict::kFail) return false;
  return true;
}

std::size_t TheoryReport::count(Verdict v) const {
  std::size_t k = 0;
  for (const auto& c : checks)
    if (c.verdict == v) ++k;
  return k;
}

namespace {

json number(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

}  // namespace

std::string report_to_json(const TheoryReport& report, const std::string& config_hash,
                           const std::string& version) {
  json root;
  root["version"] = version;
  root["config_hash"] = config_hash;
  json checks = json::array();
  for (const auto& c : report.checks) {
    json j;
    j["id"] = c.id;
    j["lhs"] = number(c.lhs);
    j["rhs"] = number(c.rhs);
    j["margin"] = number(c.margin);
    j["tolerance"] = number(c.tolerance);
    j["verdict"] = to_string(c.verdict);
    json premises = json::array();
    for (const auto& p : c.premises) {
      json pj;
      pj["name"] = p.name;
      pj["verified"] = p.verified;
      pj["value"] = number(p.value);
      if (!p.detail.empty()) pj["detail"] = p.detail;
      premises.push_back(pj);
    }
    j["premises"] = premises;
    j["notes"] = c.notes;
    if (!c.metrics.empty()) {
      json metrics = json::object();
      for (const auto& [k, v] : c.metrics) metrics[k] = number(v);
      j["metrics"] = metrics;
    }
    checks.push_back(j);
  }
  root["checks"] = checks;
  return root.dump(2) + "\n";
}

}  // namespace lowrank
