// Structured results of numeric audits. Each check compares a left-hand side
// against a right-hand side (claim: lhs <= rhs) and records whether the
// premises it depends on were verified.

#pragma once

#include <limits>
#include <map>
#include <string>
#include <vector>

namespace lowrank {

enum class Verdict { kPass, kFail, kNotApplicable };

std::string to_string(Verdict v);

struct Premise {
  std::string name;
  bool verified = false;
  double value = std::numeric_limits<double>::quiet_NaN();
  std::string detail;
};

struct Check {
  std::string id;
  double lhs = std::numeric_limits<double>::quiet_NaN();
  double rhs = std::numeric_limits<double>::quiet_NaN();
  double margin = std::numeric_limits<double>::quiet_NaN();
  double tolerance = 0.0;
  Verdict verdict = Verdict::kNotApplicable;
  std::vector<Premise> premises;
  std::string notes;
  std::map<std::string, double> metrics;

  bool premises_verified() const;

  // margin = rhs - lhs; pass iff premises hold and margin >= -tolerance.
  void finalize();

  Check& premise(std::string name, bool ok, double value = std::numeric_limits<double>::quiet_NaN(),
                 std::string detail = {});
};

struct TheoryReport {
  std::vector<Check> checks;

  void add(Check c) { checks.push_back(std::move(c)); }
  void append(const TheoryReport& other);
  const Check* find(const std::string& id) const;

  // True when every check that is applicable passes.
  bool applicable_pass() const;
  std::size_t count(Verdict v) const;
};

// {"version", "config_hash", "checks": [{id, lhs, rhs, margin, verdict,
// premises: [...], notes, tolerance, metrics}]}.
std::string report_to_json(const TheoryReport& report, const std::string& config_hash,
                           const std::string& version);

}  // namespace lowrank
