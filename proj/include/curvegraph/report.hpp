#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

namespace curvegraph {

// Running min / max / mean of the residuals of a one-sided check. Residuals
// are oriented so that a satisfied inequality gives a nonnegative value.
struct ResidualStats {
  double min = std::numeric_limits<double>::infinity();
  double max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  std::size_t count = 0;

  void add(double r) {
    min = std::min(min, r);
    max = std::max(max, r);
    sum += r;
    ++count;
  }
  double mean() const { return count ? sum / static_cast<double>(count) : 0.0; }
};

// One line of the residual CSV. key is a vertex, a pair "x|y" or a label;
// param is t, r or n depending on the check.
struct ResidualRow {
  std::string key;
  double param = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

struct EstimateReport {
  std::string kind;
  std::map<std::string, double> params;
  std::map<std::string, std::string> labels;  // non-numeric parameters and annotations
  std::map<std::string, double> constants;
  ResidualStats residuals;
  double tolerance = 0.0;
  std::size_t samples = 0;
  bool pass = false;
  std::vector<std::string> diagnostics;
  std::vector<ResidualRow> rows;

  // Records an inequality lhs <= rhs; the residual is rhs - lhs.
  void record(std::string key, double param, double lhs, double rhs) {
    record_residual(std::move(key), param, lhs, rhs, rhs - lhs);
  }
  void record_residual(std::string key, double param, double lhs, double rhs, double residual) {
    residuals.add(residual);
    ++samples;
    rows.push_back({std::move(key), param, lhs, rhs, residual});
  }
  // A diagnostic that makes the report fail regardless of the residuals.
  void violation(std::string message) {
    diagnostics.push_back(std::move(message));
    failed_ = true;
  }
  void note(std::string message) { diagnostics.push_back(std::move(message)); }
  bool violated() const noexcept { return failed_; }

  // pass <=> residual_min >= -tolerance and no violation was recorded.
  void finish() { pass = !failed_ && (residuals.count == 0 || residuals.min >= -tolerance); }

 private:
  bool failed_ = false;
};

namespace detail {
// JSON has no infinities or NaN; those become strings so nothing is lost.
inline nlohmann::json number(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}
}  // namespace detail

inline nlohmann::json to_json(const EstimateReport& r) {
  nlohmann::json j;
  j["kind"] = r.kind;
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : r.params) params[k] = detail::number(v);
  for (const auto& [k, v] : r.labels) params[k] = v;
  j["params"] = params;
  nlohmann::json res = nlohmann::json::object();
  if (r.residuals.count) {
    res["min"] = detail::number(r.residuals.min);
    res["max"] = detail::number(r.residuals.max);
    res["mean"] = detail::number(r.residuals.mean());
  } else {
    res["min"] = res["max"] = res["mean"] = nullptr;
  }
  j["residuals"] = res;
  nlohmann::json constants = nlohmann::json::object();
  for (const auto& [k, v] : r.constants) constants[k] = detail::number(v);
  j["constants"] = constants;
  j["tolerance"] = r.tolerance;
  j["samples"] = r.samples;
  j["pass"] = r.pass;
  j["diagnostics"] = r.diagnostics;
  return j;
}

inline void write_csv(std::ostream& out, const EstimateReport& r, const std::string& key_name = "vertex",
                      const std::string& param_name = "t") {
  out << key_name << ',' << param_name << ",lhs,rhs,residual\n";
  char buf[128];
  for (const auto& row : r.rows) {
    std::string key = row.key;
    if (key.find_first_of(",\"") != std::string::npos) {
      std::string quoted = "\"";
      for (char c : key) {
        if (c == '"') quoted += '"';
        quoted += c;
      }
      key = quoted + "\"";
    }
    std::snprintf(buf, sizeof buf, ",%.17g,%.17g,%.17g,%.17g\n", row.param, row.lhs, row.rhs, row.residual);
    out << key << buf;
  }
}

}  // namespace curvegraph
