#pragma once

#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "curvature.hpp"
#include "errors.hpp"
#include "graph.hpp"
#include "operators.hpp"
#include "report.hpp"

namespace curvegraph {

// Sidecar measure: {"measure": {"vertex": value, ...}}. Vertices left out
// keep their current measure; unknown names are an error.
inline WeightedGraph apply_measure_sidecar(const WeightedGraph& g, std::istream& in) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::parse_error, std::string("measure sidecar is not valid JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("measure") || !j["measure"].is_object())
    fail(ErrorCode::parse_error, "measure sidecar needs an object under \"measure\"");
  std::vector<double> mu(g.measures().begin(), g.measures().end());
  for (const auto& [name, value] : j["measure"].items()) {
    if (!value.is_number()) fail(ErrorCode::invalid_measure, "measure of '" + name + "' is not a number");
    mu[g.index_of(name)] = value.get<double>();
  }
  return with_custom_measure(g, std::move(mu));
}

inline WeightedGraph apply_measure_sidecar_file(const WeightedGraph& g, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open measure sidecar '" + path + "'");
  return apply_measure_sidecar(g, in);
}

// Vertex function file: "vertex<TAB>value" per line, '#' comments. Vertices
// not listed stay undefined.
inline VertexFunction load_function(const WeightedGraph& g, std::istream& in) {
  std::vector<double> values(g.size(), 0.0);
  std::vector<char> defined(g.size(), 0);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string name, text, extra;
    if (!(fields >> name >> text) || (fields >> extra))
      fail(ErrorCode::parse_error, "line " + std::to_string(lineno) + ": expected 'vertex<TAB>value'");
    double v = 0.0;
    try {
      std::size_t used = 0;
      v = std::stod(text, &used);
      if (used != text.size()) throw std::invalid_argument(text);
    } catch (const std::exception&) {
      fail(ErrorCode::parse_error, "line " + std::to_string(lineno) + ": bad value '" + text + "'");
    }
    const auto x = g.index_of(name);
    values[x] = v;
    defined[x] = 1;
  }
  return VertexFunction(std::move(values), std::move(defined));
}

inline VertexFunction load_function_file(const WeightedGraph& g, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open function file '" + path + "'");
  return load_function(g, in);
}

inline nlohmann::json to_json(const GraphMetrics& m) {
  nlohmann::json j;
  j["vertices"] = m.vertices;
  j["edges"] = m.edges;
  j["loops"] = m.loops;
  j["d_mu"] = detail::number(m.d_mu);
  j["omega_min"] = detail::number(m.omega_min);
  j["mu_min"] = detail::number(m.mu_min);
  j["mu_max"] = detail::number(m.mu_max);
  j["total_measure"] = detail::number(m.total_measure);
  j["alpha_max"] = detail::number(m.alpha_max);
  j["all_loops"] = m.all_loops;
  j["diameter_hops"] = m.hop_diameter;
  return j;
}

// {vertex, flavor, n, K_estimate, residual, witness: {vertex: value}, telemetry}.
// K_estimate is an upper bound on the best constant.
inline nlohmann::json to_json(const CurvatureEstimate& e, const WeightedGraph& g) {
  nlohmann::json j;
  j["vertex"] = g.name(e.vertex);
  j["flavor"] = to_string(e.flavor);
  j["n"] = detail::number(e.dimension);
  j["K_estimate"] = detail::number(e.k_estimate);
  j["K_estimate_kind"] = "upper bound";
  j["residual"] = detail::number(e.residual);
  nlohmann::json w = nlohmann::json::object();
  for (VertexId x = 0; x < e.witness.size(); ++x)
    if (e.witness.is_defined(x)) w[g.name(x)] = detail::number(e.witness[x]);
  j["witness"] = w;
  j["telemetry"] = {{"starts_used", e.starts_used},
                    {"converged_fraction", detail::number(e.converged_fraction)},
                    {"gradient_norm", detail::number(e.gradient_norm)}};
  return j;
}

}  // namespace curvegraph
