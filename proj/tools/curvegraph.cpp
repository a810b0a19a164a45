// Command line front end: loads a graph, runs one checker and writes a JSON
// report (plus an optional residual CSV).
//
// Exit status: 0 when every check passes, 2 when a check fails, 1 on bad
// input; input errors print a JSON error object.

#include <CLI11.hpp>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "curvegraph/curvegraph.hpp"

using namespace curvegraph;
using nlohmann::json;

namespace {

constexpr int exit_pass = 0;
constexpr int exit_input = 1;
constexpr int exit_check = 2;

struct Common {
  std::string graph;
  std::string measure = "unit";
  std::string measure_file;
  std::string out;
  std::string csv;
  std::uint64_t seed = 1;
};

struct Outcome {
  json report;
  bool pass = true;
  std::optional<EstimateReport> residuals;  // source of the CSV dump
  std::string key_name = "vertex";
  std::string param_name = "t";
};

struct Loaded {
  std::optional<WeightedGraph> graph;
  json info = nullptr;
};

Loaded load(const Common& c, bool required) {
  Loaded l;
  if (c.graph.empty()) {
    if (required) fail(ErrorCode::invalid_argument, "--graph is required for this command");
    return l;
  }
  auto g = load_graph_file(c.graph, parse_measure_mode(c.measure));
  if (!c.measure_file.empty()) g = apply_measure_sidecar_file(g, c.measure_file);
  l.info = {{"hash", content_hash(g)},
            {"vertices", g.size()},
            {"edges", g.edge_count()},
            {"measure", to_string(g.measure_mode())}};
  l.graph = std::move(g);
  return l;
}

// Residual reports of several runs folded into one.
EstimateReport combine(const std::vector<EstimateReport>& parts) {
  EstimateReport all = parts.front();
  bool ok = parts.front().pass;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    const auto& p = parts[i];
    ok = ok && p.pass;
    for (const auto& row : p.rows) all.record_residual(row.key, row.param, row.lhs, row.rhs, row.residual);
    for (const auto& d : p.diagnostics) all.diagnostics.push_back(d);
    for (const auto& [k, v] : p.constants) all.constants[k] = v;
  }
  all.pass = ok;
  return all;
}

Outcome from_report(const EstimateReport& r, std::string key = "vertex", std::string param = "t") {
  return {to_json(r), r.pass, r, std::move(key), std::move(param)};
}

VertexId vertex_or_first(const WeightedGraph& g, const std::string& name) {
  return name.empty() ? VertexId{0} : g.index_of(name);
}

std::vector<VertexId> vertices_or_all(const WeightedGraph& g, const std::vector<std::string>& names) {
  std::vector<VertexId> out;
  if (names.empty())
    for (VertexId x = 0; x < g.size(); ++x) out.push_back(x);
  for (const auto& n : names) out.push_back(g.index_of(n));
  return out;
}

// "a:b" (unit step), "a:b:step" or a comma list.
std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  auto number = [&](const std::string& s) {
    try {
      std::size_t used = 0;
      double v = std::stod(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    } catch (const std::exception&) {
      fail(ErrorCode::invalid_argument, "bad number '" + s + "' in grid '" + text + "'");
    }
  };
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3) fail(ErrorCode::invalid_argument, "grid must be a:b or a:b:step");
    const double a = number(parts[0]), b = number(parts[1]);
    const double step = parts.size() == 3 ? number(parts[2]) : 1.0;
    if (!(step > 0.0) || b < a) fail(ErrorCode::invalid_argument, "grid needs a <= b and a positive step");
    for (int k = 0; a + k * step <= b + 1e-9 * step; ++k) out.push_back(a + k * step);
    return out;
  }
  std::stringstream ss(text);
  for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
  if (out.empty()) fail(ErrorCode::invalid_argument, "empty grid");
  return out;
}

void require_positive(double v, const char* what) {
  if (!(v > 0.0)) fail(ErrorCode::invalid_argument, std::string(what) + " must be positive");
}

// f for the semigroup checks: a file, or delta_x smoothed by P_{0.01}.
struct FunctionSource {
  std::string file;
  std::string point_mass;
};

VertexFunction positive_data(const WeightedGraph& g, const FunctionSource& src) {
  if (!src.file.empty()) return load_function_file(g, src.file);
  std::vector<double> d(g.size(), 0.0);
  const auto x = vertex_or_first(g, src.point_mass);
  d[x] = 1.0 / g.measure(x);
  return VertexFunction(uniformized_apply(g, 0.01, d));
}

Hypothesis hypothesis(const WeightedGraph& g, bool certify, double n, double K, std::uint64_t seed) {
  if (!certify) return {};
  OptimizerOptions opt;
  opt.seed = seed;
  return check_cde_prime(g, n, K, opt);
}

// ---------------------------------------------------------------------------

Outcome run_metrics(const WeightedGraph& g) { return {to_json(graph_metrics(g)), true, std::nullopt}; }

struct CurvatureArgs {
  std::string flavor = "cde_prime";
  std::optional<double> n;
  std::string dim_grid;
  std::optional<double> K;
  int starts = 64;
  std::vector<std::string> vertices;
  double tolerance = 1e-7;
};

Outcome run_curvature(const WeightedGraph& g, const CurvatureArgs& a, std::uint64_t seed) {
  OptimizerOptions opt;
  opt.starts = a.starts;
  opt.seed = seed;
  if (a.starts < 1) fail(ErrorCode::invalid_argument, "--starts must be at least 1");
  require_positive(a.tolerance, "--tol");
  const auto flavor = parse_flavor(a.flavor);
  EstimateReport rows;
  rows.kind = "curvature";
  rows.tolerance = a.tolerance;
  Outcome out;
  out.param_name = "n";
  if (!a.dim_grid.empty()) {
    CertifyOptions c;
    c.flavor = flavor;
    c.tolerance = a.tolerance;
    c.optimizer = opt;
    auto cert = certify_nonnegative(g, parse_grid(a.dim_grid), c);
    json per = json::array();
    for (VertexId x = 0; x < g.size(); ++x) {
      auto e = to_json(cert.estimates[x], g);
      e["certified_n"] = cert.vertex_dimension[x] ? json(*cert.vertex_dimension[x]) : json("unbounded");
      per.push_back(e);
      rows.record(g.name(x), cert.estimates[x].dimension, -a.tolerance, cert.estimates[x].k_estimate);
    }
    json failed = json::array();
    for (auto v : cert.failed) failed.push_back(g.name(v));
    out.report = {{"kind", "curvature_certification"},
                  {"flavor", to_string(flavor)},
                  {"grid", cert.grid},
                  {"n0", cert.dimension ? json(*cert.dimension) : json("unbounded")},
                  {"failed", failed},
                  {"vertices", per}};
    out.pass = cert.dimension.has_value();
  } else {
    if (!a.n) fail(ErrorCode::invalid_argument, "curvature needs --n or --dim-grid");
    std::vector<CurvatureEstimate> est;
    const auto targets = vertices_or_all(g, a.vertices);
    est.resize(targets.size());
    parallel_for(targets.size(), [&](std::size_t i) { est[i] = optimal_k(g, targets[i], flavor, *a.n, opt); });
    json per = json::array();
    const double K = a.K.value_or(-INFINITY);
    for (const auto& e : est) {
      per.push_back(to_json(e, g));
      if (a.K) rows.record(g.name(e.vertex), e.dimension, K, e.k_estimate);
    }
    rows.finish();
    out.report = {{"kind", "curvature"}, {"flavor", to_string(flavor)}, {"n", *a.n}, {"vertices", per}};
    if (a.K) {
      out.report["K"] = *a.K;
      out.report["tolerance"] = a.tolerance;
      out.pass = rows.pass;
    }
  }
  out.report["pass"] = out.pass;
  out.residuals = rows;
  return out;
}

struct HeatArgs {
  std::string x, y;
  std::vector<double> times{0.1, 1.0, 3.0};
  double tolerance = 1e-8;
};

// Kernel values p(t, x, y), with the symmetry p(t, x, y) = p(t, y, x) as the
// recorded check and convergence of the exhaustion on truncations.
Outcome run_heat(const WeightedGraph& g, const HeatArgs& a) {
  require_positive(a.tolerance, "--tol");
  const auto x = vertex_or_first(g, a.x);
  const auto y = a.y.empty() ? x : g.index_of(a.y);
  HeatKernelOptions opt;
  opt.tolerance = a.tolerance;
  EstimateReport rep;
  rep.kind = "heat";
  rep.labels["x"] = g.name(x);
  rep.labels["y"] = g.name(y);
  rep.tolerance = 1e-10;
  const std::string key = g.name(x) + "|" + g.name(y);
  json values = json::array();
  for (double t : a.times) {
    require_positive(t, "time");
    auto pxy = heat_kernel(g, x, y, t, opt);
    auto pyx = heat_kernel(g, y, x, t, opt);
    rep.record_residual(key, t, pxy.value, pyx.value, -std::abs(pxy.value - pyx.value));
    values.push_back({{"t", t},
                      {"value", detail::number(pxy.value)},
                      {"exact", pxy.exact},
                      {"converged", pxy.converged},
                      {"radius", pxy.radius}});
    if (!pxy.converged) rep.violation("t=" + format_weight(t) + ": " + pxy.diagnostic);
  }
  rep.finish();
  auto out = from_report(rep, "pair");
  out.report["values"] = values;
  return out;
}

struct LiYauArgs {
  double n = 2.0, K = 0.0, b = 1.0;
  std::vector<double> T{0.25, 1.0, 4.0};
  double tolerance = 1e-9;
  bool certify = false;
  FunctionSource f;
};

Outcome run_liyau(const WeightedGraph& g, const LiYauArgs& a, std::uint64_t seed) {
  const auto f = positive_data(g, a.f);
  const auto hyp = hypothesis(g, a.certify, a.n, a.K, seed);
  std::vector<EstimateReport> parts;
  for (double T : a.T) parts.push_back(li_yau_check(g, f, T, a.n, a.K, a.b, a.tolerance, hyp));
  return from_report(combine(parts));
}

struct VariationalArgs {
  std::string schedule = "linear";
  double T = 1.0, tau = 0.5, n = 2.0, K = 0.0, b = 1.0;
  std::vector<double> times;
  double tolerance = 1e-8;
  bool certify = false;
  FunctionSource f;
};

Outcome run_variational(const WeightedGraph& g, const VariationalArgs& a, std::uint64_t seed) {
  require_positive(a.T, "--T");
  const auto f = positive_data(g, a.f);
  const auto hyp = hypothesis(g, a.certify, a.n, a.K, seed);
  if (a.schedule == "integrated")
    return from_report(integrated_variational_check(g, f, a.T, a.tau, a.n, a.tolerance, hyp));
  Schedule s;
  if (a.schedule == "linear")
    s = integration_schedule(a.T, a.tau, a.n);
  else if (a.schedule == "power")
    s = power_schedule(a.T, a.n, a.K, a.b);
  else
    fail(ErrorCode::invalid_argument, "unknown schedule '" + a.schedule + "' (linear, power or integrated)");
  auto times = a.times;
  if (times.empty())
    for (int k = 1; k <= 5; ++k) times.push_back(a.T * k / 6.0);
  VariationalOptions opt;
  opt.tolerance = a.tolerance;
  return from_report(variational_check(g, f, a.T, times, a.n, a.K, s, opt, hyp));
}

struct HarnackArgs {
  double n = 2.0;
  std::optional<double> D;
  std::size_t tuples = 200;
  double t_min = 0.1, t_max = 5.0;
  double tolerance = 1e-10;
  bool certify = false;
};

Outcome run_harnack(const WeightedGraph& g, const HarnackArgs& a, std::uint64_t seed) {
  const auto hyp = hypothesis(g, a.certify, a.n, 0.0, seed);
  auto tuples = random_harnack_tuples(g, a.tuples, seed, a.t_min, a.t_max);
  return from_report(harnack_check(g, a.n, a.D, tuples, a.tolerance, hyp), "tuple");
}

struct ExpIntArgs {
  std::string x;
  double r = 2.0, n = 2.0;
  double rho_target = 0.1;
};

Outcome run_expint(const WeightedGraph& g, const ExpIntArgs& a) {
  ExpIntegrabilityOptions opt;
  opt.rho_target = a.rho_target;
  return from_report(exp_integrability(g, vertex_or_first(g, a.x), a.r, a.n, opt), "vertex", "r");
}

struct DoublingArgs {
  double r_max = 8.0;
  std::vector<std::string> centers;
};

Outcome run_doubling(const WeightedGraph& g, const DoublingArgs& a) {
  return from_report(doubling_report(g, vertices_or_all(g, a.centers), a.r_max), "vertex", "r");
}

struct GaussianArgs {
  std::size_t n_max = 10;
  std::vector<std::string> centers;
};

Outcome run_gaussian(const WeightedGraph& g, const GaussianArgs& a) {
  GaussianFitOptions opt;
  if (!a.centers.empty()) opt.centers = vertices_or_all(g, a.centers);
  return from_report(gaussian_fit(g, a.n_max, opt), "pair", "n");
}

struct PoincareArgs {
  std::string x0;
  std::vector<double> radii{1.0, 2.0, 3.0};
};

Outcome run_poincare(const WeightedGraph& g, const PoincareArgs& a) {
  return from_report(poincare_constant(g, vertex_or_first(g, a.x0), a.radii), "vertex", "r");
}

struct LsiArgs {
  double n = 2.0, K = 1.0;
  std::optional<double> theta;
  std::size_t samples = 500;
  std::vector<double> times{0.1, 1.0, 10.0};
  double tolerance = 1e-8;
  bool certify = false;
};

Outcome run_lsi(const WeightedGraph& g, const LsiArgs& a, std::uint64_t seed) {
  const auto p = LsiProfile::make(a.n, a.K, a.theta);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<VertexFunction> fs;
  for (std::size_t i = 0; i < a.samples; ++i) {
    std::vector<double> v(g.size());
    for (auto& x : v) x = u(rng);
    fs.emplace_back(std::move(v));
  }
  const auto hyp = hypothesis(g, a.certify, a.n, a.K, seed);
  return from_report(lsi_check(g, fs, p, a.times, a.tolerance, hyp), "function");
}

struct DiameterArgs {
  double n = 2.0, K = 1.0;
  std::optional<double> d_mu;
  bool canonical = false;
};

Outcome run_diameter(const std::optional<WeightedGraph>& g, const DiameterArgs& a) {
  if (g) {
    if (a.d_mu) fail(ErrorCode::invalid_argument, "--dmu is taken from the graph when --graph is given");
    return from_report(diameter_report(*g, a.n, a.K, a.canonical), "bound", "n");
  }
  const double d_mu = a.d_mu.value_or(1.0);
  require_positive(d_mu, "--dmu");
  const auto b = diameter_bounds(a.n, a.K, d_mu);
  EstimateReport rep;
  rep.kind = "diameter";
  rep.params = {{"n", a.n}, {"K", a.K}, {"D_mu", d_mu}};
  rep.tolerance = 1e-6;
  rep.constants["canonical_bound"] = b.canonical_bound;
  rep.constants["hop_bound"] = b.hop_bound;
  rep.constants["quadrature"] = b.quadrature;
  rep.constants["quadrature_relative_error"] = b.relative_error;
  rep.record_residual("quadrature", a.n, b.quadrature, b.canonical_bound, -b.relative_error);
  rep.finish();
  return from_report(rep, "bound", "n");
}

struct DecayArgs {
  double n = 2.0, K = 1.0;
  std::optional<double> theta;
  double t0 = 1.0;
  std::vector<double> times;
  bool pairwise = true;
  double tolerance = 1e-8;
  bool certify = false;
  std::string function;
};

Outcome run_decay(const WeightedGraph& g, const DecayArgs& a, std::uint64_t seed) {
  const auto p = LsiProfile::make(a.n, a.K, a.theta);
  VertexFunction f;
  if (!a.function.empty()) {
    f = load_function_file(g, a.function);
  } else {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> v(g.size());
    for (auto& x : v) x = u(rng);
    f = VertexFunction(std::move(v));
  }
  auto times = a.times;
  if (times.empty())
    for (int k = 0; k <= 5; ++k) times.push_back(a.t0 + k);
  DecayOptions opt;
  opt.pairwise = a.pairwise;
  opt.tolerance = a.tolerance;
  const auto hyp = hypothesis(g, a.certify, a.n, a.K, seed);
  return from_report(decay_check(g, f, p, a.t0, times, opt, hyp));
}

json error_object(const std::string& code, const std::string& message, const std::vector<std::string>& details = {}) {
  json e = {{"code", code}, {"message", message}};
  if (!details.empty()) e["details"] = details;
  return {{"schema", 1}, {"version", version}, {"error", e}};
}

void add_common(CLI::App* sub, Common& c, bool graph_required) {
  auto* opt = sub->add_option("--graph", c.graph, "edge list (u<TAB>v<TAB>weight)");
  if (graph_required) opt->required();
  sub->add_option("--measure", c.measure, "unit or degree")->check(CLI::IsMember({"unit", "degree"}));
  sub->add_option("--measure-file", c.measure_file, "JSON sidecar {\"measure\": {vertex: value}}");
  sub->add_option("--out", c.out, "JSON report path (default: stdout)");
  sub->add_option("--csv", c.csv, "residual CSV path");
  sub->add_option("--seed", c.seed, "seed for sampled functions and optimizer starts");
}

void add_function(CLI::App* sub, FunctionSource& f) {
  sub->add_option("--function", f.file, "vertex<TAB>value file with positive data");
  sub->add_option("--point-mass", f.point_mass, "smoothed point mass at this vertex (default: first vertex)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Curvature, heat kernel and estimate checks on weighted graphs"};
  app.set_version_flag("--version", std::string(version));
  app.require_subcommand(1);
  Common common;
  std::function<Outcome(const Loaded&)> action;

  auto* metrics = app.add_subcommand("metrics", "graph metrics");
  add_common(metrics, common, true);
  metrics->callback([&] { action = [](const Loaded& l) { return run_metrics(*l.graph); }; });

  CurvatureArgs curv;
  auto* curvature = app.add_subcommand("curvature", "best curvature constants per vertex");
  add_common(curvature, common, true);
  curvature->add_option("--flavor", curv.flavor, "cd, cde or cde_prime");
  curvature->add_option("--n", curv.n, "dimension");
  curvature->add_option("--dim-grid", curv.dim_grid, "certify CDE(n, 0) over a grid: a:b, a:b:step or a list");
  curvature->add_option("--K", curv.K, "fail when some vertex estimate falls below K");
  curvature->add_option("--starts", curv.starts, "optimizer starts per vertex");
  curvature->add_option("--vertex", curv.vertices, "restrict to these vertices");
  curvature->add_option("--tol", curv.tolerance, "tolerance");
  curvature->callback([&] { action = [&](const Loaded& l) { return run_curvature(*l.graph, curv, common.seed); }; });

  HeatArgs heat_args;
  auto* heat = app.add_subcommand("heat", "heat kernel values");
  add_common(heat, common, true);
  heat->add_option("--x", heat_args.x, "first vertex");
  heat->add_option("--y", heat_args.y, "second vertex (default: x)");
  heat->add_option("--t", heat_args.times, "times")->delimiter(',');
  heat->add_option("--tol", heat_args.tolerance, "exhaustion tolerance");
  heat->callback([&] { action = [&](const Loaded& l) { return run_heat(*l.graph, heat_args); }; });

  LiYauArgs ly;
  auto* liyau = app.add_subcommand("liyau", "Li-Yau gradient estimate");
  add_common(liyau, common, true);
  liyau->add_option("--n", ly.n, "dimension");
  liyau->add_option("--K", ly.K, "curvature");
  liyau->add_option("--b", ly.b, "exponent b > 1/2");
  liyau->add_option("--T", ly.T, "times")->delimiter(',');
  liyau->add_option("--tol", ly.tolerance, "residual tolerance");
  liyau->add_flag("--certify", ly.certify, "check CDE'(n, K) with the optimizer");
  add_function(liyau, ly.f);
  liyau->callback([&] { action = [&](const Loaded& l) { return run_liyau(*l.graph, ly, common.seed); }; });

  VariationalArgs va;
  auto* variational = app.add_subcommand("variational", "variational inequality along the semigroup");
  add_common(variational, common, true);
  variational->add_option("--schedule", va.schedule, "linear, power or integrated");
  variational->add_option("--T", va.T, "final time");
  variational->add_option("--tau", va.tau, "offset of the linear schedule");
  variational->add_option("--n", va.n, "dimension");
  variational->add_option("--K", va.K, "curvature");
  variational->add_option("--b", va.b, "exponent of the power schedule");
  variational->add_option("--times", va.times, "evaluation times in (0, T)")->delimiter(',');
  variational->add_option("--tol", va.tolerance, "residual tolerance");
  variational->add_flag("--certify", va.certify, "check CDE'(n, K) with the optimizer");
  add_function(variational, va.f);
  variational->callback([&] { action = [&](const Loaded& l) { return run_variational(*l.graph, va, common.seed); }; });

  HarnackArgs ha;
  auto* harnack = app.add_subcommand("harnack", "parabolic Harnack inequality on random tuples");
  add_common(harnack, common, true);
  harnack->add_option("--n", ha.n, "dimension");
  harnack->add_option("--D", ha.D, "constant D (default: mu_max / omega_min)");
  harnack->add_option("--tuples", ha.tuples, "number of random tuples");
  harnack->add_option("--tmin", ha.t_min, "smallest time");
  harnack->add_option("--tmax", ha.t_max, "largest time");
  harnack->add_option("--tol", ha.tolerance, "residual tolerance");
  harnack->add_flag("--certify", ha.certify, "check CDE'(n, 0) with the optimizer");
  harnack->callback([&] { action = [&](const Loaded& l) { return run_harnack(*l.graph, ha, common.seed); }; });

  ExpIntArgs ea;
  auto* expint = app.add_subcommand("expint", "exponential integrability of the heat kernel");
  add_common(expint, common, true);
  expint->add_option("--x", ea.x, "center vertex");
  expint->add_option("--r", ea.r, "radius");
  expint->add_option("--n", ea.n, "dimension");
  expint->add_option("--rho-target", ea.rho_target, "smallest accepted mass lower bound");
  expint->callback([&] { action = [&](const Loaded& l) { return run_expint(*l.graph, ea); }; });

  DoublingArgs da;
  auto* doubling = app.add_subcommand("doubling", "volume doubling constant");
  add_common(doubling, common, true);
  doubling->add_option("--rmax", da.r_max, "largest radius");
  doubling->add_option("--center", da.centers, "centers (default: all vertices)");
  doubling->callback([&] { action = [&](const Loaded& l) { return run_doubling(*l.graph, da); }; });

  GaussianArgs ga;
  auto* gaussian = app.add_subcommand("gaussian", "discrete-time Gaussian bounds");
  add_common(gaussian, common, true);
  gaussian->add_option("--nmax", ga.n_max, "largest number of steps");
  gaussian->add_option("--center", ga.centers, "centers (default: all vertices)");
  gaussian->callback([&] { action = [&](const Loaded& l) { return run_gaussian(*l.graph, ga); }; });

  PoincareArgs pa;
  auto* poincare = app.add_subcommand("poincare", "Poincare constants on balls");
  add_common(poincare, common, true);
  poincare->add_option("--x0", pa.x0, "center vertex");
  poincare->add_option("--radii", pa.radii, "radii")->delimiter(',');
  poincare->callback([&] { action = [&](const Loaded& l) { return run_poincare(*l.graph, pa); }; });

  LsiArgs la;
  auto* lsi = app.add_subcommand("lsi", "log-Sobolev inequality on random functions");
  add_common(lsi, common, true);
  lsi->add_option("--n", la.n, "dimension");
  lsi->add_option("--K", la.K, "positive curvature");
  lsi->add_option("--theta", la.theta, "rate in (0, K), default 2K/3");
  lsi->add_option("--samples", la.samples, "number of random functions");
  lsi->add_option("--times", la.times, "times for the direct form")->delimiter(',');
  lsi->add_option("--tol", la.tolerance, "residual tolerance");
  lsi->add_flag("--certify", la.certify, "check CDE'(n, K) with the optimizer");
  lsi->callback([&] { action = [&](const Loaded& l) { return run_lsi(*l.graph, la, common.seed); }; });

  DiameterArgs dia;
  auto* diameter = app.add_subcommand("diameter", "diameter bounds under positive curvature");
  add_common(diameter, common, false);
  diameter->add_option("--n", dia.n, "dimension");
  diameter->add_option("--K", dia.K, "positive curvature");
  diameter->add_option("--dmu", dia.d_mu, "D_mu when no graph is given (default 1)");
  diameter->add_flag("--canonical", dia.canonical, "also compute canonical-distance lower bounds");
  diameter->callback([&] { action = [&](const Loaded& l) { return run_diameter(l.graph, dia); }; });

  DecayArgs dec;
  auto* decay = app.add_subcommand("decay", "gradient and time-derivative decay of P_t f");
  add_common(decay, common, true);
  decay->add_option("--n", dec.n, "dimension");
  decay->add_option("--K", dec.K, "positive curvature");
  decay->add_option("--theta", dec.theta, "rate in (0, K), default 2K/3");
  decay->add_option("--t0", dec.t0, "starting time");
  decay->add_option("--times", dec.times, "times >= t0 (default t0, t0+1, ..., t0+5)")->delimiter(',');
  decay->add_option("--function", dec.function, "vertex<TAB>value file with 0 <= f <= 1 (default: random)");
  decay->add_flag("!--no-pairwise", dec.pairwise, "skip the canonical-distance comparison");
  decay->add_option("--tol", dec.tolerance, "residual tolerance");
  decay->add_flag("--certify", dec.certify, "check CDE'(n, K) with the optimizer");
  decay->callback([&] { action = [&](const Loaded& l) { return run_decay(*l.graph, dec, common.seed); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cout << error_object("usage", e.what()).dump(2) << '\n';
    return exit_input;
  }

  try {
    const std::string command = app.get_subcommands().front()->get_name();
    const bool needs_graph = command != "diameter";
    const auto loaded = load(common, needs_graph);
    auto outcome = action(loaded);
    json doc = {{"schema", 1},
                {"version", version},
                {"command", command},
                {"seed", common.seed},
                {"graph", loaded.info},
                {"report", outcome.report},
                {"pass", outcome.pass}};
    const std::string text = doc.dump(2) + "\n";
    if (common.out.empty()) {
      std::cout << text;
    } else {
      std::ofstream f(common.out, std::ios::binary);
      if (!(f << text)) fail(ErrorCode::io_error, "cannot write '" + common.out + "'");
    }
    if (!common.csv.empty()) {
      if (!outcome.residuals) fail(ErrorCode::invalid_argument, "this command has no residual CSV");
      std::ofstream f(common.csv, std::ios::binary);
      write_csv(f, *outcome.residuals, outcome.key_name, outcome.param_name);
      if (!f) fail(ErrorCode::io_error, "cannot write '" + common.csv + "'");
    }
    return outcome.pass ? exit_pass : exit_check;
  } catch (const Error& e) {
    std::cout << error_object(to_string(e.code()), e.what(), e.details()).dump(2) << '\n';
    return exit_input;
  } catch (const std::exception& e) {
    std::cout << error_object("internal", e.what()).dump(2) << '\n';
    return exit_input;
  }
}
