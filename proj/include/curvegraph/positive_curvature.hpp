#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <string>
#include <vector>

#include "estimates.hpp"
#include "graph.hpp"
#include "heat.hpp"
#include "operators.hpp"
#include "parallel.hpp"
#include "report.hpp"

namespace curvegraph {

// ---------------------------------------------------------------------------
// Probability normalisation: weights and measure are both divided by mu(V),
// so L and Gamma are unchanged while p(t, x, y) is multiplied by mu(V).

struct Normalized {
  WeightedGraph graph;
  double factor = 1.0;  // the original mu(V)
};

inline Normalized normalize_to_probability(const WeightedGraph& g) {
  const double z = g.total_measure();
  auto h = scale_weights(g, 1.0 / z);
  if (g.measure_mode() != MeasureMode::degree) {
    std::vector<double> mu(g.measures().begin(), g.measures().end());
    for (auto& v : mu) v /= z;
    h = with_custom_measure(h, std::move(mu));
  }
  return {std::move(h), z};
}

// ---------------------------------------------------------------------------
// Intrinsic metric: edge length min(sqrt(mu(x)/m(x)), sqrt(mu(y)/m(y))) and
// shortest paths under those lengths.

inline double intrinsic_edge_length(const WeightedGraph& g, VertexId x, VertexId y) {
  return std::min(std::sqrt(g.measure(x) / g.degree(x)), std::sqrt(g.measure(y) / g.degree(y)));
}

struct IntrinsicMetric {
  std::vector<std::vector<double>> distance;
  double min_slack = 0.0;  // min over x of mu(x) - sum_y w_xy rho(x,y)^2
  VertexId tightest = 0;

  double diameter() const {
    double d = 0.0;
    for (const auto& row : distance)
      for (double v : row) d = std::max(d, v);
    return d;
  }
};

inline std::vector<double> intrinsic_distances_from(const WeightedGraph& g, VertexId source) {
  std::vector<double> dist(g.size(), std::numeric_limits<double>::infinity());
  using Item = std::pair<double, VertexId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    auto [d, v] = queue.top();
    queue.pop();
    if (d > dist[v]) continue;
    for (const auto& nb : g.neighbors(v)) {
      if (nb.vertex == v) continue;
      const double cand = d + intrinsic_edge_length(g, v, nb.vertex);
      if (cand < dist[nb.vertex]) {
        dist[nb.vertex] = cand;
        queue.push({cand, nb.vertex});
      }
    }
  }
  return dist;
}

inline IntrinsicMetric intrinsic_rho(const WeightedGraph& g) {
  IntrinsicMetric m;
  m.distance.resize(g.size());
  parallel_for(g.size(), [&](std::size_t x) { m.distance[x] = intrinsic_distances_from(g, x); });
  m.min_slack = std::numeric_limits<double>::infinity();
  for (VertexId x = 0; x < g.size(); ++x) {
    double s = 0.0;
    for (const auto& nb : g.neighbors(x))
      if (nb.vertex != x) s += nb.weight * std::pow(intrinsic_edge_length(g, x, nb.vertex), 2);
    const double slack = g.measure(x) - s;
    if (slack < m.min_slack) {
      m.min_slack = slack;
      m.tightest = x;
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Canonical distance: sup of f(x) - f(y) over f with Gamma(f) <= 1
// everywhere. The problem is convex (a linear objective under convex
// quadratic constraints); it is solved by a log-barrier Newton method whose
// iterates stay strictly feasible, so every returned value is attained by a
// feasible witness and is a lower bound on the supremum.

struct CanonicalOptions {
  std::vector<VertexId> domain;                   // empty: all of V; otherwise f = 0 off the domain
  std::optional<std::vector<double>> warm_start;  // a start, e.g. a witness from a smaller domain
  double tolerance = 1e-10;                       // barrier duality gap, relative
  int max_outer = 60;
  int max_newton = 100;
};

struct CanonicalDistance {
  double value = 0.0;
  std::vector<double> witness;
  double max_gamma = 0.0;
  bool feasible = false;
  bool converged = false;
  std::string diagnostic;
};

namespace detail {

inline double gamma_value(const WeightedGraph& g, const std::vector<double>& f, VertexId v) {
  double s = 0.0;
  for (const auto& nb : g.neighbors(v)) s += nb.weight * (f[nb.vertex] - f[v]) * (f[nb.vertex] - f[v]);
  return s / (2.0 * g.measure(v));
}

inline double max_gamma(const WeightedGraph& g, const std::vector<double>& f) {
  double m = 0.0;
  for (VertexId v = 0; v < g.size(); ++v) m = std::max(m, gamma_value(g, f, v));
  return m;
}

}  // namespace detail

inline CanonicalDistance canonical_distance(const WeightedGraph& g, VertexId x, VertexId y,
                                            const CanonicalOptions& opt = {}) {
  if (x >= g.size() || y >= g.size()) fail(ErrorCode::unknown_vertex, "vertex outside the graph");
  std::vector<char> in_domain(g.size(), opt.domain.empty() ? 1 : 0);
  for (auto v : opt.domain) {
    if (v >= g.size()) fail(ErrorCode::unknown_vertex, "domain vertex outside the graph");
    in_domain[v] = 1;
  }
  if (!in_domain[x] || !in_domain[y]) fail(ErrorCode::invalid_argument, "x and y must lie in the domain");
  const bool whole = std::all_of(in_domain.begin(), in_domain.end(), [](char c) { return c != 0; });

  CanonicalDistance out;
  out.witness.assign(g.size(), 0.0);
  if (x == y) {
    out.feasible = out.converged = true;
    return out;
  }
  // Variables: the domain, minus y when the whole graph is free (fixing
  // f(y) = 0 removes the constant direction).
  std::vector<long> var(g.size(), -1);
  std::vector<VertexId> vars;
  for (VertexId v = 0; v < g.size(); ++v)
    if (in_domain[v] && !(whole && v == y)) {
      var[v] = static_cast<long>(vars.size());
      vars.push_back(v);
    }
  // Constraints that depend on some variable.
  std::vector<VertexId> cons;
  for (VertexId v = 0; v < g.size(); ++v) {
    bool touches = var[v] >= 0;
    for (const auto& nb : g.neighbors(v)) touches = touches || var[nb.vertex] >= 0;
    if (touches) cons.push_back(v);
  }

  auto objective = [&](const std::vector<double>& f) { return f[x] - f[y]; };
  auto shrink = [&](std::vector<double>& f, double target) {
    const double m = detail::max_gamma(g, f);
    if (m > target) {
      const double s = std::sqrt(target / m);
      for (auto& v : f) v *= s;
    }
  };

  std::vector<double> f(g.size(), 0.0);
  if (opt.warm_start) {
    if (opt.warm_start->size() != g.size()) fail(ErrorCode::invalid_argument, "warm start has wrong length");
    f = *opt.warm_start;
    for (VertexId v = 0; v < g.size(); ++v)
      if (!in_domain[v]) f[v] = 0.0;
    if (whole) {
      const double base = f[y];
      for (auto& v : f) v -= base;
    }
  } else if (whole) {
    // sqrt(2) rho(., y) has Gamma <= 1 by the intrinsic-metric property.
    f = intrinsic_distances_from(g, y);
    for (auto& v : f) v *= std::sqrt(2.0);
  }
  shrink(f, 1.0);
  std::vector<double> best = f;
  double best_value = objective(f) * (detail::max_gamma(g, f) <= 1.0 ? 1.0 : 0.0);
  if (objective(f) < 0.0) {
    for (auto& v : f) v = -v;
    best = f;
    best_value = objective(f);
  }
  shrink(f, 1.0 - 1e-3);  // strictly inside for the barrier

  const auto k = static_cast<Eigen::Index>(vars.size());
  const double m_cons = static_cast<double>(cons.size());
  double tb = std::max(1.0, m_cons / std::max(1.0, std::abs(objective(f))));
  auto barrier = [&](const std::vector<double>& h, double& value) {
    value = tb * objective(h);
    for (auto v : cons) {
      const double gv = detail::gamma_value(g, h, v);
      if (!(gv < 1.0)) return false;
      value += std::log1p(-gv);
    }
    return true;
  };

  bool gap_closed = false;
  for (int outer = 0; outer < opt.max_outer && !gap_closed; ++outer) {
    for (int it = 0; it < opt.max_newton; ++it) {
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(k);
      Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(k, k);  // of the negated barrier
      if (var[x] >= 0) grad(var[x]) += tb;
      if (var[y] >= 0) grad(var[y]) -= tb;
      for (auto v : cons) {
        const double slack = 1.0 - detail::gamma_value(g, f, v);
        // Gradient of Gamma_v over the variables, and its Hessian Q_v.
        std::vector<std::pair<Eigen::Index, double>> dg;
        double self = 0.0;
        for (const auto& nb : g.neighbors(v)) {
          if (nb.vertex == v) continue;
          const double c = nb.weight * (f[nb.vertex] - f[v]) / g.measure(v);
          self -= c;
          if (var[nb.vertex] >= 0) dg.push_back({var[nb.vertex], c});
        }
        if (var[v] >= 0) dg.push_back({var[v], self});
        for (const auto& [i, c] : dg) grad(i) -= c / slack;
        for (const auto& [i, ci] : dg)
          for (const auto& [j, cj] : dg) hess(i, j) += ci * cj / (slack * slack);
        for (const auto& nb : g.neighbors(v)) {
          if (nb.vertex == v) continue;
          const double w = nb.weight / (g.measure(v) * slack);
          const long a = var[v], b = var[nb.vertex];
          if (a >= 0) hess(a, a) += w;
          if (b >= 0) hess(b, b) += w;
          if (a >= 0 && b >= 0) {
            hess(a, b) -= w;
            hess(b, a) -= w;
          }
        }
      }
      Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
      if (ldlt.info() != Eigen::Success) break;
      const Eigen::VectorXd step = ldlt.solve(grad);
      const double decrement = grad.dot(step);
      if (!(decrement > 1e-14 * std::max(1.0, tb))) break;
      double current = 0.0;
      barrier(f, current);
      double s = 1.0;
      bool moved = false;
      for (int ls = 0; ls < 60; ++ls, s *= 0.5) {
        std::vector<double> trial = f;
        for (Eigen::Index i = 0; i < k; ++i) trial[vars[static_cast<std::size_t>(i)]] += s * step(i);
        double value = 0.0;
        if (barrier(trial, value) && value >= current + 1e-4 * s * decrement) {
          f = std::move(trial);
          moved = true;
          break;
        }
      }
      if (!moved) break;
    }
    if (objective(f) > best_value && detail::max_gamma(g, f) <= 1.0) {
      best_value = objective(f);
      best = f;
    }
    gap_closed = m_cons / tb <= opt.tolerance * std::max(1.0, std::abs(objective(f)));
    tb *= 8.0;
  }
  // Rounding guard: the witness satisfies Gamma <= 1 exactly as evaluated.
  shrink(best, 1.0);
  out.witness = best;
  out.value = objective(best);
  out.max_gamma = detail::max_gamma(g, best);
  out.feasible = out.max_gamma <= 1.0 + 1e-9;
  out.converged = gap_closed;
  if (!gap_closed) out.diagnostic = "barrier method stopped before the duality gap closed; value is best so far";
  return out;
}

// ---------------------------------------------------------------------------
// Entropy E(f) = sum mu f ln f - (sum mu f) ln(sum mu f), with 0 ln 0 = 0.

inline double entropy(const WeightedGraph& g, std::span<const double> f) {
  if (f.size() != g.size()) fail(ErrorCode::invalid_argument, "function size does not match graph");
  double mass = 0.0, s = 0.0;
  for (VertexId x = 0; x < g.size(); ++x) {
    if (f[x] < 0.0 || !std::isfinite(f[x]))
      fail(ErrorCode::nonpositive_value, "entropy needs nonnegative values; fails at " + g.name(x));
    mass += g.measure(x) * f[x];
    if (f[x] > 0.0) s += g.measure(x) * f[x] * std::log(f[x]);
  }
  if (!(mass > 0.0)) fail(ErrorCode::degenerate_function, "entropy needs a function with positive mass");
  return s - mass * std::log(mass);
}

// ---------------------------------------------------------------------------
// Log-Sobolev profile Phi(x) = 2n[(1 + s) ln(1 + s) - s ln s], s = x/(theta n).

struct LsiProfile {
  double n = 0.0;
  double K = 0.0;
  double theta = 0.0;

  static LsiProfile make(double n, double K, std::optional<double> theta = std::nullopt) {
    detail::check_dimension(n);
    if (!(K > 0.0)) fail(ErrorCode::precondition, "positive curvature K > 0 is required");
    const double th = theta ? *theta : 2.0 * K / 3.0;
    if (!(th > 0.0 && th < K)) fail(ErrorCode::invalid_argument, "theta must lie in (0, K)");
    return {n, K, th};
  }

  double phi(double x) const {
    if (x < 0.0) fail(ErrorCode::invalid_argument, "Phi is defined for x >= 0");
    if (x == 0.0) return 0.0;
    // (1 + s) ln(1 + s) - s ln s, rearranged to avoid cancellation at large s.
    const double s = x / (theta * n);
    return 2.0 * n * (std::log1p(s) + s * std::log1p(1.0 / s));
  }
  double phi_prime(double x) const { return (2.0 / theta) * std::log1p(theta * n / x); }
  double phi_second(double x) const { return -2.0 * n / (x * (x + theta * n)); }

  // ln of the kernel bound (1 - e^{-theta t})^{-n}.
  double log_kernel_bound(double t) const { return -n * std::log1p(-std::exp(-theta * t)); }
};

// Phi(sum mu Gamma(f)) - sum mu f^2 ln f^2 for ||f||_2 = 1 under the
// probability-normalised measure, plus the direct form
// E(f^2) <= 2t sum mu Gamma(f) + 2 M(t), M(t) = -n ln(1 - e^{-theta t}).
inline EstimateReport lsi_check(const WeightedGraph& g, const std::vector<VertexFunction>& functions,
                                const LsiProfile& profile, const std::vector<double>& t_grid = {},
                                double tolerance = 1e-8, const Hypothesis& hyp = {}) {
  const auto norm = normalize_to_probability(g);
  const auto& h = norm.graph;
  EstimateReport rep;
  rep.kind = "lsi";
  rep.params = {{"n", profile.n}, {"K", profile.K}, {"theta", profile.theta}};
  rep.constants["measure_factor"] = norm.factor;
  rep.tolerance = tolerance;
  annotate(rep, hyp);
  if (std::abs(norm.factor - 1.0) > 1e-12)
    rep.note("measure renormalised to a probability (divided by " + std::to_string(norm.factor) + ")");
  std::size_t renormalised = 0;
  for (std::size_t i = 0; i < functions.size(); ++i) {
    const auto& f0 = functions[i];
    detail::check_size(h, f0);
    if (!f0.is_total()) fail(ErrorCode::missing_value, "function needs a value at every vertex");
    double l2 = 0.0;
    for (VertexId x = 0; x < h.size(); ++x) l2 += h.measure(x) * f0[x] * f0[x];
    if (!(l2 > 0.0)) fail(ErrorCode::degenerate_function, "function has zero norm");
    std::vector<double> fv(f0.values().begin(), f0.values().end());
    if (std::abs(std::sqrt(l2) - 1.0) > 1e-10) {
      ++renormalised;
      for (auto& v : fv) v /= std::sqrt(l2);
    }
    const VertexFunction f(fv);
    const auto gam = gamma(h, f);
    double energy = 0.0, ent = 0.0;
    for (VertexId x = 0; x < h.size(); ++x) {
      energy += h.measure(x) * gam[x];
      const double sq = fv[x] * fv[x];
      if (sq > 0.0) ent += h.measure(x) * sq * std::log(sq);
    }
    const std::string key = "f" + std::to_string(i);
    rep.record(key, 0.0, ent, profile.phi(energy));
    for (double t : t_grid) rep.record(key, t, ent, 2.0 * t * energy + 2.0 * profile.log_kernel_bound(t));
  }
  if (renormalised) rep.note(std::to_string(renormalised) + " functions renormalised to unit l2 norm");
  rep.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// Decay constants C1 = sqrt(D_mu + n theta (2K/theta - 1)^2 / (8 (2K/theta - 2)(e^{theta t0} - 1)))
// and C2 = 2 sqrt(2 D_mu) C1.

struct DecayConstants {
  double C1 = 0.0;
  double C2 = 0.0;
};

inline DecayConstants decay_constants(const LsiProfile& p, double t0, double d_mu) {
  if (!(t0 > 0.0)) fail(ErrorCode::invalid_argument, "t0 must be positive");
  const double r = 2.0 * p.K / p.theta;
  if (!(r > 2.0)) fail(ErrorCode::invalid_argument, "theta must be smaller than K");
  DecayConstants c;
  c.C1 = std::sqrt(d_mu + p.n * p.theta * (r - 1.0) * (r - 1.0) / (8.0 * (r - 2.0) * std::expm1(p.theta * t0)));
  c.C2 = 2.0 * std::sqrt(2.0 * d_mu) * c.C1;
  return c;
}

struct DecayOptions {
  double step = 1e-4;
  double tolerance = 1e-8;
  bool pairwise = true;  // compare against canonical-distance lower bounds
};

// |d/dt P_t f| <= C2 e^{-theta t/2} and Gamma(sqrt(P_t f)) <= C1^2 e^{-theta t}
// per vertex and grid time. Pairwise, |sqrt P_t f(x) - sqrt P_t f(y)| <=
// C1 e^{-theta t/2} d~(x, y) is compared with the canonical lower bound L <=
// d~; a miss there is inconclusive rather than a violation.
inline EstimateReport decay_check(const WeightedGraph& g, const VertexFunction& f, const LsiProfile& profile,
                                  double t0, const std::vector<double>& t_grid, const DecayOptions& opt = {},
                                  const Hypothesis& hyp = {}) {
  detail::require_finite(g, "decay_check");
  detail::check_size(g, f);
  if (!f.is_total()) fail(ErrorCode::missing_value, "function needs a value at every vertex");
  for (VertexId x = 0; x < g.size(); ++x)
    if (!(f[x] >= 0.0 && f[x] <= 1.0)) fail(ErrorCode::invalid_argument, "decay check needs 0 <= f <= 1");
  for (double t : t_grid)
    if (t < t0) fail(ErrorCode::invalid_argument, "grid time below t0");
  const double d_mu = graph_metrics(g).d_mu;
  const auto c = decay_constants(profile, t0, d_mu);
  EstimateReport rep;
  rep.kind = "decay";
  rep.params = {{"n", profile.n}, {"K", profile.K}, {"theta", profile.theta}, {"t0", t0}};
  rep.constants["C1"] = c.C1;
  rep.constants["C2"] = c.C2;
  rep.constants["D_mu"] = d_mu;
  rep.tolerance = opt.tolerance;
  annotate(rep, hyp);

  const auto k = SpectralKernel::global(g);
  auto semigroup = [&](double t) { return k.apply(t, f.values(), g); };
  std::vector<std::vector<double>> lower;
  if (opt.pairwise) {
    lower.assign(g.size(), std::vector<double>(g.size(), 0.0));
    std::vector<std::pair<VertexId, VertexId>> pairs;
    for (VertexId x = 0; x < g.size(); ++x)
      for (VertexId y = x + 1; y < g.size(); ++y) pairs.push_back({x, y});
    std::vector<CanonicalDistance> dist(pairs.size());
    parallel_for(pairs.size(), [&](std::size_t i) { dist[i] = canonical_distance(g, pairs[i].first, pairs[i].second); });
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (dist[i].feasible) lower[pairs[i].first][pairs[i].second] = lower[pairs[i].second][pairs[i].first] = dist[i].value;
  }
  std::size_t inconclusive = 0;
  double pair_slack = INFINITY;
  for (double t : t_grid) {
    const auto u = semigroup(t);
    const auto du = t - opt.step > 0.0 ? detail::central_difference(semigroup, t, opt.step)
                                       : k.apply_derivative(t, f.values(), g);
    const auto root = detail::sqrt_of(u);
    const auto gr = gamma(g, VertexFunction(root));
    const double dt_bound = c.C2 * std::exp(-0.5 * profile.theta * t);
    const double gamma_bound = c.C1 * c.C1 * std::exp(-profile.theta * t);
    for (VertexId x = 0; x < g.size(); ++x) {
      rep.record("dt:" + g.name(x), t, std::abs(du[x]), dt_bound);
      rep.record("gamma:" + g.name(x), t, gr[x], gamma_bound);
    }
    if (opt.pairwise)
      for (VertexId x = 0; x < g.size(); ++x)
        for (VertexId y = x + 1; y < g.size(); ++y) {
          const double slack = std::sqrt(gamma_bound) * lower[x][y] - std::abs(root[x] - root[y]);
          pair_slack = std::min(pair_slack, slack);
          if (slack < -opt.tolerance) ++inconclusive;
        }
  }
  if (opt.pairwise) {
    rep.constants["pairwise_min_slack"] = pair_slack;
    if (inconclusive)
      rep.note(std::to_string(inconclusive) +
               " pairwise comparisons exceed the canonical lower bound; inconclusive since the bound is only a lower one");
  }
  rep.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// p(t, x, y) <= (1 - e^{-2Kt/3})^{-n} under the probability measure.

inline EstimateReport global_kernel_bound(const WeightedGraph& g, const LsiProfile& profile,
                                          const std::vector<double>& t_grid, double tolerance = 1e-10,
                                          const Hypothesis& hyp = {}) {
  detail::require_finite(g, "global_kernel_bound");
  const auto norm = normalize_to_probability(g);
  const auto& h = norm.graph;
  EstimateReport rep;
  rep.kind = "global_kernel";
  rep.params = {{"n", profile.n}, {"K", profile.K}, {"theta", profile.theta}};
  rep.constants["measure_factor"] = norm.factor;
  rep.constants["total_measure"] = h.total_measure();
  rep.tolerance = tolerance;
  annotate(rep, hyp);
  if (std::abs(norm.factor - 1.0) > 1e-12)
    rep.note("measure renormalised to a probability (divided by " + std::to_string(norm.factor) + ")");
  const auto k = SpectralKernel::global(h);
  double t_max = 0.0;
  for (double t : t_grid) {
    if (!(t > 0.0)) fail(ErrorCode::invalid_argument, "grid times must be positive");
    t_max = std::max(t_max, t);
    const double bound = std::exp(profile.log_kernel_bound(t));
    const auto p = k.matrix(t);
    for (VertexId x = 0; x < h.size(); ++x)
      for (VertexId y = x; y < h.size(); ++y)
        rep.record(h.name(x) + "|" + h.name(y), t, p(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)), bound);
  }
  if (t_max > 0.0) {
    const auto p = k.matrix(t_max);
    rep.constants["kernel_min_at_t_max"] = p.minCoeff();
    rep.constants["kernel_max_at_t_max"] = p.maxCoeff();
    const double gap = h.size() > 1 ? k.eigenvalues()(1) : 0.0;
    rep.constants["spectral_gap"] = gap;
    if (!(p.minCoeff() > 0.0)) rep.violation("kernel limit is not positive");
  }
  rep.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// Diameter bounds D~ <= 4 sqrt(3) pi sqrt(n/K) and D <= 2 pi sqrt(6 D_mu n/K),
// with the first cross-checked by quadrature of sqrt(2) * int_0^inf Phi(x^2)/x^2 dx.

struct DiameterBounds {
  double canonical_bound = 0.0;
  double hop_bound = 0.0;
  double quadrature = 0.0;   // sqrt(2) * int Phi(x^2)/x^2
  double closed_form = 0.0;  // 4 pi sqrt(n/theta), the integral itself
  double relative_error = 0.0;
};

inline DiameterBounds diameter_bounds(double n, double K, double d_mu) {
  if (!(K > 0.0)) fail(ErrorCode::precondition, "diameter bounds need K > 0");
  detail::check_dimension(n);
  const auto p = LsiProfile::make(n, K);
  DiameterBounds b;
  b.canonical_bound = 4.0 * std::sqrt(3.0) * std::numbers::pi * std::sqrt(n / K);
  b.hop_bound = 2.0 * std::numbers::pi * std::sqrt(6.0 * d_mu * n / K);
  b.closed_form = 4.0 * std::numbers::pi * std::sqrt(n / p.theta);
  // x = tan u maps [0, inf) to [0, pi/2); the integrand becomes
  // Phi(tan^2 u)/sin^2 u, with integrable log singularities at both ends.
  // Near pi/2 the distance uc to the endpoint gives tan u = 1/tan(uc)
  // without cancellation. The clipped tails contribute below 1e-90.
  auto integrand = [&](double u, double uc) {
    const double x = uc > 0.0 ? 1.0 / std::tan(uc) : std::tan(u);
    const double s = uc > 0.0 ? std::cos(uc) : std::sin(u);
    if (!(x > 1e-100 && x < 1e100)) return 0.0;
    return p.phi(x * x) / (s * s);
  };
  boost::math::quadrature::tanh_sinh<double> quad;
  double error = 0.0;
  const double value = quad.integrate(integrand, 0.0, std::numbers::pi / 2.0, 1e-13, &error);
  if (!(error <= 1e-9)) fail(ErrorCode::no_convergence, "diameter quadrature did not converge");
  b.quadrature = std::sqrt(2.0) * value;
  b.relative_error = std::abs(b.quadrature - b.canonical_bound) / b.canonical_bound;
  return b;
}

// Hop diameter <= D bound and sqrt(2) max rho~ <= D~ bound on a graph, plus
// the canonical lower bounds when requested.
inline EstimateReport diameter_report(const WeightedGraph& g, double n, double K, bool canonical = false,
                                      const Hypothesis& hyp = {}) {
  const auto metrics = graph_metrics(g);
  const auto b = diameter_bounds(n, K, metrics.d_mu);
  const auto rho = intrinsic_rho(g);
  EstimateReport rep;
  rep.kind = "diameter";
  rep.params = {{"n", n}, {"K", K}};
  rep.tolerance = 1e-9;
  annotate(rep, hyp);
  rep.constants["canonical_bound"] = b.canonical_bound;
  rep.constants["hop_bound"] = b.hop_bound;
  rep.constants["quadrature"] = b.quadrature;
  rep.constants["quadrature_relative_error"] = b.relative_error;
  rep.constants["hop_diameter"] = static_cast<double>(metrics.hop_diameter);
  rep.constants["intrinsic_diameter"] = rho.diameter();
  rep.constants["intrinsic_min_slack"] = rho.min_slack;
  rep.record("hops", 0.0, static_cast<double>(metrics.hop_diameter), b.hop_bound);
  rep.record("intrinsic", 0.0, std::sqrt(2.0) * rho.diameter(), b.canonical_bound);
  if (rho.min_slack < -1e-12 * g.total_measure())
    rep.violation("intrinsic metric condition fails at " + g.name(rho.tightest));
  if (b.relative_error > 1e-6) rep.violation("quadrature disagrees with the closed form");
  if (canonical) {
    double widest = 0.0;
    for (VertexId x = 0; x < g.size(); ++x)
      for (VertexId y = x + 1; y < g.size(); ++y) {
        auto d = canonical_distance(g, x, y);
        if (d.feasible) widest = std::max(widest, d.value);
      }
    rep.constants["canonical_lower_diameter"] = widest;
    rep.record("canonical", 0.0, widest, b.canonical_bound);
  }
  rep.finish();
  return rep;
}

}  // namespace curvegraph
