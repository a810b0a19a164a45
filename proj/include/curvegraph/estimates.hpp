#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/lambert_w.hpp>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "curvature.hpp"
#include "graph.hpp"
#include "heat.hpp"
#include "operators.hpp"
#include "parallel.hpp"
#include "report.hpp"

namespace curvegraph {

// ---------------------------------------------------------------------------
// Curvature hypotheses are soft: checkers run regardless and the report
// records whether the hypothesis was certified, refuted or not examined.

struct Hypothesis {
  std::optional<bool> holds;
  std::string detail;
};

inline void annotate(EstimateReport& r, const Hypothesis& h) {
  r.labels["hypothesis"] = !h.holds ? "unchecked" : (*h.holds ? "certified" : "violated");
  if (!h.detail.empty()) r.labels["hypothesis_detail"] = h.detail;
  if (h.holds && !*h.holds) r.note("hypothesis not met: " + h.detail);
}

// CDE'(n, K) at every vertex, judged by the optimiser's estimate.
inline Hypothesis check_cde_prime(const WeightedGraph& g, double n, double K, const OptimizerOptions& opt = {},
                                  double tolerance = 1e-7) {
  auto est = optimal_k_all(g, Flavor::cde_prime, n, opt);
  std::size_t worst = 0;
  for (std::size_t i = 1; i < est.size(); ++i)
    if (est[i].k_estimate < est[worst].k_estimate) worst = i;
  Hypothesis h;
  h.holds = est[worst].k_estimate >= K - tolerance;
  char buf[160];
  std::snprintf(buf, sizeof buf, "CDE'(%g, %g): smallest curvature estimate %.6g at vertex %s", n, K,
                est[worst].k_estimate, g.name(est[worst].vertex).c_str());
  h.detail = buf;
  return h;
}

namespace detail {

inline void require_positive_function(const WeightedGraph& g, const VertexFunction& f) {
  check_size(g, f);
  if (!f.is_total()) fail(ErrorCode::missing_value, "function needs a value at every vertex");
  for (VertexId x = 0; x < g.size(); ++x)
    if (!(f[x] > 0.0) || !std::isfinite(f[x]))
      fail(ErrorCode::nonpositive_value, "function must be positive and bounded; fails at " + g.name(x));
}

// Central difference of a vector-valued function of t, and its Richardson
// extrapolation from steps h and h/2.
template <class Fn>
std::vector<double> central_difference(Fn&& fn, double t, double h) {
  auto plus = fn(t + h);
  const auto minus = fn(t - h);
  for (std::size_t i = 0; i < plus.size(); ++i) plus[i] = (plus[i] - minus[i]) / (2.0 * h);
  return plus;
}

template <class Fn>
std::vector<double> richardson_difference(Fn&& fn, double t, double h) {
  const auto coarse = central_difference(fn, t, h);
  auto fine = central_difference(fn, t, h / 2.0);
  for (std::size_t i = 0; i < fine.size(); ++i) fine[i] = (4.0 * fine[i] - coarse[i]) / 3.0;
  return fine;
}

inline std::vector<double> sqrt_of(std::span<const double> u) {
  std::vector<double> s(u.begin(), u.end());
  for (auto& v : s) v = std::sqrt(v);
  return s;
}

// Kernel value on a finite graph or by exhaustion on a truncation.
class KernelSource {
 public:
  explicit KernelSource(const WeightedGraph& g) : g_(g) {
    if (!g.is_truncation()) kernel_ = SpectralKernel::global(g);
  }
  double operator()(double t, VertexId x, VertexId y) const {
    if (kernel_) return (*kernel_)(t, x, y);
    auto v = heat_kernel(g_, x, y, t);
    if (!v.converged) fail(ErrorCode::no_convergence, "heat kernel exhaustion did not converge: " + v.diagnostic);
    return v.value;
  }

 private:
  const WeightedGraph& g_;
  std::optional<SpectralKernel> kernel_;
};

inline void require_finite(const WeightedGraph& g, const char* what) {
  if (g.is_truncation())
    fail(ErrorCode::invalid_argument, std::string(what) + " needs a finite graph, not a truncation");
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Variational inequality for phi(t) = P_t(Gamma(sqrt(P_{T-t} f))).

struct Schedule {
  std::string name;
  std::function<double(double)> alpha;  // positive
  std::function<double(double)> gamma;  // nonpositive
};

// alpha = tau + T - t with gamma = -n / (4 alpha); the K = 0 schedule whose
// integral gives the integrated inequality below.
inline Schedule integration_schedule(double T, double tau, double n) {
  return {"linear", [=](double t) { return tau + T - t; }, [=](double t) { return -n / (4.0 * (tau + T - t)); }};
}

// alpha = (1 - t/T)^{2b} with gamma = (n/4)(alpha'/alpha + 2K).
inline Schedule power_schedule(double T, double n, double K, double b) {
  return {"power", [=](double t) { return std::pow(1.0 - t / T, 2.0 * b); },
          [=](double t) { return 0.25 * n * (2.0 * K - 2.0 * b / (T - t)); }};
}

struct VariationalOptions {
  double step = 1e-4;
  double tolerance = 1e-8;
  double identity_tolerance = 1e-5;
};

// Residuals of d/dt(alpha phi) >= (alpha' - 4 alpha gamma/n + 2 alpha K) phi
//   + (2 alpha gamma/n) L P_T f - (2 alpha gamma^2/n) P_T f
// at each grid time and vertex. The identity d/dt phi = 2 P_t(Gamma2~(sqrt
// P_{T-t} f)) is checked along the way; a mismatch is a violation.
inline EstimateReport variational_check(const WeightedGraph& g, const VertexFunction& f, double T,
                                        const std::vector<double>& t_grid, double n, double K,
                                        const Schedule& schedule, const VariationalOptions& opt = {},
                                        const Hypothesis& hyp = {}) {
  detail::require_positive_function(g, f);
  detail::require_finite(g, "variational_check");
  detail::check_dimension(n);
  if (!(T > 0.0)) fail(ErrorCode::invalid_argument, "T must be positive");
  const double h = opt.step;
  for (double t : t_grid)
    if (!(t - h >= 0.0 && t + h <= T))
      fail(ErrorCode::invalid_argument, "grid time " + std::to_string(t) + " must lie in [h, T - h]");
  for (int i = 0; i <= 256; ++i) {
    const double t = T * i / 257.0;
    if (schedule.gamma(t) > 0.0) fail(ErrorCode::precondition, "gamma is positive at t = " + std::to_string(t));
  }
  for (double t : t_grid)
    if (schedule.gamma(t) > 0.0) fail(ErrorCode::precondition, "gamma is positive at t = " + std::to_string(t));

  EstimateReport r;
  r.kind = "variational";
  r.params = {{"T", T}, {"n", n}, {"K", K}, {"step", h}};
  r.labels["schedule"] = schedule.name;
  r.tolerance = opt.tolerance;
  annotate(r, hyp);

  const auto k = SpectralKernel::global(g);
  auto phi = [&](double t) {
    auto root = detail::sqrt_of(k.apply(T - t, f.values(), g));
    auto gam = gamma(g, VertexFunction(std::move(root)));
    return k.apply(t, gam.values(), g);
  };
  auto weighted = [&](double t) {
    auto v = phi(t);
    const double a = schedule.alpha(t);
    for (auto& x : v) x *= a;
    return v;
  };
  auto identity_rhs = [&](double t) {
    auto root = detail::sqrt_of(k.apply(T - t, f.values(), g));
    auto g2 = gamma2_tilde(g, VertexFunction(std::move(root)));
    auto v = k.apply(t, g2.values(), g);
    for (auto& x : v) x *= 2.0;
    return v;
  };
  const auto pt = k.apply(T, f.values(), g);
  const auto lpt = k.apply_derivative(T, f.values(), g);

  double identity_error = 0.0;
  for (double t : t_grid) {
    const auto exact = identity_rhs(t);
    auto identity_gap = [&](const std::vector<double>& d) {
      double e = 0.0;
      for (std::size_t i = 0; i < d.size(); ++i) e = std::max(e, std::abs(d[i] - exact[i]) / std::max(1.0, std::abs(exact[i])));
      return e;
    };
    double err = identity_gap(detail::central_difference(phi, t, h));
    if (err > opt.identity_tolerance / 10.0) err = std::min(err, identity_gap(detail::richardson_difference(phi, t, h)));
    identity_error = std::max(identity_error, err);

    const auto phi_t = phi(t);
    const double a = schedule.alpha(t), gm = schedule.gamma(t);
    auto evaluate = [&](bool refine) {
      const auto lhs = refine ? detail::richardson_difference(weighted, t, h) : detail::central_difference(weighted, t, h);
      auto alpha_fn = [&](double s) { return std::vector<double>{schedule.alpha(s)}; };
      const double da = refine ? detail::richardson_difference(alpha_fn, t, h)[0] : detail::central_difference(alpha_fn, t, h)[0];
      std::vector<double> bound(g.size());
      for (VertexId x = 0; x < g.size(); ++x)
        bound[x] = (da - 4.0 * a * gm / n + 2.0 * a * K) * phi_t[x] + (2.0 * a * gm / n) * lpt[x] -
                   (2.0 * a * gm * gm / n) * pt[x];
      return std::pair{lhs, bound};
    };
    auto [lhs, bound] = evaluate(false);
    double worst = std::numeric_limits<double>::infinity();
    for (VertexId x = 0; x < g.size(); ++x) worst = std::min(worst, lhs[x] - bound[x]);
    if (worst < 10.0 * opt.tolerance) std::tie(lhs, bound) = evaluate(true);
    for (VertexId x = 0; x < g.size(); ++x) r.record(g.name(x), t, bound[x], lhs[x]);
  }
  r.constants["identity_max_error"] = identity_error;
  if (identity_error > opt.identity_tolerance)
    r.violation("derivative identity for phi fails: relative error " + std::to_string(identity_error));
  r.finish();
  return r;
}

// tau P_T(Gamma(sqrt f)) - (T + tau) Gamma(sqrt(P_T f))
//   >= -(T/2) L P_T f - (n/8) log(1 + T/tau) P_T f, per vertex.
inline EstimateReport integrated_variational_check(const WeightedGraph& g, const VertexFunction& f, double T,
                                                   double tau, double n, double tolerance = 1e-9,
                                                   const Hypothesis& hyp = {}) {
  detail::require_positive_function(g, f);
  detail::require_finite(g, "integrated_variational_check");
  detail::check_dimension(n);
  if (!(T > 0.0) || !(tau > 0.0)) fail(ErrorCode::invalid_argument, "T and tau must be positive");
  EstimateReport r;
  r.kind = "variational_integrated";
  r.params = {{"T", T}, {"tau", tau}, {"n", n}};
  r.tolerance = tolerance;
  annotate(r, hyp);
  const auto k = SpectralKernel::global(g);
  const auto pt = k.apply(T, f.values(), g);
  const auto lpt = k.apply_derivative(T, f.values(), g);
  const auto start = gamma(g, VertexFunction(detail::sqrt_of(f.values())));
  const auto carried = k.apply(T, start.values(), g);
  const auto end = gamma(g, VertexFunction(detail::sqrt_of(pt)));
  const double logt = std::log1p(T / tau);
  for (VertexId x = 0; x < g.size(); ++x) {
    const double lhs = tau * carried[x] - (T + tau) * end[x];
    const double rhs = -0.5 * T * lpt[x] - 0.125 * n * logt * pt[x];
    r.record(g.name(x), T, rhs, lhs);
  }
  r.finish();
  return r;
}

// ---------------------------------------------------------------------------
// Li-Yau family with W(t) = (1 - t/T)^b.

inline EstimateReport li_yau_check(const WeightedGraph& g, const VertexFunction& f, double T, double n, double K,
                                   double b, double tolerance = 1e-9, const Hypothesis& hyp = {}) {
  detail::require_positive_function(g, f);
  detail::require_finite(g, "li_yau_check");
  detail::check_dimension(n);
  if (!(T > 0.0)) fail(ErrorCode::invalid_argument, "T must be positive");
  if (!(b > 0.5)) fail(ErrorCode::precondition, "b must exceed 1/2");
  if (!(K > -b / T)) fail(ErrorCode::precondition, "K must exceed -b/T");
  for (int i = 0; i < 1000; ++i) {
    const double t = T * i / 1000.0;
    const double w = std::pow(1.0 - t / T, b);
    const double dw = -(b / T) * std::pow(1.0 - t / T, b - 1.0);
    if (dw > -K * w + 1e-15 * std::abs(K * w))
      fail(ErrorCode::precondition, "W' <= -K W fails at t = " + std::to_string(t));
  }
  EstimateReport r;
  r.kind = "li_yau";
  r.params = {{"T", T}, {"n", n}, {"K", K}, {"b", b}};
  r.tolerance = tolerance;
  annotate(r, hyp);
  // Uniformisation keeps relative accuracy where P_T f is tiny.
  const auto u = uniformized_apply(g, T, f.values());
  const auto lu = laplacian(g, VertexFunction(u));
  const auto gr = gamma(g, VertexFunction(detail::sqrt_of(u)));
  const double slope = 0.5 * (1.0 - 2.0 * K * T / (2.0 * b + 1.0));
  const double offset = 0.5 * n * (b * b / ((2.0 * b - 1.0) * T) + K * K * T / (2.0 * b + 1.0) - K);
  r.constants["offset"] = offset;
  r.constants["slope"] = slope;
  for (VertexId x = 0; x < g.size(); ++x) r.record(g.name(x), T, gr[x] / u[x], slope * lu[x] / u[x] + offset);
  r.finish();
  return r;
}

// Gamma(sqrt u)/u - (d/dt sqrt u)/sqrt u <= n/(2t) with u = P_t f and the
// time derivative taken by central difference.
inline EstimateReport li_yau_derivative_form(const WeightedGraph& g, const VertexFunction& f, double t, double n,
                                             double step = 1e-4, double tolerance = 1e-9) {
  detail::require_positive_function(g, f);
  detail::require_finite(g, "li_yau_derivative_form");
  if (!(t > step)) fail(ErrorCode::invalid_argument, "t must exceed the difference step");
  EstimateReport r;
  r.kind = "li_yau_derivative";
  r.params = {{"t", t}, {"n", n}, {"step", step}};
  r.tolerance = tolerance;
  auto root = [&](double s) { return detail::sqrt_of(uniformized_apply(g, s, f.values())); };
  const auto ds = detail::richardson_difference(root, t, step);
  const auto su = root(t);
  const auto gr = gamma(g, VertexFunction(su));
  for (VertexId x = 0; x < g.size(); ++x)
    r.record(g.name(x), t, gr[x] / (su[x] * su[x]) - ds[x] / su[x], n / (2.0 * t));
  r.finish();
  return r;
}

// ---------------------------------------------------------------------------
// Harnack inequality p(t,x,y) <= p(s,x,z) (s/t)^n exp(4 D d(y,z)^2/(s-t)).

struct HarnackTuple {
  double t = 0.0;
  double s = 0.0;
  VertexId x = 0, y = 0, z = 0;
};

inline std::vector<HarnackTuple> random_harnack_tuples(const WeightedGraph& g, std::size_t count, std::uint64_t seed,
                                                       double t_min = 0.1, double t_max = 5.0) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<VertexId> vertex(0, g.size() - 1);
  std::uniform_real_distribution<double> logt(std::log(t_min), std::log(t_max));
  std::vector<HarnackTuple> out(count);
  for (auto& h : out) {
    double a = std::exp(logt(rng)), b = std::exp(logt(rng));
    if (a == b) b = a * 1.5;
    h.t = std::min(a, b);
    h.s = std::max(a, b);
    h.x = vertex(rng);
    h.y = vertex(rng);
    h.z = vertex(rng);
  }
  return out;
}

inline EstimateReport harnack_check(const WeightedGraph& g, double n, std::optional<double> D,
                                    const std::vector<HarnackTuple>& tuples, double tolerance = 1e-10,
                                    const Hypothesis& hyp = {}) {
  detail::check_dimension(n);
  for (const auto& h : tuples) {
    if (!(h.t > 0.0)) fail(ErrorCode::invalid_argument, "Harnack times must be positive");
    if (!(h.t < h.s)) fail(ErrorCode::invalid_argument, "Harnack tuple needs t < s");
    if (h.x >= g.size() || h.y >= g.size() || h.z >= g.size())
      fail(ErrorCode::unknown_vertex, "Harnack tuple names a vertex outside the graph");
  }
  const auto metrics = graph_metrics(g);
  const double d_const = D ? *D : metrics.mu_max / metrics.omega_min;
  EstimateReport r;
  r.kind = "harnack";
  r.params = {{"n", n}, {"D", d_const}};
  r.tolerance = tolerance;
  r.constants["constant_equal_points_s_2t"] = std::pow(2.0, n);
  annotate(r, hyp);
  const detail::KernelSource kernel(g);
  std::vector<double> lhs(tuples.size()), rhs(tuples.size());
  parallel_for(tuples.size(), [&](std::size_t i) {
    const auto& h = tuples[i];
    const auto d = static_cast<double>(hop_distances(g, h.y)[h.z]);
    lhs[i] = kernel(h.t, h.x, h.y);
    const double log_factor = n * std::log(h.s / h.t) + 4.0 * d_const * d * d / (h.s - h.t);
    rhs[i] = log_factor > 700.0 ? std::numeric_limits<double>::infinity()
                                : kernel(h.s, h.x, h.z) * std::exp(log_factor);
  });
  std::size_t overflow = 0;
  for (std::size_t i = 0; i < tuples.size(); ++i) {
    const auto& h = tuples[i];
    if (!std::isfinite(rhs[i])) {
      ++overflow;
      continue;
    }
    r.record(g.name(h.x) + "|" + g.name(h.y) + "|" + g.name(h.z), h.t, lhs[i], rhs[i]);
  }
  r.constants["overflowing_bounds"] = static_cast<double>(overflow);
  if (overflow) r.note(std::to_string(overflow) + " tuples have an overflowing bound and hold trivially");
  r.finish();
  return r;
}

// ---------------------------------------------------------------------------
// Exponential integrability: P_{A r^2}(1_{B(x,r)})(x) >= rho.

// G(s) = (sqrt(1 + ns/2) - 1)/2 + (n/8) s log(1 + 2/(sqrt(1 + ns/2) - 1)).
inline double exp_profile(double s, double n) {
  if (!(s > 0.0)) return 0.0;
  const double x = 0.5 * n * s;
  const double q = x / (std::sqrt(1.0 + x) + 1.0);  // sqrt(1 + x) - 1 without cancellation
  return 0.5 * q + 0.125 * n * s * std::log1p(2.0 / q);
}

// Integral of G(t)/t^2 over [1/A, inf). With t = 1/v^2 it becomes the
// integral of 2 v G(1/v^2) over (0, sqrt(A)], whose integrand is bounded.
inline double exp_profile_integral(double A, double n, double tolerance = 1e-12) {
  if (!(A > 0.0)) fail(ErrorCode::invalid_argument, "A must be positive");
  double error = 0.0;
  auto integrand = [&](double v) { return v > 0.0 ? 2.0 * v * exp_profile(1.0 / (v * v), n) : std::sqrt(2.0 * n); };
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, 0.0, std::sqrt(A), 15, tolerance, &error);
  if (!(error <= 1e3 * tolerance * std::max(1.0, std::abs(value))))
    fail(ErrorCode::no_convergence, "quadrature for the integrability profile did not converge");
  return value;
}

struct ExpIntegrabilityOptions {
  double rho_target = 0.1;
  int grid_levels = 40;  // A = 2^-k, k = 0..grid_levels
  double tolerance = 1e-12;
};

inline EstimateReport exp_integrability(const WeightedGraph& g, VertexId x, double r, double n,
                                        const ExpIntegrabilityOptions& opt = {}, const Hypothesis& hyp = {}) {
  detail::require_finite(g, "exp_integrability");
  detail::check_dimension(n);
  if (!(r > 0.5)) fail(ErrorCode::precondition, "radius must exceed 1/2");
  if (!(opt.rho_target > 0.0 && opt.rho_target < 1.0)) fail(ErrorCode::invalid_argument, "rho target must lie in (0, 1)");
  const double d_mu = graph_metrics(g).d_mu;
  const double root = std::sqrt(0.5 * d_mu);
  // lambda C(lambda) = 1/r with C(lambda) = sqrt(D_mu/2) e^lambda.
  const double lambda = boost::math::lambert_w0(1.0 / (r * root));
  const double c = root * std::exp(lambda);
  const double tail = std::exp(-2.0 / c);

  EstimateReport rep;
  rep.kind = "exp_integrability";
  rep.params = {{"r", r}, {"n", n}, {"rho_target", opt.rho_target}};
  rep.labels["vertex"] = g.name(x);
  rep.tolerance = opt.tolerance;
  rep.constants["lambda"] = lambda;
  rep.constants["C"] = c;
  rep.constants["D_mu"] = d_mu;
  annotate(rep, hyp);

  std::optional<double> chosen;
  double phi = 0.0, rho = 0.0;
  for (int k = 0; k <= opt.grid_levels; ++k) {
    const double A = std::ldexp(1.0, -k);
    phi = exp_profile_integral(A, n);
    rho = std::exp(-2.0 * phi) - tail;
    if (rho >= opt.rho_target) {
      chosen = A;
      break;
    }
  }
  if (!chosen) {
    rep.violation("no grid value of A reaches the rho target; the largest attainable is below " +
                  std::to_string(1.0 - tail));
    rep.finish();
    return rep;
  }
  const auto B = ball(g, x, r);
  std::vector<double> indicator(g.size(), 0.0);
  for (auto v : B.members) indicator[v] = 1.0;
  const double t = *chosen * r * r;
  const double measured = SpectralKernel::global(g).apply(t, indicator, g)[x];
  rep.constants["A"] = *chosen;
  rep.constants["phi"] = phi;
  rep.constants["rho"] = rho;
  rep.constants["measured"] = measured;
  rep.record(g.name(x), t, rho, measured);
  rep.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// Volume doubling.

namespace detail {
// V(x, R) for integer R = 0.. eccentricity.
inline std::vector<double> cumulative_volumes(const WeightedGraph& g, VertexId x) {
  const auto dist = hop_distances(g, x);
  std::size_t ecc = 0;
  for (auto d : dist) ecc = std::max(ecc, d);
  std::vector<double> v(ecc + 1, 0.0);
  for (VertexId y = 0; y < g.size(); ++y) v[dist[y]] += g.measure(y);
  for (std::size_t k = 1; k < v.size(); ++k) v[k] += v[k - 1];
  return v;
}

inline double volume_at(const std::vector<double>& cumulative, double r) {
  const auto k = static_cast<std::size_t>(std::floor(r));
  return cumulative[std::min(k, cumulative.size() - 1)];
}
}  // namespace detail

// Radius grid: 1/4 (standing for r < 1/2) and the multiples of 1/2 up to r_max.
inline std::vector<double> doubling_grid(double r_max) {
  std::vector<double> grid{0.25};
  for (int k = 1; 0.5 * k <= r_max + 1e-12; ++k) grid.push_back(0.5 * k);
  return grid;
}

inline EstimateReport doubling_report(const WeightedGraph& g, std::vector<VertexId> centers, double r_max,
                                      double tolerance = 1e-12) {
  if (!(r_max > 0.0)) fail(ErrorCode::invalid_argument, "r_max must be positive");
  if (centers.empty())
    for (VertexId x = 0; x < g.size(); ++x) centers.push_back(x);
  const auto grid = doubling_grid(r_max);
  std::vector<std::vector<double>> volumes(centers.size());
  parallel_for(centers.size(), [&](std::size_t i) { volumes[i] = detail::cumulative_volumes(g, centers[i]); });

  EstimateReport rep;
  rep.kind = "doubling";
  rep.params = {{"r_max", r_max}, {"centers", static_cast<double>(centers.size())}};
  rep.tolerance = tolerance;
  double C = 1.0;
  for (const auto& v : volumes)
    for (double r : grid) C = std::max(C, detail::volume_at(v, 2.0 * r) / detail::volume_at(v, r));
  const double exponent = std::log2(C);
  rep.constants["C_doubling"] = C;
  rep.constants["exponent"] = exponent;
  for (std::size_t i = 0; i < centers.size(); ++i) {
    const auto& v = volumes[i];
    const auto& name = g.name(centers[i]);
    // Doubling rows carry the ratio itself against C.
    for (double r : grid) rep.record(name, r, detail::volume_at(v, 2.0 * r) / detail::volume_at(v, r), C);
    for (std::size_t a = 0; a < grid.size(); ++a)
      for (std::size_t b = a + 1; b < grid.size(); ++b) {
        const double s = grid[a], r = grid[b];
        char key[64];
        std::snprintf(key, sizeof key, "|s=%g", s);
        rep.record(name + key, r, detail::volume_at(v, r), C * std::pow(r / s, exponent) * detail::volume_at(v, s));
      }
  }
  rep.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// On-diagonal ratios p(2r^2,x,x) V(x,r), p(4r^2,x,x) V(x,2r) and the
// Cauchy-Schwarz step (P_{r^2} h(x))^2 <= p(2r^2,x,x) V(x,r) for the cutoff
// h = clamp(2 - 2 d(x,.)/r, 0, 1).
inline EstimateReport on_diagonal_bounds(const WeightedGraph& g, VertexId x, const std::vector<double>& radii,
                                         double tolerance = 1e-12, const Hypothesis& hyp = {}) {
  detail::require_finite(g, "on_diagonal_bounds");
  const auto k = SpectralKernel::global(g);
  const auto dist = hop_distances(g, x);
  const auto vol = detail::cumulative_volumes(g, x);
  EstimateReport rep;
  rep.kind = "on_diagonal";
  rep.labels["vertex"] = g.name(x);
  rep.tolerance = tolerance;
  annotate(rep, hyp);
  double lo_min = INFINITY, lo_max = 0.0, hi_min = INFINITY, hi_max = 0.0;
  for (double r : radii) {
    if (!(r > 0.5)) fail(ErrorCode::precondition, "radius must exceed 1/2");
    const double lower = k(2.0 * r * r, x, x) * detail::volume_at(vol, r);
    const double upper = k(4.0 * r * r, x, x) * detail::volume_at(vol, 2.0 * r);
    lo_min = std::min(lo_min, lower);
    lo_max = std::max(lo_max, lower);
    hi_min = std::min(hi_min, upper);
    hi_max = std::max(hi_max, upper);
    char key[64];
    std::snprintf(key, sizeof key, "ratio_lower_r%g", r);
    rep.constants[key] = lower;
    std::snprintf(key, sizeof key, "ratio_upper_r%g", r);
    rep.constants[key] = upper;
    std::vector<double> h(g.size());
    for (VertexId y = 0; y < g.size(); ++y)
      h[y] = std::clamp(2.0 - 2.0 * static_cast<double>(dist[y]) / r, 0.0, 1.0);
    const double ph = k.apply(r * r, h, g)[x];
    rep.record(g.name(x), r, ph * ph, lower);
  }
  rep.constants["ratio_lower_min"] = lo_min;
  rep.constants["ratio_lower_max"] = lo_max;
  rep.constants["ratio_upper_min"] = hi_min;
  rep.constants["ratio_upper_max"] = hi_max;
  rep.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// Coefficients of the binomial walk decomposition against the Poisson
// weights: a_k = e^{(alpha-1)n} n^k/k!, b_k = C(n,k) alpha^{n-k}, c_k = b_k/a_k.

struct CoefficientProfile {
  double alpha = 0.0;
  std::size_t n = 0;
  double a = 0.0;
  std::vector<double> log_a, log_b, log_c;
  double max_c = 0.0;
  std::size_t argmax = 0;
  double window_min_c = 0.0;
  std::size_t window_lo = 0, window_hi = 0;
  std::vector<std::string> notes;
};

inline constexpr std::size_t max_coefficient_steps = 10'000'000;

inline CoefficientProfile coefficient_compare(double alpha, std::size_t n, double a) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  if (!(a > 0.0)) fail(ErrorCode::invalid_argument, "window width a must be positive");
  if (n > max_coefficient_steps)
    fail(ErrorCode::invalid_argument, "n = " + std::to_string(n) + " is too large for overflow-safe coefficients");
  CoefficientProfile p;
  p.alpha = alpha;
  p.n = n;
  p.a = a;
  if (alpha > 0.25) p.notes.push_back("alpha exceeds 1/4; the comparison is only claimed for alpha <= 1/4");
  const double nn = static_cast<double>(n);
  const double lgn = std::lgamma(nn + 1.0);
  p.log_a.resize(n + 1);
  p.log_b.resize(n + 1);
  p.log_c.resize(n + 1);
  double best = -INFINITY;
  for (std::size_t k = 0; k <= n; ++k) {
    const double kk = static_cast<double>(k);
    p.log_a[k] = (alpha - 1.0) * nn + (k ? kk * std::log(nn) : 0.0) - std::lgamma(kk + 1.0);
    p.log_b[k] = lgn - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0) + (nn - kk) * std::log(alpha);
    p.log_c[k] = p.log_b[k] - p.log_a[k];
    if (p.log_c[k] > best) {
      best = p.log_c[k];
      p.argmax = k;
    }
  }
  p.max_c = std::exp(best);
  const double center = (1.0 - alpha) * nn, half = a * std::sqrt(nn);
  const double lo = std::max(0.0, std::ceil(center - half)), hi = std::min(nn, std::floor(center + half));
  if (lo > hi) {
    p.notes.push_back("window contains no integer k");
    p.window_min_c = NAN;
    return p;
  }
  p.window_lo = static_cast<std::size_t>(lo);
  p.window_hi = static_cast<std::size_t>(hi);
  double worst = INFINITY;
  for (std::size_t k = p.window_lo; k <= p.window_hi; ++k) worst = std::min(worst, p.log_c[k]);
  p.window_min_c = std::exp(worst);
  return p;
}

// p_n(x, .) rebuilt as sum_k C(n,k) alpha^{n-k} pbar_k(x, .) with the reduced
// walk pbar = p - alpha I.
inline std::vector<double> decomposed_kernel_row(const WeightedGraph& g, VertexId x, std::size_t n, double alpha) {
  std::vector<double> row(g.size(), 0.0), out(g.size(), 0.0);
  row[x] = 1.0;
  const double nn = static_cast<double>(n);
  for (std::size_t k = 0;; ++k) {
    const double kk = static_cast<double>(k);
    const double w = std::exp(std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0)) *
                     std::pow(alpha, nn - kk);
    for (VertexId y = 0; y < g.size(); ++y) out[y] += w * row[y];
    if (k == n) break;
    std::vector<double> next(g.size(), 0.0);
    for (VertexId y = 0; y < g.size(); ++y) {
      if (row[y] == 0.0) continue;
      next[y] -= alpha * row[y];
      for (const auto& nb : g.neighbors(y)) next[nb.vertex] += row[y] * nb.weight / g.degree(y);
    }
    row = std::move(next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Discrete-time Gaussian sandwich
//   c_l m(y)/V(x,sqrt n) e^{-C_l d^2/n} <= p_n(x,y) <= C_r m(y)/V(x,sqrt n) e^{-c_r d^2/n}
// over all x, y and 1 <= n <= n_max with d(x,y) <= n.
//
// With q = p_n V/m and z = d^2/n, let Q0 and q0 be the largest and smallest
// q at d = 0. The upper fit takes the largest grid c_r with
// max q e^{c_r z} <= upper_factor Q0; the lower fit takes the smallest grid C_l
// with min q e^{C_l z} >= lower_factor q0. Both then hold on every sample.

struct GaussianFitOptions {
  double upper_factor = 2.0;
  double lower_factor = 0.5;
  double grid_step = 1e-3;
  double grid_max = 20.0;
  std::vector<VertexId> centers;  // empty: all vertices
};

inline EstimateReport gaussian_fit(const WeightedGraph& g, std::size_t n_max, const GaussianFitOptions& opt = {}) {
  if (n_max < 1) fail(ErrorCode::invalid_argument, "n_max must be at least 1");
  auto centers = opt.centers;
  if (centers.empty())
    for (VertexId x = 0; x < g.size(); ++x) centers.push_back(x);

  EstimateReport rep;
  rep.kind = "gaussian";
  rep.params = {{"n_max", static_cast<double>(n_max)},
                {"upper_factor", opt.upper_factor},
                {"lower_factor", opt.lower_factor}};
  rep.tolerance = 1e-12;
  if (g.measure_mode() != MeasureMode::degree) rep.note("measure is not the degree measure");
  const double alpha = largest_delta_alpha(g);
  rep.constants["alpha"] = alpha;
  if (!(alpha > 0.0)) rep.note("the lazy-walk condition fails: some vertex has no loop");

  // Per (d, n) bin: smallest and largest q.
  const std::size_t stride = n_max + 1;
  struct Bins {
    std::vector<double> lo, hi;
    std::size_t eligible = 0, zeros = 0;
    std::string first_zero;
  };
  std::vector<Bins> per(centers.size());
  parallel_for(centers.size(), [&](std::size_t i) {
    const VertexId x = centers[i];
    auto& b = per[i];
    b.lo.assign(stride * stride, INFINITY);
    b.hi.assign(stride * stride, -INFINITY);
    const auto rows = discrete_kernel_rows(g, x, n_max);
    const auto dist = hop_distances(g, x);
    const auto vol = detail::cumulative_volumes(g, x);
    for (std::size_t n = 1; n <= n_max; ++n) {
      std::size_t R = 0;
      while ((R + 1) * (R + 1) <= n) ++R;
      const double V = vol[std::min(R, vol.size() - 1)];
      for (VertexId y = 0; y < g.size(); ++y) {
        const std::size_t d = dist[y];
        if (d > n) continue;
        ++b.eligible;
        const double p = rows[n][y];
        if (p <= 0.0) {
          if (!b.zeros++)
            b.first_zero = "n=" + std::to_string(n) + ", x=" + g.name(x) + ", y=" + g.name(y);
          continue;
        }
        const double q = p * V / g.degree(y);
        auto& lo = b.lo[d * stride + n];
        auto& hi = b.hi[d * stride + n];
        lo = std::min(lo, q);
        hi = std::max(hi, q);
      }
    }
  });
  std::vector<double> lo(stride * stride, INFINITY), hi(stride * stride, -INFINITY);
  std::size_t eligible = 0, zeros = 0;
  std::string first_zero;
  for (auto& b : per) {
    for (std::size_t i = 0; i < lo.size(); ++i) {
      lo[i] = std::min(lo[i], b.lo[i]);
      hi[i] = std::max(hi[i], b.hi[i]);
    }
    eligible += b.eligible;
    if (b.zeros && first_zero.empty()) first_zero = b.first_zero;
    zeros += b.zeros;
  }
  rep.constants["eligible_samples"] = static_cast<double>(eligible);
  rep.constants["covered_samples"] = static_cast<double>(eligible - zeros);
  if (zeros) {
    rep.violation("parity: p_n(x,y) = 0 although d(x,y) <= n for " + std::to_string(zeros) +
                  " samples (first " + first_zero + "); the walk is not lazy enough for a Gaussian lower bound");
    rep.finish();
    return rep;
  }

  struct Sample {
    std::size_t d, n;
    double z, lo, hi;
  };
  std::vector<Sample> samples;
  double Q0 = 0.0, q0 = INFINITY;
  for (std::size_t d = 0; d <= n_max; ++d)
    for (std::size_t n = std::max<std::size_t>(d, 1); n <= n_max; ++n) {
      const std::size_t i = d * stride + n;
      if (!std::isfinite(lo[i])) continue;
      const double z = static_cast<double>(d * d) / static_cast<double>(n);
      samples.push_back({d, n, z, lo[i], hi[i]});
      if (d == 0) {
        Q0 = std::max(Q0, hi[i]);
        q0 = std::min(q0, lo[i]);
      }
    }
  auto upper_at = [&](double c) {
    double m = 0.0;
    for (const auto& s : samples) m = std::max(m, s.hi * std::exp(c * s.z));
    return m;
  };
  auto lower_at = [&](double C) {
    double m = INFINITY;
    for (const auto& s : samples) m = std::min(m, s.lo * std::exp(C * s.z));
    return m;
  };
  const auto steps = static_cast<std::size_t>(std::llround(opt.grid_max / opt.grid_step));
  double c_r = 0.0;
  bool capped = true;
  for (std::size_t k = 1; k <= steps; ++k) {
    const double c = opt.grid_step * static_cast<double>(k);
    if (upper_at(c) > opt.upper_factor * Q0) {
      capped = false;
      break;
    }
    c_r = c;
  }
  if (capped) rep.note("upper exponent reached the grid ceiling");
  const double C_r = upper_at(c_r);
  std::optional<double> C_l;
  for (std::size_t k = 0; k <= steps && !C_l; ++k) {
    const double C = opt.grid_step * static_cast<double>(k);
    if (lower_at(C) >= opt.lower_factor * q0) C_l = C;
  }
  if (!C_l) {
    rep.note("lower exponent did not reach its target on the grid");
    C_l = opt.grid_max;
  }
  const double c_l = lower_at(*C_l);
  rep.constants["c_l"] = c_l;
  rep.constants["C_l"] = *C_l;
  rep.constants["C_r"] = C_r;
  rep.constants["c_r"] = c_r;
  rep.constants["diagonal_min"] = q0;
  rep.constants["diagonal_max"] = Q0;
  for (const auto& s : samples) {
    const std::string key = "d=" + std::to_string(s.d);
    const double n = static_cast<double>(s.n);
    const double floor = c_l * std::exp(-*C_l * s.z), ceiling = C_r * std::exp(-c_r * s.z);
    // Relative residuals, since q spans many orders of magnitude.
    rep.record_residual("lower:" + key, n, floor, s.lo, (s.lo - floor) / s.lo);
    rep.record_residual("upper:" + key, n, s.hi, ceiling, (ceiling - s.hi) / s.hi);
  }
  rep.finish();
  return rep;
}

// ---------------------------------------------------------------------------
// Poincare constant: the smallest C with
//   sum_{B(x0,r)} m (f - f_B)^2 <= C r^2 sum_{x,y in B(x0,2r)} w_xy (f(y) - f(x))^2.
// Both forms ignore constants, so the problem is solved on functions with
// f(x0) = 0, where the energy form is positive definite when the outer ball
// is connected.

struct PoincareResult {
  double constant = NAN;
  std::vector<VertexId> outer;  // B(x0, 2r), sorted
  Eigen::VectorXd witness;      // values on outer, witness(x0) = 0
};

namespace detail {
inline bool induced_connected(const WeightedGraph& g, const std::vector<VertexId>& members) {
  std::vector<char> in(g.size(), 0), seen(g.size(), 0);
  for (auto v : members) in[v] = 1;
  std::vector<VertexId> stack{members.front()};
  seen[members.front()] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const auto v = stack.back();
    stack.pop_back();
    for (const auto& nb : g.neighbors(v))
      if (in[nb.vertex] && !seen[nb.vertex]) {
        seen[nb.vertex] = 1;
        ++count;
        stack.push_back(nb.vertex);
      }
  }
  return count == members.size();
}

// Mass and energy matrices over the outer ball.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> poincare_forms(const WeightedGraph& g,
                                                                  const std::vector<VertexId>& inner,
                                                                  const std::vector<VertexId>& outer) {
  const auto k = static_cast<Eigen::Index>(outer.size());
  std::vector<Eigen::Index> pos(g.size(), -1);
  for (Eigen::Index i = 0; i < k; ++i) pos[outer[i]] = i;
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(k, k), energy = Eigen::MatrixXd::Zero(k, k);
  double total = 0.0;
  for (auto v : inner) total += g.degree(v);
  for (auto u : inner)
    for (auto v : inner) mass(pos[u], pos[v]) -= g.degree(u) * g.degree(v) / total;
  for (auto v : inner) mass(pos[v], pos[v]) += g.degree(v);
  for (auto u : outer)
    for (const auto& nb : g.neighbors(u)) {
      if (nb.vertex == u || pos[nb.vertex] < 0) continue;
      // Ordered pairs: each edge contributes from both ends.
      const Eigen::Index i = pos[u], j = pos[nb.vertex];
      energy(i, i) += nb.weight;
      energy(j, j) += nb.weight;
      energy(i, j) -= nb.weight;
      energy(j, i) -= nb.weight;
    }
  return {mass, energy};
}
}  // namespace detail

inline PoincareResult poincare_solve(const WeightedGraph& g, VertexId x0, double r) {
  if (!(r > 0.0)) fail(ErrorCode::invalid_argument, "radius must be positive");
  PoincareResult res;
  const auto inner = ball(g, x0, r).members;
  res.outer = ball(g, x0, 2.0 * r).members;
  if (res.outer.size() < 2 || !detail::induced_connected(g, res.outer)) return res;
  auto [mass, energy] = detail::poincare_forms(g, inner, res.outer);
  const auto k = static_cast<Eigen::Index>(res.outer.size());
  const auto pin = static_cast<Eigen::Index>(std::lower_bound(res.outer.begin(), res.outer.end(), x0) - res.outer.begin());
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < k; ++i)
    if (i != pin) keep.push_back(i);
  const auto m = static_cast<Eigen::Index>(keep.size());
  Eigen::MatrixXd A(m, m), B(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < m; ++j) {
      A(i, j) = mass(keep[i], keep[j]);
      B(i, j) = energy(keep[i], keep[j]);
    }
  Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(A, B);
  if (solver.info() != Eigen::Success) fail(ErrorCode::no_convergence, "Poincare eigenproblem failed");
  const Eigen::Index top = m - 1;
  res.constant = solver.eigenvalues()(top) / (r * r);
  res.witness = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < m; ++i) res.witness(keep[i]) = solver.eigenvectors()(i, top);
  return res;
}

// Both sides of the Poincare inequality for a function on the whole graph.
inline std::pair<double, double> poincare_sides(const WeightedGraph& g, VertexId x0, double r, std::span<const double> f) {
  const auto inner = ball(g, x0, r).members;
  const auto outer = ball(g, x0, 2.0 * r);
  double total = 0.0, mean = 0.0;
  for (auto v : inner) {
    total += g.degree(v);
    mean += g.degree(v) * f[v];
  }
  mean /= total;
  double mass = 0.0, energy = 0.0;
  for (auto v : inner) mass += g.degree(v) * (f[v] - mean) * (f[v] - mean);
  for (auto u : outer.members)
    for (const auto& nb : g.neighbors(u))
      if (outer.contains(nb.vertex)) energy += nb.weight * (f[nb.vertex] - f[u]) * (f[nb.vertex] - f[u]);
  return {mass, energy};
}

inline EstimateReport poincare_constant(const WeightedGraph& g, VertexId x0, const std::vector<double>& radii) {
  EstimateReport rep;
  rep.kind = "poincare";
  rep.labels["vertex"] = g.name(x0);
  rep.tolerance = 1e-9;
  if (g.measure_mode() != MeasureMode::degree) rep.note("measure is not the degree measure");
  double worst = 0.0;
  for (double r : radii) {
    const auto res = poincare_solve(g, x0, r);
    if (std::isnan(res.constant)) {
      rep.violation("degenerate energy form: B(x0, 2r) is not connected within itself at r = " + std::to_string(r));
      continue;
    }
    char key[48];
    std::snprintf(key, sizeof key, "C_poincare_r%g", r);
    rep.constants[key] = res.constant;
    worst = std::max(worst, res.constant);
    std::vector<double> f(g.size(), 0.0);
    for (std::size_t i = 0; i < res.outer.size(); ++i) f[res.outer[i]] = res.witness(static_cast<Eigen::Index>(i));
    const auto [mass, energy] = poincare_sides(g, x0, r, f);
    const double bound = res.constant * r * r * energy;
    // Relative gap on the extremal function; zero up to rounding.
    rep.record_residual(g.name(x0), r, mass, bound, (bound - mass) / std::max(bound, 1e-300));
  }
  rep.constants["C_poincare"] = worst;
  rep.finish();
  return rep;
}

}  // namespace curvegraph
