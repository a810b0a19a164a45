#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "graph.hpp"
#include "operators.hpp"
#include "parallel.hpp"

namespace curvegraph {

// Curvature-dimension conditions, all of the form
//   A(f)(x) - (1/n) B(f)(x) >= K Gamma(f)(x)
// cd:        A = Gamma2,        B = (Lf)^2
// cde:       A = Gamma2_tilde,  B = (Lf)^2, only where Lf(x) < 0
// cde_prime: A = Gamma2_tilde,  B = f(x)^2 (L log f)^2
enum class Flavor { cd, cde, cde_prime };

inline const char* to_string(Flavor flavor) {
  switch (flavor) {
    case Flavor::cd: return "cd";
    case Flavor::cde: return "cde";
    case Flavor::cde_prime: return "cde_prime";
  }
  return "unknown";
}

inline Flavor parse_flavor(std::string_view text) {
  if (text == "cd") return Flavor::cd;
  if (text == "cde") return Flavor::cde;
  if (text == "cde_prime" || text == "cde'") return Flavor::cde_prime;
  fail(ErrorCode::invalid_argument, "unknown curvature flavor '" + std::string(text) + "'");
}

namespace detail {

inline void check_dimension(double n) {
  if (!(n > 0.0) || !std::isfinite(n)) fail(ErrorCode::invalid_argument, "dimension must be positive and finite");
}

// Numerator A - B/n of the condition at K = 0.
inline double curvature_numerator(const PointQuantities& q, Flavor flavor, double n) {
  switch (flavor) {
    case Flavor::cd: return q.gamma2 - q.laplacian * q.laplacian / n;
    case Flavor::cde: return q.gamma2_tilde - q.laplacian * q.laplacian / n;
    case Flavor::cde_prime: {
      const double s = q.value * q.laplace_log;
      return q.gamma2_tilde - s * s / n;
    }
  }
  return 0.0;
}

}  // namespace detail

inline double cd_residual(const WeightedGraph& g, const VertexFunction& f, VertexId x, double n, double K) {
  detail::check_dimension(n);
  auto q = point_quantities(g, f, x, false);
  return detail::curvature_numerator(q, Flavor::cd, n) - K * q.gamma;
}

// Empty when the condition does not apply at x (Lf(x) >= 0).
inline std::optional<double> cde_residual(const WeightedGraph& g, const VertexFunction& f, VertexId x, double n,
                                          double K) {
  detail::check_dimension(n);
  if (laplacian_at(g, f, x) >= 0.0) return std::nullopt;
  detail::require_positive(g, f, x, 2);
  auto q = point_quantities(g, f, x, true);
  return detail::curvature_numerator(q, Flavor::cde, n) - K * q.gamma;
}

inline double cde_prime_residual(const WeightedGraph& g, const VertexFunction& f, VertexId x, double n, double K) {
  detail::check_dimension(n);
  detail::require_positive(g, f, x, 2);
  auto q = point_quantities(g, f, x, true);
  return detail::curvature_numerator(q, Flavor::cde_prime, n) - K * q.gamma;
}

struct OptimizerOptions {
  int starts = 64;
  int max_iterations = 400;
  double tolerance = 1e-11;  // relative objective change counted as stalled
  double box = 8.0;          // bound on |log f| over the 2-ball
  double fd_step = 1e-6;
  double min_spread = 1e-4;  // smallest |log f(y)| kept on some neighbour of x
  std::uint64_t seed = 1;
};

// K_estimate is the smallest ratio (A - B/n) / Gamma found, hence an upper
// bound for the best constant K at x. The witness f = exp(g) is normalised
// to f(x) = 1 and defined on the closed 2-ball.
struct CurvatureEstimate {
  VertexId vertex = 0;
  Flavor flavor = Flavor::cd;
  double dimension = 0.0;
  double k_estimate = 0.0;
  double residual = 0.0;  // residual of the condition at K = k_estimate on the witness
  VertexFunction witness;
  int starts_used = 0;
  double converged_fraction = 0.0;
  double gradient_norm = 0.0;
};

namespace detail {

class LocalRatio {
 public:
  LocalRatio(const WeightedGraph& g, VertexId x, Flavor flavor, double n, const OptimizerOptions& opt)
      : g_(g), x_(x), flavor_(flavor), n_(n), opt_(opt), values_(g.size(), 1.0) {
    auto b2 = ball(g, x, 2.0);
    for (auto v : b2.members)
      if (v != x) vars_.push_back(v);
    for (std::size_t i = 0; i < vars_.size(); ++i)
      if (g.adjacent(x, vars_[i])) near_.push_back(i);
    double off = 0.0;
    for (const auto& nb : g.neighbors(x))
      if (nb.vertex != x) off += nb.weight;
    off_loop_degree_ = off;
    if (near_.empty())
      fail(ErrorCode::precondition, "vertex " + g.name(x) + " has no neighbour other than itself");
  }

  std::size_t dimension() const { return vars_.size(); }
  const std::vector<VertexId>& variables() const { return vars_; }

  PointQuantities quantities(const std::vector<double>& z) {
    if (flavor_ == Flavor::cde) {
      gated_ = z;
      apply_gate(gated_);
      load(gated_);
    } else {
      load(z);
    }
    auto f = [this](VertexId v) { return values_[v]; };
    return point_quantities(g_, f, x_, flavor_ != Flavor::cd);
  }

  double value(const std::vector<double>& z) {
    auto q = quantities(z);
    return curvature_numerator(q, flavor_, n_) / q.gamma;
  }

  void gradient(std::vector<double>& z, std::vector<double>& grad) {
    grad.resize(z.size());
    const double h = opt_.fd_step;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double keep = z[i];
      z[i] = keep + h;
      const double up = value(z);
      z[i] = keep - h;
      const double down = value(z);
      z[i] = keep;
      grad[i] = (up - down) / (2.0 * h);
    }
  }

  // Feasible set: box on log f and a minimal spread on the neighbours of x
  // so Gamma(f)(x) stays away from zero.
  void project(std::vector<double>& z) const {
    for (auto& v : z) v = std::clamp(v, -opt_.box, opt_.box);
    std::size_t widest = near_.front();
    for (auto i : near_)
      if (std::abs(z[i]) > std::abs(z[widest])) widest = i;
    if (std::abs(z[widest]) < opt_.min_spread) z[widest] = z[widest] < 0.0 ? -opt_.min_spread : opt_.min_spread;
  }

  // The cde condition only constrains f with Lf(x) < 0. Every point is
  // mapped into that region by shifting log f on the neighbours of x down
  // until mu(x) Lf(x) <= -delta m'(x), where m' excludes the loop. The map is
  // the identity on the region, so minimising through it minimises over the
  // region.
  void apply_gate(std::vector<double>& z) const {
    constexpr double delta = 1e-9;
    double s = 0.0;
    for (const auto& nb : g_.neighbors(x_))
      if (nb.vertex != x_) s += nb.weight * std::exp(z[index_of(nb.vertex)]);
    const double target = off_loop_degree_ * (1.0 - delta);
    if (s > target) {
      const double c = std::log(s / target);
      for (auto i : near_) z[i] -= c;
    }
  }

  bool feasible(const std::vector<double>& z) {
    if (flavor_ != Flavor::cde) return true;
    return quantities(z).laplacian < 0.0;
  }

  VertexFunction witness(std::vector<double> z) const {
    if (flavor_ == Flavor::cde) apply_gate(z);
    std::vector<double> vals(g_.size(), 0.0);
    std::vector<char> mask(g_.size(), 0);
    vals[x_] = 1.0;
    mask[x_] = 1;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      vals[vars_[i]] = std::exp(z[i]);
      mask[vars_[i]] = 1;
    }
    return VertexFunction(std::move(vals), std::move(mask));
  }

 private:
  void load(const std::vector<double>& z) {
    for (std::size_t i = 0; i < vars_.size(); ++i) values_[vars_[i]] = std::exp(z[i]);
  }

  std::size_t index_of(VertexId v) const {
    return static_cast<std::size_t>(std::lower_bound(vars_.begin(), vars_.end(), v) - vars_.begin());
  }

  const WeightedGraph& g_;
  VertexId x_;
  Flavor flavor_;
  double n_;
  const OptimizerOptions& opt_;
  std::vector<double> values_;
  std::vector<double> gated_;
  std::vector<VertexId> vars_;  // sorted
  std::vector<std::size_t> near_;
  double off_loop_degree_ = 0.0;
};

struct StartResult {
  std::vector<double> z;
  double value = std::numeric_limits<double>::infinity();
  double gradient_norm = std::numeric_limits<double>::infinity();
  bool converged = false;
  bool feasible = false;
};

inline double projected_step_norm(LocalRatio& obj, std::vector<double> z, const std::vector<double>& grad) {
  std::vector<double> moved(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) moved[i] = z[i] - grad[i];
  obj.project(moved);
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (moved[i] - z[i]) * (moved[i] - z[i]);
  return std::sqrt(s);
}

// Projected gradient descent with Barzilai-Borwein steps and Armijo
// backtracking.
inline StartResult descend(LocalRatio& obj, std::vector<double> z, const OptimizerOptions& opt) {
  StartResult r;
  obj.project(z);
  double val = obj.value(z);
  std::vector<double> grad, next_grad, trial(z.size());
  obj.gradient(z, grad);
  double gnorm = 0.0;
  for (double v : grad) gnorm += v * v;
  double step = 1.0 / std::max(1.0, std::sqrt(gnorm));
  int stalled = 0;
  for (int it = 0; it < opt.max_iterations && std::isfinite(val); ++it) {
    bool accepted = false;
    double trial_val = val;
    for (int back = 0; back < 40; ++back) {
      for (std::size_t i = 0; i < z.size(); ++i) trial[i] = z[i] - step * grad[i];
      obj.project(trial);
      double decrease = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) decrease += grad[i] * (z[i] - trial[i]);
      trial_val = obj.value(trial);
      if (std::isfinite(trial_val) && trial_val < val - 1e-4 * std::max(0.0, decrease)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      r.converged = true;
      break;
    }
    obj.gradient(trial, next_grad);
    double ss = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
      const double s = trial[i] - z[i], y = next_grad[i] - grad[i];
      ss += s * s;
      sy += s * y;
    }
    step = sy > 0.0 ? std::clamp(ss / sy, 1e-12, 1e6) : std::min(step * 4.0, 1e6);
    const double gain = val - trial_val;
    z = trial;
    grad = next_grad;
    val = trial_val;
    stalled = gain <= opt.tolerance * (1.0 + std::abs(val)) ? stalled + 1 : 0;
    if (stalled >= 5) {
      r.converged = true;
      break;
    }
  }
  r.z = std::move(z);
  r.value = val;
  r.gradient_norm = projected_step_norm(obj, r.z, grad);
  r.feasible = std::isfinite(val) && obj.feasible(r.z);
  return r;
}

}  // namespace detail

// Multi-start search for the infimum of (A - B/n)/Gamma over positive f on
// the closed 2-ball of x with f(x) = 1.
inline CurvatureEstimate optimal_k(const WeightedGraph& g, VertexId x, Flavor flavor, double n,
                                   const OptimizerOptions& opt = {}) {
  detail::check_dimension(n);
  if (opt.starts < 1) fail(ErrorCode::invalid_argument, "optimizer needs at least one start");
  detail::LocalRatio obj(g, x, flavor, n, opt);
  const std::size_t dim = obj.dimension();
  std::mt19937_64 rng(mix_seed(opt.seed, x));
  static constexpr double spreads[] = {0.05, 0.4, 1.0, 2.5};

  detail::StartResult best;
  int converged = 0;
  int used = 0;
  for (int s = 0; s < opt.starts; ++s) {
    std::vector<double> z(dim);
    if (s == 0) {
      for (std::size_t i = 0; i < dim; ++i) z[i] = 0.01 * ((i % 2) ? -1.0 : 1.0) * static_cast<double>(i + 1);
    } else {
      std::normal_distribution<double> noise(0.0, spreads[static_cast<std::size_t>(s) % 4]);
      for (auto& v : z) v = noise(rng);
    }
    auto r = detail::descend(obj, std::move(z), opt);
    ++used;
    if (r.converged) ++converged;
    if (!r.feasible) continue;
    const bool better = r.value < best.value ||
                        (r.value == best.value && r.gradient_norm < best.gradient_norm);
    if (better) best = std::move(r);
  }
  if (!std::isfinite(best.value))
    fail(ErrorCode::no_convergence, "no feasible start found at vertex " + g.name(x));

  CurvatureEstimate est;
  est.vertex = x;
  est.flavor = flavor;
  est.dimension = n;
  est.k_estimate = best.value;
  est.witness = obj.witness(best.z);
  auto q = obj.quantities(best.z);
  est.residual = detail::curvature_numerator(q, flavor, n) - best.value * q.gamma;
  est.starts_used = used;
  est.converged_fraction = static_cast<double>(converged) / used;
  est.gradient_norm = best.gradient_norm;
  return est;
}

inline std::vector<CurvatureEstimate> optimal_k_all(const WeightedGraph& g, Flavor flavor, double n,
                                                    const OptimizerOptions& opt = {}) {
  std::vector<CurvatureEstimate> out(g.size());
  parallel_for(g.size(), [&](std::size_t x) { out[x] = optimal_k(g, x, flavor, n, opt); });
  return out;
}

struct CertifyOptions {
  Flavor flavor = Flavor::cde_prime;
  double tolerance = 1e-7;  // K_estimate >= -tolerance counts as nonnegative
  OptimizerOptions optimizer;
};

// Per vertex: the smallest grid dimension whose curvature estimate is
// nonnegative, searched by bisection since the estimate grows with n.
// `dimension` is the maximum over vertices, empty if some vertex fails
// even at the largest grid value.
struct Certification {
  std::vector<double> grid;
  std::vector<std::optional<double>> vertex_dimension;
  std::vector<CurvatureEstimate> estimates;  // at the certified dimension, or the largest grid value
  std::optional<double> dimension;
  std::vector<VertexId> failed;
};

inline Certification certify_nonnegative(const WeightedGraph& g, std::vector<double> grid,
                                         const CertifyOptions& opt = {}) {
  if (grid.empty()) fail(ErrorCode::invalid_argument, "dimension grid is empty");
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  for (double n : grid) detail::check_dimension(n);

  Certification cert;
  cert.grid = grid;
  cert.vertex_dimension.assign(g.size(), std::nullopt);
  cert.estimates.resize(g.size());
  parallel_for(g.size(), [&](std::size_t x) {
    auto ok = [&](std::size_t i, CurvatureEstimate& out) {
      out = optimal_k(g, x, opt.flavor, grid[i], opt.optimizer);
      return out.k_estimate >= -opt.tolerance;
    };
    CurvatureEstimate top;
    if (!ok(grid.size() - 1, top)) {
      cert.estimates[x] = std::move(top);
      return;
    }
    std::size_t lo = 0, hi = grid.size() - 1;
    CurvatureEstimate best = std::move(top);
    while (lo < hi) {
      std::size_t mid = lo + (hi - lo) / 2;
      CurvatureEstimate probe;
      if (ok(mid, probe)) {
        hi = mid;
        best = std::move(probe);
      } else {
        lo = mid + 1;
      }
    }
    cert.vertex_dimension[x] = grid[hi];
    cert.estimates[x] = std::move(best);
  });
  double worst = 0.0;
  for (VertexId x = 0; x < g.size(); ++x) {
    if (!cert.vertex_dimension[x]) {
      cert.failed.push_back(x);
      continue;
    }
    worst = std::max(worst, *cert.vertex_dimension[x]);
  }
  if (cert.failed.empty()) cert.dimension = worst;
  return cert;
}

}  // namespace curvegraph
