#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "graph.hpp"

namespace curvegraph {

// Real function on the vertices, possibly defined only on a subset. Reading
// an undefined value through operator() raises ErrorCode::missing_value, so
// operators evaluated outside their domain of definition refuse loudly.
class VertexFunction {
 public:
  VertexFunction() = default;

  explicit VertexFunction(std::vector<double> values)
      : values_(std::move(values)), defined_(values_.size(), 1) {
    refresh();
  }

  VertexFunction(std::vector<double> values, std::vector<char> defined)
      : values_(std::move(values)), defined_(std::move(defined)) {
    if (values_.size() != defined_.size()) fail(ErrorCode::invalid_argument, "mask length mismatch");
    refresh();
  }

  static VertexFunction constant(std::size_t n, double c) { return VertexFunction(std::vector<double>(n, c)); }

  static VertexFunction undefined(std::size_t n) {
    return VertexFunction(std::vector<double>(n, 0.0), std::vector<char>(n, 0));
  }

  std::size_t size() const noexcept { return values_.size(); }
  bool is_defined(VertexId x) const { return defined_[x] != 0; }
  bool is_total() const noexcept { return defined_count_ == values_.size(); }
  std::size_t defined_count() const noexcept { return defined_count_; }

  double operator()(VertexId x) const {
    if (x >= values_.size() || !defined_[x])
      fail(ErrorCode::missing_value, "function value at vertex #" + std::to_string(x) + " is not available");
    return values_[x];
  }

  // Unchecked access; undefined entries read as 0.
  double operator[](VertexId x) const noexcept { return values_[x]; }

  std::span<const double> values() const noexcept { return values_; }
  std::span<const char> mask() const noexcept { return defined_; }

  // Largest defined value, -inf when nothing is defined.
  double max_value() const noexcept { return max_; }

 private:
  void refresh() {
    defined_count_ = 0;
    max_ = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < values_.size(); ++i) {
      if (!defined_[i]) {
        values_[i] = 0.0;
        continue;
      }
      ++defined_count_;
      max_ = std::max(max_, values_[i]);
    }
  }

  std::vector<double> values_;
  std::vector<char> defined_;
  std::size_t defined_count_ = 0;
  double max_ = -std::numeric_limits<double>::infinity();
};

template <class F>
concept VertexValues = requires(const F& f, VertexId x) {
  { f(x) } -> std::convertible_to<double>;
};

// Pointwise transforms; undefined entries stay undefined.
template <class Op>
VertexFunction transform(const VertexFunction& f, Op op) {
  std::vector<double> out(f.size());
  std::vector<char> mask(f.mask().begin(), f.mask().end());
  for (VertexId x = 0; x < f.size(); ++x)
    if (mask[x]) out[x] = op(f[x]);
  return VertexFunction(std::move(out), std::move(mask));
}

template <class Op>
VertexFunction combine(const VertexFunction& f, const VertexFunction& h, Op op) {
  if (f.size() != h.size()) fail(ErrorCode::invalid_argument, "function sizes differ");
  std::vector<double> out(f.size());
  std::vector<char> mask(f.size());
  for (VertexId x = 0; x < f.size(); ++x) {
    mask[x] = f.is_defined(x) && h.is_defined(x);
    if (mask[x]) out[x] = op(f[x], h[x]);
  }
  return VertexFunction(std::move(out), std::move(mask));
}

// Relative floor below which a value counts as zero for operators that
// divide by f or take its logarithm.
inline constexpr double positivity_threshold = 1e-12;

// ---------------------------------------------------------------------------
// Pointwise operators on any value accessor. Loops never contribute because
// their difference term vanishes.

// (1/mu(x)) sum_y w_xy h(y)
template <class H>
double averaged_sum(const WeightedGraph& g, VertexId x, const H& h) {
  double s = 0.0;
  for (const auto& nb : g.neighbors(x)) s += nb.weight * h(nb.vertex);
  return s / g.measure(x);
}

template <VertexValues F>
double laplacian_at(const WeightedGraph& g, const F& f, VertexId x) {
  const double fx = f(x);
  double s = 0.0;
  for (const auto& nb : g.neighbors(x))
    if (nb.vertex != x) s += nb.weight * (f(nb.vertex) - fx);
  return s / g.measure(x);
}

template <VertexValues F, VertexValues H>
double gamma_at(const WeightedGraph& g, const F& f, const H& h, VertexId x) {
  const double fx = f(x), hx = h(x);
  double s = 0.0;
  for (const auto& nb : g.neighbors(x))
    if (nb.vertex != x) s += nb.weight * (f(nb.vertex) - fx) * (h(nb.vertex) - hx);
  return 0.5 * s / g.measure(x);
}

template <VertexValues F>
double gamma_at(const WeightedGraph& g, const F& f, VertexId x) {
  const double fx = f(x);
  double s = 0.0;
  for (const auto& nb : g.neighbors(x))
    if (nb.vertex != x) {
      const double d = f(nb.vertex) - fx;
      s += nb.weight * d * d;
    }
  return 0.5 * s / g.measure(x);
}

// 2 Gamma2(f, h) = Laplacian Gamma(f, h) - Gamma(f, Laplacian h) - Gamma(Laplacian f, h)
template <VertexValues F, VertexValues H>
double gamma2_at(const WeightedGraph& g, const F& f, const H& h, VertexId x) {
  const double fx = f(x), hx = h(x);
  const double gx = gamma_at(g, f, h, x);
  const double lfx = laplacian_at(g, f, x), lhx = laplacian_at(g, h, x);
  double lap_gamma = 0.0, mixed = 0.0;
  for (const auto& nb : g.neighbors(x)) {
    const VertexId y = nb.vertex;
    if (y == x) continue;
    const double gy = gamma_at(g, f, h, y);
    const double lfy = laplacian_at(g, f, y), lhy = laplacian_at(g, h, y);
    lap_gamma += nb.weight * (gy - gx);
    mixed += nb.weight * ((f(y) - fx) * (lhy - lhx) + (lfy - lfx) * (h(y) - hx));
  }
  const double mu = g.measure(x);
  return 0.5 * (lap_gamma / mu - 0.5 * mixed / mu);
}

template <VertexValues F>
double gamma2_at(const WeightedGraph& g, const F& f, VertexId x) {
  return gamma2_at(g, f, f, x);
}

template <VertexValues F>
double laplace_log_at(const WeightedGraph& g, const F& f, VertexId x) {
  const double lx = std::log(f(x));
  double s = 0.0;
  for (const auto& nb : g.neighbors(x))
    if (nb.vertex != x) s += nb.weight * (std::log(f(nb.vertex)) - lx);
  return s / g.measure(x);
}

// All local quantities of f at x from one sweep over the 2-neighbourhood.
struct PointQuantities {
  double value = 0.0;
  double laplacian = 0.0;
  double gamma = 0.0;
  double gamma2 = 0.0;
  double gamma2_tilde = 0.0;  // only with positive f
  double laplace_log = 0.0;   // only with positive f
};

template <VertexValues F>
PointQuantities point_quantities(const WeightedGraph& g, const F& f, VertexId x, bool positive) {
  PointQuantities q;
  const double fx = f(x);
  q.value = fx;
  q.laplacian = laplacian_at(g, f, x);
  q.gamma = gamma_at(g, f, x);
  double lap_gamma = 0.0, grad_lap = 0.0, grad_ratio = 0.0, lap_log = 0.0;
  const double ratio_x = positive ? q.gamma / fx : 0.0;
  const double log_x = positive ? std::log(fx) : 0.0;
  for (const auto& nb : g.neighbors(x)) {
    const VertexId y = nb.vertex;
    if (y == x) continue;
    const double fy = f(y);
    const double gy = gamma_at(g, f, y);
    const double ly = laplacian_at(g, f, y);
    lap_gamma += nb.weight * (gy - q.gamma);
    grad_lap += nb.weight * (fy - fx) * (ly - q.laplacian);
    if (positive) {
      grad_ratio += nb.weight * (fy - fx) * (gy / fy - ratio_x);
      lap_log += nb.weight * (std::log(fy) - log_x);
    }
  }
  const double mu = g.measure(x);
  q.gamma2 = 0.5 * lap_gamma / mu - 0.5 * grad_lap / mu;
  if (positive) {
    q.gamma2_tilde = q.gamma2 - 0.5 * grad_ratio / mu;
    q.laplace_log = lap_log / mu;
  }
  return q;
}

// ---------------------------------------------------------------------------
// Checked entry points on VertexFunction.

namespace detail {

// f must be defined and above the positivity floor on the ball of the given
// radius around x.
inline void require_positive(const WeightedGraph& g, const VertexFunction& f, VertexId x, int radius) {
  const double floor = positivity_threshold * f.max_value();
  auto check = [&](VertexId v) {
    double value = f(v);
    if (!(value > 0.0) || value < floor)
      fail(ErrorCode::nonpositive_value,
           "function is not positive at vertex " + g.name(v) + " (value " + format_weight(value) + ")");
  };
  check(x);
  for (const auto& a : g.neighbors(x)) {
    check(a.vertex);
    if (radius > 1)
      for (const auto& b : g.neighbors(a.vertex)) check(b.vertex);
  }
}

inline bool neighbourhood_defined(const WeightedGraph& g, const VertexFunction& f, VertexId x, int radius) {
  if (!f.is_defined(x)) return false;
  for (const auto& a : g.neighbors(x)) {
    if (!f.is_defined(a.vertex)) return false;
    if (radius > 1)
      for (const auto& b : g.neighbors(a.vertex))
        if (!f.is_defined(b.vertex)) return false;
  }
  return true;
}

template <class Eval>
VertexFunction evaluate_where_defined(const WeightedGraph& g, std::initializer_list<const VertexFunction*> inputs,
                                      int radius, Eval eval) {
  const std::size_t n = g.size();
  std::vector<double> out(n, 0.0);
  std::vector<char> mask(n, 0);
  for (VertexId x = 0; x < n; ++x) {
    bool ok = true;
    for (const auto* f : inputs) ok = ok && neighbourhood_defined(g, *f, x, radius);
    if (!ok) continue;
    out[x] = eval(x);
    mask[x] = 1;
  }
  return VertexFunction(std::move(out), std::move(mask));
}

inline void check_size(const WeightedGraph& g, const VertexFunction& f) {
  if (f.size() != g.size()) fail(ErrorCode::invalid_argument, "function size does not match graph");
}

}  // namespace detail

inline double gamma2_tilde_at(const WeightedGraph& g, const VertexFunction& f, VertexId x) {
  detail::check_size(g, f);
  detail::require_positive(g, f, x, 2);
  return point_quantities(g, f, x, true).gamma2_tilde;
}

inline double laplace_log_checked(const WeightedGraph& g, const VertexFunction& f, VertexId x) {
  detail::check_size(g, f);
  detail::require_positive(g, f, x, 1);
  return laplace_log_at(g, f, x);
}

// Whole-function operators: the result is defined exactly where the needed
// neighbourhood of every input is defined.

inline VertexFunction laplacian(const WeightedGraph& g, const VertexFunction& f) {
  detail::check_size(g, f);
  return detail::evaluate_where_defined(g, {&f}, 1, [&](VertexId x) { return laplacian_at(g, f, x); });
}

inline VertexFunction gamma(const WeightedGraph& g, const VertexFunction& f, const VertexFunction& h) {
  detail::check_size(g, f);
  detail::check_size(g, h);
  return detail::evaluate_where_defined(g, {&f, &h}, 1, [&](VertexId x) { return gamma_at(g, f, h, x); });
}

inline VertexFunction gamma(const WeightedGraph& g, const VertexFunction& f) { return gamma(g, f, f); }

inline VertexFunction gamma2(const WeightedGraph& g, const VertexFunction& f, const VertexFunction& h) {
  detail::check_size(g, f);
  detail::check_size(g, h);
  return detail::evaluate_where_defined(g, {&f, &h}, 2, [&](VertexId x) { return gamma2_at(g, f, h, x); });
}

inline VertexFunction gamma2(const WeightedGraph& g, const VertexFunction& f) { return gamma2(g, f, f); }

inline VertexFunction gamma2_tilde(const WeightedGraph& g, const VertexFunction& f) {
  detail::check_size(g, f);
  return detail::evaluate_where_defined(g, {&f}, 2, [&](VertexId x) { return gamma2_tilde_at(g, f, x); });
}

inline VertexFunction laplace_log(const WeightedGraph& g, const VertexFunction& f) {
  detail::check_size(g, f);
  return detail::evaluate_where_defined(g, {&f}, 1, [&](VertexId x) { return laplace_log_checked(g, f, x); });
}

}  // namespace curvegraph
