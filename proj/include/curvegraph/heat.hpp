#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "graph.hpp"
#include "operators.hpp"

namespace curvegraph {

inline std::size_t poisson_cutoff(double t, double tol, double* bound = nullptr);

// Heat kernel of the Laplacian restricted to a vertex set U, with zero
// boundary values outside U. With U = V this is the kernel of the whole
// (finite) graph. p(t, x, y) is taken with respect to mu:
//   P_t f(x) = sum_y p(t, x, y) f(y) mu(y).
class SpectralKernel {
 public:
  SpectralKernel() = default;

  SpectralKernel(const WeightedGraph& g, std::vector<VertexId> domain) : n_(g.size()), domain_(std::move(domain)) {
    std::sort(domain_.begin(), domain_.end());
    domain_.erase(std::unique(domain_.begin(), domain_.end()), domain_.end());
    if (domain_.empty()) fail(ErrorCode::precondition, "heat kernel domain is empty");
    local_.assign(n_, npos);
    for (std::size_t i = 0; i < domain_.size(); ++i) local_[domain_.at(i)] = i;
    global_ = domain_.size() == n_;

    const auto k = static_cast<Eigen::Index>(domain_.size());
    Eigen::MatrixXd s = Eigen::MatrixXd::Zero(k, k);
    Eigen::VectorXd inv_sqrt_mu(k);
    for (Eigen::Index i = 0; i < k; ++i) inv_sqrt_mu(i) = 1.0 / std::sqrt(g.measure(domain_[i]));
    for (Eigen::Index i = 0; i < k; ++i) {
      const VertexId x = domain_[i];
      s(i, i) = (g.degree(x) - g.loop_weight(x)) * inv_sqrt_mu(i) * inv_sqrt_mu(i);
      for (const auto& nb : g.neighbors(x)) {
        if (nb.vertex == x || local_[nb.vertex] == npos) continue;
        const auto j = static_cast<Eigen::Index>(local_[nb.vertex]);
        s(i, j) = -nb.weight * inv_sqrt_mu(i) * inv_sqrt_mu(j);
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    if (es.info() != Eigen::Success) fail(ErrorCode::internal, "eigendecomposition failed");
    eigenvalues_ = es.eigenvalues().cwiseMax(0.0);
    modes_ = inv_sqrt_mu.asDiagonal() * es.eigenvectors();
    if (global_) eigenvalues_(0) = 0.0;
  }

  static SpectralKernel global(const WeightedGraph& g) {
    std::vector<VertexId> all(g.size());
    for (VertexId x = 0; x < g.size(); ++x) all[x] = x;
    return SpectralKernel(g, std::move(all));
  }

  // Kernel on the interior of a vertex set, skipping frontier vertices of a
  // truncation.
  static SpectralKernel dirichlet(const WeightedGraph& g, const std::vector<VertexId>& members) {
    std::vector<VertexId> dom;
    for (auto v : interior_of(g, members))
      if (!g.on_frontier(v)) dom.push_back(v);
    return SpectralKernel(g, std::move(dom));
  }

  static SpectralKernel from_parts(std::size_t graph_size, std::vector<VertexId> domain, Eigen::VectorXd eigenvalues,
                                   Eigen::MatrixXd modes) {
    SpectralKernel k;
    k.n_ = graph_size;
    k.domain_ = std::move(domain);
    k.local_.assign(graph_size, npos);
    for (std::size_t i = 0; i < k.domain_.size(); ++i) k.local_[k.domain_[i]] = i;
    k.global_ = k.domain_.size() == graph_size;
    k.eigenvalues_ = std::move(eigenvalues);
    k.modes_ = std::move(modes);
    return k;
  }

  std::size_t graph_size() const noexcept { return n_; }
  bool is_global() const noexcept { return global_; }
  const std::vector<VertexId>& domain() const noexcept { return domain_; }
  bool contains(VertexId v) const { return v < n_ && local_[v] != npos; }
  std::optional<std::size_t> local_index(VertexId v) const {
    if (!contains(v)) return std::nullopt;
    return local_[v];
  }
  const Eigen::VectorXd& eigenvalues() const noexcept { return eigenvalues_; }
  // Columns are eigenfunctions, orthonormal in l^2(mu) over the domain.
  const Eigen::MatrixXd& modes() const noexcept { return modes_; }

  double operator()(double t, VertexId x, VertexId y) const {
    check_time(t);
    if (!contains(x) || !contains(y)) return 0.0;
    const auto i = static_cast<Eigen::Index>(local_[x]), j = static_cast<Eigen::Index>(local_[y]);
    double s = 0.0;
    for (Eigen::Index k = 0; k < eigenvalues_.size(); ++k)
      s += std::exp(-eigenvalues_(k) * t) * modes_(i, k) * modes_(j, k);
    return s;
  }

  // p(t, ., .) on domain x domain.
  Eigen::MatrixXd matrix(double t) const {
    check_time(t);
    Eigen::VectorXd decay = (-eigenvalues_ * t).array().exp();
    return modes_ * decay.asDiagonal() * modes_.transpose();
  }

  // P_t f, evaluated on the whole graph (zero off the domain). Values of f
  // off the domain are ignored.
  std::vector<double> apply(double t, std::span<const double> f, const WeightedGraph& g) const {
    return propagate(t, f, g, 0);
  }

  // d/dt P_t f = L P_t f.
  std::vector<double> apply_derivative(double t, std::span<const double> f, const WeightedGraph& g) const {
    return propagate(t, f, g, 1);
  }

  VertexFunction semigroup(double t, const VertexFunction& f, const WeightedGraph& g) const {
    return VertexFunction(apply(t, f.values(), g));
  }

 private:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  static void check_time(double t) {
    if (!(t >= 0.0) || !std::isfinite(t)) fail(ErrorCode::invalid_argument, "time must be nonnegative");
  }

  std::vector<double> propagate(double t, std::span<const double> f, const WeightedGraph& g, int derivative) const {
    check_time(t);
    if (f.size() != n_) fail(ErrorCode::invalid_argument, "function size does not match graph");
    const auto k = static_cast<Eigen::Index>(domain_.size());
    Eigen::VectorXd weighted(k);
    for (Eigen::Index i = 0; i < k; ++i) weighted(i) = f[domain_[i]] * g.measure(domain_[i]);
    Eigen::VectorXd coeff = modes_.transpose() * weighted;
    for (Eigen::Index j = 0; j < k; ++j) {
      coeff(j) *= std::exp(-eigenvalues_(j) * t);
      if (derivative) coeff(j) *= -eigenvalues_(j);
    }
    Eigen::VectorXd local = modes_ * coeff;
    std::vector<double> out(n_, 0.0);
    for (Eigen::Index i = 0; i < k; ++i) out[domain_[i]] = local(i);
    return out;
  }

  std::size_t n_ = 0;
  std::vector<VertexId> domain_;
  std::vector<std::size_t> local_;
  bool global_ = false;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd modes_;
};

// p_U(t, ., .) on the Dirichlet domain of a ball. When the ball covers a
// finite graph that is not a truncation, the global kernel is returned.
struct DomainKernel {
  std::vector<VertexId> domain;
  Eigen::MatrixXd values;  // rows and columns follow domain
};

inline DomainKernel dirichlet_kernel(const WeightedGraph& g, const Ball& U, double t) {
  if (!(t > 0.0) || !std::isfinite(t)) fail(ErrorCode::invalid_argument, "time must be positive");
  const bool whole = U.members.size() == g.size() && !g.is_truncation();
  auto k = whole ? SpectralKernel::global(g) : SpectralKernel::dirichlet(g, U.members);
  if (k.domain().empty()) fail(ErrorCode::invalid_argument, "ball has an empty interior");
  return {k.domain(), k.matrix(t)};
}

// P_t f on a finite graph.
inline VertexFunction semigroup_apply(const WeightedGraph& g, const VertexFunction& f, double t) {
  if (f.size() != g.size()) fail(ErrorCode::invalid_argument, "function size does not match graph");
  if (!f.is_total()) fail(ErrorCode::missing_value, "semigroup needs a value at every vertex");
  for (VertexId x = 0; x < g.size(); ++x)
    if (!std::isfinite(f[x])) fail(ErrorCode::invalid_argument, "function value at " + g.name(x) + " is not finite");
  return SpectralKernel::global(g).semigroup(t, f, g);
}

// P_t f by uniformisation: e^{-c t} sum_k (c t)^k/k! S^k f with the
// nonnegative matrix S = I + L/c, c = max (m - loop)/mu. For nonnegative f
// every term is nonnegative, so tiny values keep their relative accuracy,
// which the spectral route loses below ~1e-15.
inline std::vector<double> uniformized_apply(const WeightedGraph& g, double t, std::span<const double> f) {
  if (!(t >= 0.0) || !std::isfinite(t)) fail(ErrorCode::invalid_argument, "time must be nonnegative");
  if (f.size() != g.size()) fail(ErrorCode::invalid_argument, "function size does not match graph");
  double rate = 0.0;
  for (VertexId x = 0; x < g.size(); ++x) rate = std::max(rate, (g.degree(x) - g.loop_weight(x)) / g.measure(x));
  std::vector<double> term(f.begin(), f.end());
  if (rate == 0.0 || t == 0.0) return term;
  const double ct = rate * t;
  // The tail is bounded by the Poisson mass, so 1e-300 leaves even the
  // smallest representable entries untouched.
  const std::size_t K = std::max<std::size_t>(poisson_cutoff(ct, 1e-300), 1);
  std::vector<double> out(g.size(), 0.0), next(g.size());
  for (std::size_t k = 0;; ++k) {
    const double kk = static_cast<double>(k);
    const double w = std::exp(-ct + kk * std::log(ct) - std::lgamma(kk + 1.0));
    for (VertexId x = 0; x < g.size(); ++x) out[x] += w * term[x];
    if (k == K) break;
    for (VertexId x = 0; x < g.size(); ++x) {
      double s = (1.0 - (g.degree(x) - g.loop_weight(x)) / (g.measure(x) * rate)) * term[x];
      for (const auto& nb : g.neighbors(x))
        if (nb.vertex != x) s += nb.weight / (g.measure(x) * rate) * term[nb.vertex];
      next[x] = s;
    }
    std::swap(term, next);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kernel on possibly infinite graphs.

struct HeatKernelOptions {
  double tolerance = 1e-8;
  std::size_t radius_budget = 64;
};

struct HeatKernelValue {
  double value = 0.0;
  bool exact = false;      // finite graph, computed directly
  bool converged = false;
  std::size_t radius = 0;  // exhaustion radius used
  double last_change = 0.0;
  std::string diagnostic;
};

// Exact on finite graphs. On truncations the value is the limit of the
// Dirichlet kernels of B(x, k), k = 1, 2, ..., stopped when successive
// values differ by less than the tolerance (and by less than sqrt(tolerance)
// relative to the value). The sequence is nondecreasing;
// a decrease beyond 1e-12 is an internal error.
inline HeatKernelValue heat_kernel(const WeightedGraph& g, VertexId x, VertexId y, double t,
                                   const HeatKernelOptions& opt = {}) {
  HeatKernelValue out;
  if (!g.is_truncation()) {
    out.value = SpectralKernel::global(g)(t, x, y);
    out.exact = out.converged = true;
    return out;
  }
  double previous = 0.0;
  std::size_t previous_size = 0;
  bool previous_defined = false;
  for (std::size_t k = 1; k <= opt.radius_budget; ++k) {
    auto b = ball(g, x, static_cast<double>(k));
    std::vector<VertexId> dom;
    for (auto v : b.interior)
      if (!g.on_frontier(v)) dom.push_back(v);
    if (k > 1 && dom.size() == previous_size) {
      out.diagnostic = "exhaustion stopped growing at radius " + std::to_string(k - 1) + " before converging";
      return out;
    }
    previous_size = dom.size();
    const bool defined = std::binary_search(dom.begin(), dom.end(), x) && std::binary_search(dom.begin(), dom.end(), y);
    const double value = defined ? SpectralKernel(g, dom)(t, x, y) : 0.0;
    if (value < previous - 1e-12)
      fail(ErrorCode::internal, "Dirichlet heat kernels decreased along the exhaustion");
    out.value = value;
    out.radius = k;
    out.last_change = value - previous;
    // Early Dirichlet kernels can be tiny at large t, so a small absolute
    // change alone proves nothing; the change must also be small relative
    // to the value.
    const double change = std::abs(value - previous);
    if (defined && previous_defined && change < opt.tolerance && change <= std::sqrt(opt.tolerance) * value) {
      out.converged = true;
      return out;
    }
    previous = value;
    previous_defined = defined;
  }
  out.diagnostic = "radius budget exhausted";
  return out;
}

// ---------------------------------------------------------------------------
// Discrete time: the random walk P(x, y) = w_xy / m(x).

// Rows p_0(x, .), ..., p_steps(x, .) of the transition powers.
inline std::vector<std::vector<double>> discrete_kernel_rows(const WeightedGraph& g, VertexId x, std::size_t steps) {
  std::vector<std::vector<double>> rows;
  rows.reserve(steps + 1);
  std::vector<double> r(g.size(), 0.0);
  r[x] = 1.0;
  rows.push_back(r);
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<double> next(g.size(), 0.0);
    for (VertexId y = 0; y < g.size(); ++y) {
      if (r[y] == 0.0) continue;
      const double share = r[y] / g.degree(y);
      for (const auto& nb : g.neighbors(y)) next[nb.vertex] += share * nb.weight;
    }
    r = std::move(next);
    rows.push_back(r);
  }
  return rows;
}

inline std::vector<double> discrete_kernel(const WeightedGraph& g, VertexId x, std::size_t n) {
  return discrete_kernel_rows(g, x, n).back();
}

struct PoissonBridge {
  double value = 0.0;        // e^{-t} sum_{k<=K} t^k/k! p_k(x, y)
  std::size_t terms = 0;     // K + 1
  double tail_bound = 0.0;   // bound on the omitted Poisson mass
};

// Smallest K whose Poisson tail sum_{k>K} e^{-t} t^k/k! is below tol, using
// w_{K+1} / (1 - t/(K+2)) as the bound once K + 2 > t.
inline std::size_t poisson_cutoff(double t, double tol, double* bound) {
  if (!(t >= 0.0) || !(tol > 0.0)) fail(ErrorCode::invalid_argument, "bad Poisson cutoff arguments");
  // Beyond this many terms the weights lose all precision in double.
  constexpr std::size_t max_terms = 10'000'000;
  for (std::size_t K = 0;; ++K) {
    if (K > max_terms)
      fail(ErrorCode::invalid_argument, "Poisson tolerance needs more than 1e7 terms at t = " + std::to_string(t));
    const double kk = static_cast<double>(K);
    if (kk + 2.0 <= t) continue;
    const double log_w = -t + (kk + 1.0) * std::log(std::max(t, 1e-300)) - std::lgamma(kk + 2.0);
    const double tail = t == 0.0 ? 0.0 : std::exp(log_w) / (1.0 - t / (kk + 2.0));
    if (tail < tol) {
      if (bound) *bound = tail;
      return K;
    }
  }
}

inline PoissonBridge poisson_bridge(const WeightedGraph& g, VertexId x, VertexId y, double t, double tol = 1e-12) {
  PoissonBridge out;
  const std::size_t K = poisson_cutoff(t, tol, &out.tail_bound);
  auto rows = discrete_kernel_rows(g, x, K);
  for (std::size_t k = 0; k <= K; ++k) {
    const double kk = static_cast<double>(k);
    const double log_w = t == 0.0 ? (k == 0 ? 0.0 : -INFINITY) : -t + kk * std::log(t) - std::lgamma(kk + 1.0);
    out.value += std::exp(log_w) * rows[k][y];
  }
  out.terms = K + 1;
  return out;
}

// ---------------------------------------------------------------------------
// Removes an alpha fraction of each loop and renormalises:
//   w'_xx = (w_xx - alpha m(x)) / (1 - alpha),  w'_xy = w_xy / (1 - alpha).
// Degrees and the measure are unchanged and L' = L / (1 - alpha).
inline WeightedGraph submarkov_transform(const WeightedGraph& g, double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail(ErrorCode::invalid_argument, "alpha must lie in (0, 1)");
  GraphBuilder b;
  for (VertexId x = 0; x < g.size(); ++x) b.add_vertex(g.name(x));
  for (VertexId x = 0; x < g.size(); ++x) {
    const double loop = g.loop_weight(x) - alpha * g.degree(x);
    if (loop < -1e-12 * g.degree(x))
      fail(ErrorCode::precondition, "loop at " + g.name(x) + " is lighter than alpha m(x)");
    if (loop > 1e-14 * g.degree(x)) b.add_edge(x, x, loop / (1.0 - alpha));
    for (const auto& nb : g.neighbors(x))
      if (nb.vertex > x) b.add_edge(x, nb.vertex, nb.weight / (1.0 - alpha));
  }
  // The measure is carried over verbatim (new degrees agree with the old
  // ones only up to rounding).
  auto out = g.measure_mode() == MeasureMode::unit
                 ? b.build(MeasureMode::unit)
                 : b.build(std::vector<double>(g.measures().begin(), g.measures().end()));
  return g.is_truncation() ? as_truncation(out, frontier_of(g)) : out;
}

// ---------------------------------------------------------------------------
// Binary cache of eigendecompositions, keyed by graph hash and domain.

namespace kernel_cache {

inline constexpr char magic[4] = {'C', 'G', 'E', 'K'};
inline constexpr std::uint32_t format_version = 1;

inline std::string domain_key(const std::vector<VertexId>& domain) {
  std::uint64_t h = 1469598103934665603ULL;
  for (auto v : domain)
    for (int b = 0; b < 8; ++b) {
      h ^= (static_cast<std::uint64_t>(v) >> (8 * b)) & 0xff;
      h *= 1099511628211ULL;
    }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

template <class T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) fail(ErrorCode::io_error, "truncated kernel cache");
  return v;
}

inline void save(std::ostream& out, const SpectralKernel& k, const std::string& graph_hash) {
  out.write(magic, 4);
  put(out, format_version);
  put(out, static_cast<std::uint64_t>(graph_hash.size()));
  out.write(graph_hash.data(), static_cast<std::streamsize>(graph_hash.size()));
  put(out, static_cast<std::uint64_t>(k.graph_size()));
  put(out, static_cast<std::uint64_t>(k.domain().size()));
  for (auto v : k.domain()) put(out, static_cast<std::uint64_t>(v));
  for (Eigen::Index i = 0; i < k.eigenvalues().size(); ++i) put(out, k.eigenvalues()(i));
  for (Eigen::Index j = 0; j < k.modes().cols(); ++j)
    for (Eigen::Index i = 0; i < k.modes().rows(); ++i) put(out, k.modes()(i, j));
}

// Empty when the stored entry belongs to another graph or domain.
inline std::optional<SpectralKernel> load(std::istream& in, const std::string& graph_hash,
                                          const std::vector<VertexId>& domain) {
  char m[4];
  in.read(m, 4);
  if (!in || std::memcmp(m, magic, 4) != 0) fail(ErrorCode::io_error, "not a kernel cache file");
  if (get<std::uint32_t>(in) != format_version) return std::nullopt;
  auto hash_len = get<std::uint64_t>(in);
  if (hash_len > 4096) fail(ErrorCode::io_error, "corrupt kernel cache");
  std::string hash(hash_len, '\0');
  in.read(hash.data(), static_cast<std::streamsize>(hash_len));
  if (hash != graph_hash) return std::nullopt;
  auto n = get<std::uint64_t>(in);
  auto k = get<std::uint64_t>(in);
  if (k != domain.size() || k > n) return std::nullopt;
  std::vector<VertexId> stored(k);
  for (auto& v : stored) v = static_cast<VertexId>(get<std::uint64_t>(in));
  if (stored != domain) return std::nullopt;
  const auto kk = static_cast<Eigen::Index>(k);
  Eigen::VectorXd values(kk);
  for (Eigen::Index i = 0; i < kk; ++i) values(i) = get<double>(in);
  Eigen::MatrixXd modes(kk, kk);
  for (Eigen::Index j = 0; j < kk; ++j)
    for (Eigen::Index i = 0; i < kk; ++i) modes(i, j) = get<double>(in);
  return SpectralKernel::from_parts(static_cast<std::size_t>(n), std::move(stored), std::move(values),
                                    std::move(modes));
}

// Loads the kernel from `dir` when present, otherwise computes and stores it.
inline SpectralKernel get_or_compute(const std::filesystem::path& dir, const WeightedGraph& g,
                                     std::vector<VertexId> domain) {
  std::sort(domain.begin(), domain.end());
  const auto hash = content_hash(g);
  const auto file = dir / (hash + "-" + domain_key(domain) + ".bin");
  if (std::ifstream in(file, std::ios::binary); in)
    if (auto k = load(in, hash, domain)) return *k;
  SpectralKernel k(g, domain);
  std::filesystem::create_directories(dir);
  std::ofstream out(file, std::ios::binary);
  if (!out) fail(ErrorCode::io_error, "cannot write kernel cache " + file.string());
  save(out, k, hash);
  return k;
}

}  // namespace kernel_cache

}  // namespace curvegraph
