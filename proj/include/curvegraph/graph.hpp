#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <queue>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "errors.hpp"

namespace curvegraph {

using VertexId = std::size_t;

enum class MeasureMode { unit, degree, custom };

inline const char* to_string(MeasureMode mode) {
  switch (mode) {
    case MeasureMode::unit: return "unit";
    case MeasureMode::degree: return "degree";
    case MeasureMode::custom: return "custom";
  }
  return "unknown";
}

inline MeasureMode parse_measure_mode(std::string_view text) {
  if (text == "unit") return MeasureMode::unit;
  if (text == "degree") return MeasureMode::degree;
  fail(ErrorCode::invalid_argument, "unknown measure mode '" + std::string(text) + "' (expected unit or degree)");
}

struct Neighbor {
  VertexId vertex;
  double weight;
};

class GraphBuilder;

// Connected, locally finite graph with symmetric positive edge weights and a
// positive vertex measure. A loop is stored once in the adjacency list of its
// vertex and counts once towards the weighted degree.
class WeightedGraph {
 public:
  WeightedGraph() = default;

  std::size_t size() const noexcept { return names_.size(); }

  std::span<const Neighbor> neighbors(VertexId x) const { return adjacency_[x]; }

  double weight(VertexId x, VertexId y) const {
    const auto& adj = adjacency_[x];
    auto it = std::lower_bound(adj.begin(), adj.end(), y,
                               [](const Neighbor& nb, VertexId v) { return nb.vertex < v; });
    return (it != adj.end() && it->vertex == y) ? it->weight : 0.0;
  }

  bool adjacent(VertexId x, VertexId y) const { return weight(x, y) > 0.0; }
  double loop_weight(VertexId x) const { return weight(x, x); }
  bool has_loop(VertexId x) const { return loop_weight(x) > 0.0; }

  double degree(VertexId x) const { return degree_[x]; }
  double measure(VertexId x) const { return measure_[x]; }
  std::span<const double> degrees() const noexcept { return degree_; }
  std::span<const double> measures() const noexcept { return measure_; }
  MeasureMode measure_mode() const noexcept { return mode_; }

  const std::string& name(VertexId x) const { return names_[x]; }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::optional<VertexId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  VertexId index_of(std::string_view name) const {
    if (auto id = find(name)) return *id;
    fail(ErrorCode::unknown_vertex, "unknown vertex '" + std::string(name) + "'");
  }

  double total_measure() const {
    double s = 0.0;
    for (double v : measure_) s += v;
    return s;
  }

  std::size_t edge_count() const {
    std::size_t count = 0;
    for (VertexId x = 0; x < size(); ++x)
      for (const auto& nb : adjacency_[x])
        if (nb.vertex >= x) ++count;
    return count;
  }

  // Set for finite pieces that stand in for an infinite graph. Heat kernel
  // evaluation on such graphs goes through the exhaustion limit.
  bool is_truncation() const noexcept { return truncation_; }

  // Vertices of a truncation whose neighbourhood in the infinite graph is
  // cut off. They never belong to a Dirichlet domain.
  bool on_frontier(VertexId x) const { return !frontier_.empty() && frontier_[x]; }

 private:
  friend class GraphBuilder;
  friend WeightedGraph with_measure(const WeightedGraph&, MeasureMode);
  friend WeightedGraph with_custom_measure(const WeightedGraph&, std::vector<double>);
  friend WeightedGraph as_truncation(const WeightedGraph&, std::vector<VertexId>);

  std::vector<std::string> names_;
  std::unordered_map<std::string, VertexId> index_;
  std::vector<std::vector<Neighbor>> adjacency_;
  std::vector<double> degree_;
  std::vector<double> measure_;
  MeasureMode mode_ = MeasureMode::unit;
  bool truncation_ = false;
  std::vector<char> frontier_;
};

class GraphBuilder {
 public:
  VertexId add_vertex(std::string_view name) {
    auto key = std::string(name);
    if (auto it = index_.find(key); it != index_.end()) return it->second;
    VertexId id = names_.size();
    names_.push_back(key);
    index_.emplace(std::move(key), id);
    return id;
  }

  std::size_t size() const noexcept { return names_.size(); }

  std::optional<VertexId> find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  GraphBuilder& add_edge(std::string_view u, std::string_view v, double w) {
    VertexId a = add_vertex(u);
    VertexId b = add_vertex(v);
    return add_edge(a, b, w);
  }

  GraphBuilder& add_edge(VertexId a, VertexId b, double w) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      std::ostringstream os;
      os << "edge " << names_.at(a) << " - " << names_.at(b) << " has nonpositive weight " << w;
      fail(ErrorCode::nonpositive_weight, os.str());
    }
    auto key = std::minmax(a, b);
    if (!edges_.emplace(key, w).second)
      fail(ErrorCode::duplicate_edge, "duplicate edge " + names_.at(a) + " - " + names_.at(b));
    return *this;
  }

  bool has_edge(VertexId a, VertexId b) const { return edges_.count(std::minmax(a, b)) > 0; }

  WeightedGraph build(MeasureMode mode) const {
    if (mode == MeasureMode::custom)
      fail(ErrorCode::invalid_argument, "custom measure requires explicit values");
    WeightedGraph g = build_structure();
    assign_mode_measure(g, mode);
    return g;
  }

  WeightedGraph build(std::vector<double> measure) const {
    WeightedGraph g = build_structure();
    if (measure.size() != g.size()) fail(ErrorCode::invalid_measure, "measure has wrong length");
    for (VertexId x = 0; x < g.size(); ++x)
      if (!(measure[x] > 0.0) || !std::isfinite(measure[x]))
        fail(ErrorCode::invalid_measure, "measure of vertex " + g.name(x) + " is not positive");
    g.measure_ = std::move(measure);
    g.mode_ = MeasureMode::custom;
    return g;
  }

  static void assign_mode_measure(WeightedGraph& g, MeasureMode mode) {
    g.mode_ = mode;
    g.measure_.assign(g.size(), 1.0);
    if (mode == MeasureMode::degree) g.measure_ = g.degree_;
  }

 private:
  WeightedGraph build_structure() const {
    if (names_.empty()) fail(ErrorCode::empty_graph, "graph has no vertices");
    WeightedGraph g;
    g.names_ = names_;
    g.index_ = index_;
    const std::size_t n = names_.size();
    g.adjacency_.assign(n, {});
    for (const auto& [key, w] : edges_) {
      auto [a, b] = key;
      g.adjacency_[a].push_back({b, w});
      if (a != b) g.adjacency_[b].push_back({a, w});
    }
    g.degree_.assign(n, 0.0);
    for (VertexId x = 0; x < n; ++x) {
      auto& adj = g.adjacency_[x];
      std::sort(adj.begin(), adj.end(), [](const Neighbor& l, const Neighbor& r) { return l.vertex < r.vertex; });
      for (const auto& nb : adj) g.degree_[x] += nb.weight;
      if (adj.empty() && n == 1)
        fail(ErrorCode::empty_graph, "graph has a single vertex and no edges");
    }
    check_connected(g);
    return g;
  }

  static void check_connected(const WeightedGraph& g) {
    const std::size_t n = g.size();
    std::vector<std::size_t> comp(n, n);
    std::size_t count = 0;
    for (VertexId s = 0; s < n; ++s) {
      if (comp[s] != n) continue;
      std::vector<VertexId> stack{s};
      comp[s] = count;
      while (!stack.empty()) {
        VertexId v = stack.back();
        stack.pop_back();
        for (const auto& nb : g.neighbors(v))
          if (comp[nb.vertex] == n) {
            comp[nb.vertex] = count;
            stack.push_back(nb.vertex);
          }
      }
      ++count;
    }
    if (count == 1) return;
    std::vector<std::string> components(count);
    for (VertexId v = 0; v < n; ++v) {
      auto& s = components[comp[v]];
      if (!s.empty()) s += ' ';
      s += g.name(v);
    }
    fail(ErrorCode::disconnected, "graph has " + std::to_string(count) + " connected components",
         std::move(components));
  }

  std::vector<std::string> names_;
  std::unordered_map<std::string, VertexId> index_;
  std::map<std::pair<VertexId, VertexId>, double> edges_;
};

inline WeightedGraph with_measure(const WeightedGraph& g, MeasureMode mode) {
  if (mode == MeasureMode::custom) fail(ErrorCode::invalid_argument, "custom measure requires explicit values");
  WeightedGraph out = g;
  GraphBuilder::assign_mode_measure(out, mode);
  return out;
}

inline WeightedGraph with_custom_measure(const WeightedGraph& g, std::vector<double> measure) {
  if (measure.size() != g.size()) fail(ErrorCode::invalid_measure, "measure has wrong length");
  for (VertexId x = 0; x < g.size(); ++x)
    if (!(measure[x] > 0.0) || !std::isfinite(measure[x]))
      fail(ErrorCode::invalid_measure, "measure of vertex " + g.name(x) + " is not positive");
  WeightedGraph out = g;
  out.measure_ = std::move(measure);
  out.mode_ = MeasureMode::custom;
  return out;
}

// Flags g as a finite piece of an infinite graph with the given cut-off
// vertices.
inline WeightedGraph as_truncation(const WeightedGraph& g, std::vector<VertexId> frontier) {
  WeightedGraph out = g;
  out.truncation_ = true;
  out.frontier_.assign(g.size(), 0);
  for (auto v : frontier) out.frontier_.at(v) = 1;
  return out;
}

inline std::vector<VertexId> frontier_of(const WeightedGraph& g) {
  std::vector<VertexId> out;
  for (VertexId x = 0; x < g.size(); ++x)
    if (g.on_frontier(x)) out.push_back(x);
  return out;
}

// Copy of g with every edge weight multiplied by `factor`, keeping the
// measure mode. Custom measures are left untouched.
inline WeightedGraph scale_weights(const WeightedGraph& g, double factor) {
  GraphBuilder b;
  for (VertexId x = 0; x < g.size(); ++x) b.add_vertex(g.name(x));
  for (VertexId x = 0; x < g.size(); ++x)
    for (const auto& nb : g.neighbors(x))
      if (nb.vertex >= x) b.add_edge(x, nb.vertex, nb.weight * factor);
  WeightedGraph out = g.measure_mode() == MeasureMode::custom
                          ? b.build(std::vector<double>(g.measures().begin(), g.measures().end()))
                          : b.build(g.measure_mode());
  return g.is_truncation() ? as_truncation(out, frontier_of(g)) : out;
}

// ---------------------------------------------------------------------------
// Text format: one edge per line, "u<TAB>v<TAB>w". Blank lines and lines that
// start with '#' are ignored; u == v declares a loop.

inline WeightedGraph load_graph(std::istream& in, MeasureMode mode = MeasureMode::unit) {
  GraphBuilder builder;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream fields(line);
    std::string u, v, wtext, extra;
    if (!(fields >> u >> v >> wtext) || (fields >> extra))
      fail(ErrorCode::parse_error, "line " + std::to_string(lineno) + ": expected 'u<TAB>v<TAB>weight'");
    double w = 0.0;
    try {
      std::size_t used = 0;
      w = std::stod(wtext, &used);
      if (used != wtext.size()) throw std::invalid_argument(wtext);
    } catch (const std::exception&) {
      fail(ErrorCode::parse_error, "line " + std::to_string(lineno) + ": bad weight '" + wtext + "'");
    }
    try {
      builder.add_edge(u, v, w);
    } catch (const Error& e) {
      fail(e.code(), "line " + std::to_string(lineno) + ": " + e.what(), e.details());
    }
  }
  if (builder.size() == 0) fail(ErrorCode::empty_graph, "input contains no edges");
  return builder.build(mode);
}

inline WeightedGraph load_graph_file(const std::string& path, MeasureMode mode = MeasureMode::unit) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io_error, "cannot open graph file '" + path + "'");
  return load_graph(in, mode);
}

inline std::string format_weight(double w) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", w);
  return buf;
}

inline void write_graph(std::ostream& out, const WeightedGraph& g) {
  for (VertexId x = 0; x < g.size(); ++x)
    for (const auto& nb : g.neighbors(x))
      if (nb.vertex >= x) out << g.name(x) << '\t' << g.name(nb.vertex) << '\t' << format_weight(nb.weight) << '\n';
}

// Stable 64-bit FNV-1a digest over a canonical text form of the graph
// (edges and measure keyed by vertex name, so insertion order is irrelevant).
inline std::string content_hash(const WeightedGraph& g) {
  std::vector<std::string> lines;
  for (VertexId x = 0; x < g.size(); ++x) {
    for (const auto& nb : g.neighbors(x)) {
      if (nb.vertex < x) continue;
      auto a = g.name(x), b = g.name(nb.vertex);
      if (b < a) std::swap(a, b);
      lines.push_back("e\t" + a + "\t" + b + "\t" + format_weight(nb.weight));
    }
    lines.push_back("m\t" + g.name(x) + "\t" + format_weight(g.measure(x)));
  }
  std::sort(lines.begin(), lines.end());
  if (g.is_truncation()) {
    std::vector<std::string> cut;
    for (VertexId x = 0; x < g.size(); ++x)
      if (g.on_frontier(x)) cut.push_back("f\t" + g.name(x));
    std::sort(cut.begin(), cut.end());
    lines.push_back("truncation");
    lines.insert(lines.end(), cut.begin(), cut.end());
  }
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& l : lines) {
    for (unsigned char c : l) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    h ^= '\n';
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Distances and balls (combinatorial hop distance).

inline constexpr std::size_t unreachable = std::numeric_limits<std::size_t>::max();

inline std::vector<std::size_t> hop_distances(const WeightedGraph& g, VertexId source,
                                              std::size_t cutoff = unreachable) {
  std::vector<std::size_t> dist(g.size(), unreachable);
  std::queue<VertexId> queue;
  dist[source] = 0;
  queue.push(source);
  while (!queue.empty()) {
    VertexId v = queue.front();
    queue.pop();
    if (dist[v] >= cutoff) continue;
    for (const auto& nb : g.neighbors(v))
      if (dist[nb.vertex] == unreachable) {
        dist[nb.vertex] = dist[v] + 1;
        queue.push(nb.vertex);
      }
  }
  return dist;
}

inline std::vector<std::vector<std::size_t>> hop_distance_matrix(const WeightedGraph& g) {
  std::vector<std::vector<std::size_t>> d(g.size());
  for (VertexId x = 0; x < g.size(); ++x) d[x] = hop_distances(g, x);
  return d;
}

inline std::size_t hop_diameter(const WeightedGraph& g) {
  std::size_t diam = 0;
  for (VertexId x = 0; x < g.size(); ++x)
    for (auto d : hop_distances(g, x)) diam = std::max(diam, d);
  return diam;
}

struct Ball {
  VertexId center = 0;
  double radius = 0.0;
  std::vector<VertexId> members;   // sorted
  std::vector<VertexId> interior;  // members whose whole neighbourhood lies in the ball
  std::vector<VertexId> boundary;  // members with a neighbour outside
  double volume = 0.0;

  bool contains(VertexId v) const { return std::binary_search(members.begin(), members.end(), v); }
  bool in_interior(VertexId v) const { return std::binary_search(interior.begin(), interior.end(), v); }
};

// Vertices of a member set whose closed neighbourhood stays inside the set.
inline std::vector<VertexId> interior_of(const WeightedGraph& g, const std::vector<VertexId>& members) {
  std::vector<char> inside(g.size(), 0);
  for (auto v : members) inside[v] = 1;
  std::vector<VertexId> interior;
  for (auto v : members) {
    bool ok = true;
    for (const auto& nb : g.neighbors(v))
      if (!inside[nb.vertex]) {
        ok = false;
        break;
      }
    if (ok) interior.push_back(v);
  }
  std::sort(interior.begin(), interior.end());
  return interior;
}

// B(x, r) = { y : d(x, y) <= r }; hop distances are integers so only
// floor(r) matters.
inline Ball ball(const WeightedGraph& g, VertexId center, double radius) {
  if (!(radius >= 0.0)) fail(ErrorCode::invalid_argument, "ball radius must be nonnegative");
  const auto reach = static_cast<std::size_t>(std::floor(std::min(radius, 1e15)));
  auto dist = hop_distances(g, center, reach);
  Ball b;
  b.center = center;
  b.radius = radius;
  for (VertexId v = 0; v < g.size(); ++v)
    if (dist[v] <= reach) {
      b.members.push_back(v);
      b.volume += g.measure(v);
    }
  b.interior = interior_of(g, b.members);
  std::set_difference(b.members.begin(), b.members.end(), b.interior.begin(), b.interior.end(),
                      std::back_inserter(b.boundary));
  return b;
}

inline double ball_volume(const WeightedGraph& g, VertexId center, double radius) {
  return ball(g, center, radius).volume;
}

// B(x0, 1), ..., B(x0, k_max).
inline std::vector<Ball> exhaustion(const WeightedGraph& g, VertexId x0, std::size_t k_max) {
  std::vector<Ball> balls;
  balls.reserve(k_max);
  for (std::size_t k = 1; k <= k_max; ++k) balls.push_back(ball(g, x0, static_cast<double>(k)));
  return balls;
}

// ---------------------------------------------------------------------------
// Metrics.

struct GraphMetrics {
  std::size_t vertices = 0;
  std::size_t edges = 0;
  std::size_t loops = 0;
  double d_mu = 0.0;       // max m(x) / mu(x)
  double omega_min = 0.0;  // smallest edge weight
  double mu_max = 0.0;
  double mu_min = 0.0;
  double total_measure = 0.0;
  double alpha_max = 0.0;  // largest alpha with the lazy-walk condition, 0 if none
  bool all_loops = false;
  std::size_t hop_diameter = 0;
};

inline double largest_delta_alpha(const WeightedGraph& g) {
  double alpha = std::numeric_limits<double>::infinity();
  for (VertexId x = 0; x < g.size(); ++x) {
    if (!g.has_loop(x)) return 0.0;
    for (const auto& nb : g.neighbors(x)) alpha = std::min(alpha, nb.weight / g.degree(x));
  }
  return alpha;
}

// Every vertex carries a loop and each edge at x, the loop included, has
// weight at least alpha * m(x).
inline bool satisfies_delta(const WeightedGraph& g, double alpha) {
  if (!(alpha > 0.0)) return false;
  for (VertexId x = 0; x < g.size(); ++x) {
    if (!g.has_loop(x)) return false;
    for (const auto& nb : g.neighbors(x))
      if (nb.weight < alpha * g.degree(x)) return false;
  }
  return true;
}

inline GraphMetrics graph_metrics(const WeightedGraph& g) {
  GraphMetrics m;
  m.vertices = g.size();
  m.omega_min = std::numeric_limits<double>::infinity();
  m.mu_min = std::numeric_limits<double>::infinity();
  for (VertexId x = 0; x < g.size(); ++x) {
    for (const auto& nb : g.neighbors(x)) {
      if (nb.vertex < x) continue;
      ++m.edges;
      if (nb.vertex == x) ++m.loops;
      m.omega_min = std::min(m.omega_min, nb.weight);
    }
    m.d_mu = std::max(m.d_mu, g.degree(x) / g.measure(x));
    m.mu_max = std::max(m.mu_max, g.measure(x));
    m.mu_min = std::min(m.mu_min, g.measure(x));
    m.total_measure += g.measure(x);
  }
  m.alpha_max = largest_delta_alpha(g);
  m.all_loops = m.loops == g.size();
  m.hop_diameter = hop_diameter(g);
  return m;
}

// ---------------------------------------------------------------------------
// Cartesian product. Vertex (u, v) is named "u,v". Loops at u and at v add up
// to the loop at (u, v). Degree-mode factors give a degree-mode product;
// otherwise the product carries the product measure.

inline WeightedGraph cartesian_product(const WeightedGraph& a, const WeightedGraph& b) {
  GraphBuilder builder;
  const std::size_t nb = b.size();
  auto id = [nb](VertexId u, VertexId v) { return u * nb + v; };
  for (VertexId u = 0; u < a.size(); ++u)
    for (VertexId v = 0; v < nb; ++v) builder.add_vertex(a.name(u) + "," + b.name(v));
  for (VertexId u = 0; u < a.size(); ++u) {
    for (VertexId v = 0; v < nb; ++v) {
      double loop = a.loop_weight(u) + b.loop_weight(v);
      if (loop > 0.0) builder.add_edge(id(u, v), id(u, v), loop);
      for (const auto& e : a.neighbors(u))
        if (e.vertex > u) builder.add_edge(id(u, v), id(e.vertex, v), e.weight);
      for (const auto& e : b.neighbors(v))
        if (e.vertex > v) builder.add_edge(id(u, v), id(u, e.vertex), e.weight);
    }
  }
  WeightedGraph out;
  if (a.measure_mode() == MeasureMode::degree && b.measure_mode() == MeasureMode::degree) {
    out = builder.build(MeasureMode::degree);
  } else if (a.measure_mode() == MeasureMode::unit && b.measure_mode() == MeasureMode::unit) {
    out = builder.build(MeasureMode::unit);
  } else {
    std::vector<double> mu(a.size() * nb);
    for (VertexId u = 0; u < a.size(); ++u)
      for (VertexId v = 0; v < nb; ++v) mu[id(u, v)] = a.measure(u) * b.measure(v);
    out = builder.build(std::move(mu));
  }
  if (!a.is_truncation() && !b.is_truncation()) return out;
  std::vector<VertexId> frontier;
  for (VertexId u = 0; u < a.size(); ++u)
    for (VertexId v = 0; v < nb; ++v)
      if (a.on_frontier(u) || b.on_frontier(v)) frontier.push_back(id(u, v));
  return as_truncation(out, std::move(frontier));
}

}  // namespace curvegraph
