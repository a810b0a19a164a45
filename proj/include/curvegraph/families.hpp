#pragma once

#include <string>

#include "graph.hpp"

// Small standard graphs used by tests, the CLI and the sample data.
namespace curvegraph::families {

inline WeightedGraph path(std::size_t n, MeasureMode mode = MeasureMode::unit, double w = 1.0) {
  if (n < 2) fail(ErrorCode::invalid_argument, "path needs at least 2 vertices");
  GraphBuilder b;
  for (std::size_t i = 0; i < n; ++i) b.add_vertex(std::to_string(i));
  for (std::size_t i = 0; i + 1 < n; ++i) b.add_edge(i, i + 1, w);
  return b.build(mode);
}

inline WeightedGraph cycle(std::size_t n, MeasureMode mode = MeasureMode::unit, double w = 1.0) {
  if (n < 3) fail(ErrorCode::invalid_argument, "cycle needs at least 3 vertices");
  GraphBuilder b;
  for (std::size_t i = 0; i < n; ++i) b.add_vertex(std::to_string(i));
  for (std::size_t i = 0; i < n; ++i) b.add_edge(i, (i + 1) % n, w);
  return b.build(mode);
}

inline WeightedGraph complete(std::size_t n, MeasureMode mode = MeasureMode::unit, double w = 1.0) {
  if (n < 2) fail(ErrorCode::invalid_argument, "complete graph needs at least 2 vertices");
  GraphBuilder b;
  for (std::size_t i = 0; i < n; ++i) b.add_vertex(std::to_string(i));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) b.add_edge(i, j, w);
  return b.build(mode);
}

inline WeightedGraph star(std::size_t leaves, MeasureMode mode = MeasureMode::unit) {
  if (leaves < 1) fail(ErrorCode::invalid_argument, "star needs at least one leaf");
  GraphBuilder b;
  b.add_vertex("c");
  for (std::size_t i = 0; i < leaves; ++i) b.add_edge("c", "l" + std::to_string(i), 1.0);
  return b.build(mode);
}

// Ball of radius `depth` around the root of the `degree`-regular tree.
inline WeightedGraph regular_tree(std::size_t degree, std::size_t depth, MeasureMode mode = MeasureMode::unit) {
  if (degree < 2) fail(ErrorCode::invalid_argument, "tree degree must be at least 2");
  GraphBuilder b;
  b.add_vertex("r");
  std::vector<std::string> frontier{"r"};
  for (std::size_t level = 0; level < depth; ++level) {
    std::vector<std::string> next;
    for (const auto& parent : frontier) {
      std::size_t children = parent == "r" ? degree : degree - 1;
      for (std::size_t c = 0; c < children; ++c) {
        std::string child = parent + "." + std::to_string(c);
        b.add_edge(parent, child, 1.0);
        next.push_back(child);
      }
    }
    frontier = std::move(next);
  }
  std::vector<VertexId> leaves;
  for (const auto& leaf : frontier) leaves.push_back(*b.find(leaf));
  return as_truncation(b.build(mode), std::move(leaves));
}

inline WeightedGraph torus(std::size_t a, std::size_t b, MeasureMode mode = MeasureMode::unit) {
  return cartesian_product(cycle(a, mode), cycle(b, mode));
}

// side x side piece of the square lattice, flagged as a truncation of Z^2
// with the outer ring as frontier. Degree mode uses the lattice degree 4.
inline WeightedGraph lattice_patch(std::size_t side, MeasureMode mode = MeasureMode::unit) {
  if (side < 3) fail(ErrorCode::invalid_argument, "lattice patch side must be at least 3");
  auto g = cartesian_product(path(side), path(side));
  std::vector<VertexId> ring;
  for (VertexId x = 0; x < g.size(); ++x)
    if (g.neighbors(x).size() < 4) ring.push_back(x);
  if (mode == MeasureMode::degree) g = with_custom_measure(g, std::vector<double>(g.size(), 4.0));
  return as_truncation(g, std::move(ring));
}

// Copy of g with a loop of weight w added at every vertex (on top of any
// existing loop), measure rebuilt under `mode`.
inline WeightedGraph add_loops(const WeightedGraph& g, double w, MeasureMode mode) {
  GraphBuilder b;
  for (VertexId x = 0; x < g.size(); ++x) b.add_vertex(g.name(x));
  for (VertexId x = 0; x < g.size(); ++x) {
    b.add_edge(x, x, g.loop_weight(x) + w);
    for (const auto& nb : g.neighbors(x))
      if (nb.vertex > x) b.add_edge(x, nb.vertex, nb.weight);
  }
  auto out = b.build(mode);
  return g.is_truncation() ? as_truncation(out, frontier_of(g)) : out;
}

}  // namespace curvegraph::families
