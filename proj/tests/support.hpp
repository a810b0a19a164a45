#pragma once

// Shared helpers for the test suites: random graph generators and dense
// reference implementations of the operators.

#include <Eigen/Dense>
#include <random>
#include <string>
#include <vector>

#include "curvegraph/graph.hpp"
#include "curvegraph/operators.hpp"

namespace testsupport {

using curvegraph::GraphBuilder;
using curvegraph::MeasureMode;
using curvegraph::VertexFunction;
using curvegraph::VertexId;
using curvegraph::WeightedGraph;

struct RandomGraphOptions {
  std::size_t min_vertices = 2;
  std::size_t max_vertices = 12;
  double extra_edge_probability = 0.3;
  double loop_probability = 0.3;
  double min_weight = 0.2;
  double max_weight = 3.0;
  bool random_measure = true;  // pick unit / degree / custom at random
};

// Random spanning tree plus random extra edges and loops, so the result is
// always connected.
inline WeightedGraph random_graph(std::mt19937_64& rng, const RandomGraphOptions& opt = {}) {
  std::uniform_int_distribution<std::size_t> size_dist(opt.min_vertices, opt.max_vertices);
  std::uniform_real_distribution<double> weight(opt.min_weight, opt.max_weight);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t n = size_dist(rng);
  GraphBuilder b;
  for (std::size_t i = 0; i < n; ++i) b.add_vertex("v" + std::to_string(i));
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> parent(0, i - 1);
    b.add_edge(i, parent(rng), weight(rng));
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (unit(rng) < opt.loop_probability) b.add_edge(i, i, weight(rng));
    for (std::size_t j = i + 1; j < n; ++j)
      if (!b.has_edge(i, j) && unit(rng) < opt.extra_edge_probability) b.add_edge(i, j, weight(rng));
  }
  if (!opt.random_measure) return b.build(MeasureMode::unit);
  switch (std::uniform_int_distribution<int>(0, 2)(rng)) {
    case 0: return b.build(MeasureMode::unit);
    case 1: return b.build(MeasureMode::degree);
    default: {
      std::vector<double> mu(n);
      for (auto& v : mu) v = 0.3 + 2.0 * unit(rng);
      return b.build(std::move(mu));
    }
  }
}

inline VertexFunction random_function(std::mt19937_64& rng, std::size_t n, double lo = -2.0, double hi = 2.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return VertexFunction(std::move(v));
}

// Dense reference operators: Laplacian as a matrix, the carre du champ from
// the product formula Gamma(f, h) = (L(fh) - f Lh - h Lf) / 2, and the
// iterated forms built from those.
struct DenseOracle {
  Eigen::MatrixXd lap;
  Eigen::VectorXd mu;

  explicit DenseOracle(const WeightedGraph& g) {
    const auto n = static_cast<Eigen::Index>(g.size());
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    mu.resize(n);
    for (VertexId x = 0; x < g.size(); ++x) {
      mu(x) = g.measure(x);
      for (const auto& nb : g.neighbors(x)) w(x, nb.vertex) = nb.weight;
    }
    Eigen::VectorXd m = w.rowwise().sum();
    lap = w;
    lap.diagonal() -= m;
    lap = mu.cwiseInverse().asDiagonal() * lap;
  }

  Eigen::VectorXd laplacian(const Eigen::VectorXd& f) const { return lap * f; }

  Eigen::VectorXd gamma(const Eigen::VectorXd& f, const Eigen::VectorXd& h) const {
    Eigen::VectorXd fh = f.cwiseProduct(h);
    return 0.5 * (lap * fh - f.cwiseProduct(lap * h) - h.cwiseProduct(lap * f));
  }

  Eigen::VectorXd gamma2(const Eigen::VectorXd& f, const Eigen::VectorXd& h) const {
    return 0.5 * (lap * gamma(f, h) - gamma(f, lap * h) - gamma(lap * f, h));
  }

  Eigen::VectorXd gamma2_tilde(const Eigen::VectorXd& f) const {
    Eigen::VectorXd ratio = gamma(f, f).cwiseQuotient(f);
    return gamma2(f, f) - gamma(f, ratio);
  }

  Eigen::VectorXd laplace_log(const Eigen::VectorXd& f) const {
    return lap * f.array().log().matrix();
  }
};

inline Eigen::VectorXd to_eigen(const VertexFunction& f) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()));
  for (VertexId i = 0; i < f.size(); ++i) v(i) = f[i];
  return v;
}

// |a - b| / max(1, |b|)
inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace testsupport
