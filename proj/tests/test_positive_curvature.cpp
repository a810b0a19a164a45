#include <gtest/gtest.h>

#include <boost/math/tools/minima.hpp>
#include <cmath>
#include <numbers>
#include <random>

#include "curvegraph/families.hpp"
#include "curvegraph/positive_curvature.hpp"
#include "support.hpp"

using namespace curvegraph;

namespace {

// Shortest path with edge length min over endpoints of sqrt(2 mu / w): a
// feasible f cannot change by more than that across an edge.
double edge_upper_bound(const WeightedGraph& g, VertexId x, VertexId y) {
  std::vector<double> d(g.size(), INFINITY);
  d[x] = 0.0;
  for (std::size_t round = 0; round < g.size(); ++round)
    for (VertexId u = 0; u < g.size(); ++u)
      for (const auto& nb : g.neighbors(u)) {
        if (nb.vertex == u) continue;
        const double len = std::min(std::sqrt(2.0 * g.measure(u) / nb.weight),
                                    std::sqrt(2.0 * g.measure(nb.vertex) / nb.weight));
        d[nb.vertex] = std::min(d[nb.vertex], d[u] + len);
      }
  return d[y];
}

double max_gamma(const WeightedGraph& g, const std::vector<double>& f) {
  auto gam = gamma(g, VertexFunction(f));
  double m = 0.0;
  for (VertexId x = 0; x < g.size(); ++x) m = std::max(m, gam[x]);
  return m;
}

// K5 with the degree measure and a certified CDE'(16, K) constant.
struct K5Setup {
  WeightedGraph g = families::complete(5, MeasureMode::degree);
  double n = 16.0;
  double K = 0.99 * 0.445681;
};

}  // namespace

TEST(IntrinsicMetric, UnitStarAndDegreeMode) {
  for (std::size_t k : {1u, 3u, 7u}) {
    auto g = families::star(k, MeasureMode::unit);
    auto rho = intrinsic_rho(g);
    EXPECT_NEAR(rho.distance[0][1], 1.0 / std::sqrt(static_cast<double>(k)), 1e-15);
    EXPECT_GE(rho.min_slack, -1e-15);
  }
  auto t = families::torus(6, 7, MeasureMode::degree);
  auto rho = intrinsic_rho(t);
  for (VertexId x = 0; x < t.size(); x += 5) {
    auto hops = hop_distances(t, x);
    for (VertexId y = 0; y < t.size(); ++y) EXPECT_NEAR(rho.distance[x][y], static_cast<double>(hops[y]), 1e-12);
  }
}

TEST(IntrinsicMetric, SlackAndHopComparisonOnRandomGraphs) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = testsupport::random_graph(rng);
    auto rho = intrinsic_rho(g);
    EXPECT_GE(rho.min_slack, -1e-12);
    const double d_mu = graph_metrics(g).d_mu;
    for (VertexId x = 0; x < g.size(); ++x) {
      auto hops = hop_distances(g, x);
      for (VertexId y = 0; y < g.size(); ++y)
        EXPECT_GE(rho.distance[x][y], static_cast<double>(hops[y]) / std::sqrt(d_mu) - 1e-12);
    }
  }
}

TEST(CanonicalDistance, ClosedFormsOnPaths) {
  auto k2 = families::path(2);
  EXPECT_NEAR(canonical_distance(k2, 0, 1).value, std::sqrt(2.0), 1e-8);
  auto p3 = families::path(3);
  EXPECT_NEAR(canonical_distance(p3, 0, 2).value, 2.0, 1e-8);
  // On P4 the optimum has increments (a, b, a) with a^2 + b^2 = 2; maximise
  // 2a + b with an independent one-dimensional search.
  auto best = boost::math::tools::brent_find_minima(
      [](double b) { return -(2.0 * std::sqrt(std::max(0.0, 2.0 - b * b)) + b); }, 0.0, std::sqrt(2.0), 50);
  auto p4 = families::path(4);
  auto d = canonical_distance(p4, 0, 3);
  EXPECT_NEAR(d.value, -best.second, 1e-8);
  EXPECT_NEAR(d.value, std::sqrt(10.0), 1e-8);
  EXPECT_TRUE(d.converged);
  EXPECT_TRUE(d.feasible);
}

TEST(CanonicalDistance, SandwichedOnRandomGraphs) {
  std::mt19937_64 rng(5);
  testsupport::RandomGraphOptions opt;
  opt.max_vertices = 8;
  for (int trial = 0; trial < 30; ++trial) {
    auto g = testsupport::random_graph(rng, opt);
    auto rho = intrinsic_rho(g);
    const VertexId x = 0, y = g.size() - 1;
    auto d = canonical_distance(g, x, y);
    ASSERT_TRUE(d.feasible);
    EXPECT_LE(max_gamma(g, d.witness), 1.0 + 1e-9);
    EXPECT_NEAR(d.witness[x] - d.witness[y], d.value, 1e-12);
    EXPECT_GE(d.value, std::sqrt(2.0) * rho.distance[x][y] * (1.0 - 1e-9));
    EXPECT_LE(d.value, edge_upper_bound(g, x, y) + 1e-9);
    // Random feasible functions never beat the optimiser.
    for (int s = 0; s < 200; ++s) {
      auto f = testsupport::random_function(rng, g.size());
      std::vector<double> h(f.values().begin(), f.values().end());
      const double scale = 1.0 / std::sqrt(max_gamma(g, h));
      EXPECT_LE(std::abs(h[x] - h[y]) * scale, d.value + 1e-7);
    }
  }
}

TEST(CanonicalDistance, GrowsWithTheDomain) {
  auto g = families::cycle(10);
  std::vector<VertexId> dom = {0, 1};
  double previous = 0.0;
  std::optional<std::vector<double>> warm;
  for (VertexId v = 2; v < 10; ++v) {
    dom.push_back(v);
    CanonicalOptions opt;
    opt.domain = dom;
    opt.warm_start = warm;
    auto d = canonical_distance(g, 0, 1, opt);
    EXPECT_TRUE(d.feasible);
    for (VertexId u = 0; u < g.size(); ++u)
      if (std::find(dom.begin(), dom.end(), u) == dom.end()) EXPECT_EQ(d.witness[u], 0.0);
    EXPECT_GE(d.value, previous - 1e-12);
    previous = d.value;
    warm = d.witness;
  }
  EXPECT_NEAR(previous, canonical_distance(g, 0, 1).value, 1e-6);
  EXPECT_THROW(canonical_distance(g, 0, 42), Error);
  CanonicalOptions bad;
  bad.domain = {2, 3};
  EXPECT_THROW(canonical_distance(g, 0, 1, bad), Error);
}

TEST(Entropy, BasicIdentities) {
  auto g = families::cycle(5, MeasureMode::degree);
  std::vector<double> c(5, 3.0);
  // Constants: c Z ln c - c Z ln(c Z) = -c Z ln Z, zero for a probability.
  EXPECT_NEAR(entropy(g, c), -30.0 * std::log(10.0), 1e-12);
  auto p = normalize_to_probability(g).graph;
  EXPECT_NEAR(entropy(p, c), 0.0, 1e-12);
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto f = testsupport::random_function(rng, 5, 0.0, 3.0);
    std::vector<double> v(f.values().begin(), f.values().end());
    v[trial % 5] = 0.0;
    EXPECT_GE(entropy(p, v), -1e-12);
    std::vector<double> w = v;
    for (auto& x : w) x *= 2.5;
    EXPECT_NEAR(entropy(p, w), 2.5 * entropy(p, v), 1e-12);
  }
  // Two points, unit measure: f = (a, 0) gives a ln a - a ln a = 0; f = (1, 2).
  auto k2 = families::path(2);
  EXPECT_NEAR(entropy(k2, std::vector<double>{1.0, 2.0}), 2.0 * std::log(2.0) - 3.0 * std::log(3.0), 1e-15);
  EXPECT_THROW(entropy(k2, std::vector<double>{-1.0, 2.0}), Error);
}

TEST(Normalization, KeepsOperatorsAndScalesTheKernel) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = testsupport::random_graph(rng);
    auto [h, z] = normalize_to_probability(g);
    EXPECT_NEAR(h.total_measure(), 1.0, 1e-12);
    auto f = testsupport::random_function(rng, g.size());
    auto a = laplacian(g, f), b = laplacian(h, f);
    for (VertexId x = 0; x < g.size(); ++x) EXPECT_NEAR(a[x], b[x], 1e-10);
    auto kg = SpectralKernel::global(g), kh = SpectralKernel::global(h);
    EXPECT_NEAR(kh(1.0, 0, g.size() - 1), z * kg(1.0, 0, g.size() - 1), 1e-10 * z);
  }
}

TEST(LsiProfile, DerivativesAndVariationalForm) {
  auto p = LsiProfile::make(3.0, 1.5);
  EXPECT_DOUBLE_EQ(p.theta, 1.0);
  for (double x : {0.01, 0.3, 1.0, 7.0, 200.0}) {
    const double h = 1e-5 * x;
    EXPECT_NEAR(p.phi_prime(x), (p.phi(x + h) - p.phi(x - h)) / (2 * h), 1e-6 * std::max(1.0, p.phi_prime(x)));
    EXPECT_NEAR(p.phi_second(x), (p.phi_prime(x + h) - p.phi_prime(x - h)) / (2 * h),
                1e-5 * std::abs(p.phi_second(x)));
    EXPECT_LT(p.phi_second(x), 0.0);
    EXPECT_GT(p.phi_prime(x), 0.0);
    // Phi(x) = min over t of 2 t x + 2 M(t).
    auto best = boost::math::tools::brent_find_minima(
        [&](double t) { return 2.0 * t * x + 2.0 * p.log_kernel_bound(t); }, 1e-6, 100.0, 60);
    EXPECT_NEAR(p.phi(x), best.second, 1e-9 * std::max(1.0, p.phi(x)));
  }
  EXPECT_EQ(p.phi(0.0), 0.0);
  EXPECT_THROW(LsiProfile::make(3.0, 0.0), Error);
  EXPECT_THROW(LsiProfile::make(3.0, 1.0, 1.0), Error);
  EXPECT_THROW(LsiProfile::make(3.0, 1.0, -0.1), Error);
}

TEST(Lsi, HoldsOnK5ForRandomFunctions) {
  K5Setup s;
  auto p = LsiProfile::make(s.n, s.K);
  std::mt19937_64 rng(17);
  std::vector<VertexFunction> fs;
  for (int i = 0; i < 500; ++i) fs.push_back(testsupport::random_function(rng, 5, -1.0, 1.0));
  auto rep = lsi_check(s.g, fs, p, {0.1, 0.5, 1.0, 3.0, 10.0});
  EXPECT_TRUE(rep.pass) << rep.residuals.min;
  EXPECT_EQ(rep.samples, 500u * 6u);
  EXPECT_NEAR(rep.constants.at("measure_factor"), 20.0, 1e-12);
}

TEST(Lsi, CertifiedConstantOnK5) {
  K5Setup s;
  auto hyp = check_cde_prime(s.g, s.n, s.K);
  EXPECT_TRUE(hyp.holds.value_or(false)) << hyp.detail;
}

TEST(Decay, ConstantsAndK5Bounds) {
  K5Setup s;
  auto p = LsiProfile::make(s.n, s.K);
  auto c = decay_constants(p, 1.0, 1.0);
  EXPECT_NEAR(c.C2 / c.C1, 2.0 * std::sqrt(2.0), 1e-14);
  // With theta = 2K/3 the general formula reduces to this.
  EXPECT_NEAR(c.C1 * c.C1, 1.0 + s.n * p.theta / (2.0 * std::expm1(p.theta)), 1e-12);
  EXPECT_THROW(decay_constants(p, 0.0, 1.0), Error);

  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 5; ++trial) {
    auto f = testsupport::random_function(rng, 5, 0.0, 1.0);
    auto rep = decay_check(s.g, f, p, 0.5, {0.5, 1.0, 2.0, 5.0});
    EXPECT_TRUE(rep.pass) << rep.residuals.min;
    EXPECT_GE(rep.constants.at("pairwise_min_slack"), 0.0);
  }
  EXPECT_THROW(decay_check(s.g, VertexFunction::constant(5, 2.0), p, 1.0, {1.0}), Error);
  EXPECT_THROW(decay_check(s.g, VertexFunction::constant(5, 0.5), p, 1.0, {0.5}), Error);
}

TEST(GlobalKernel, BoundOnK5AndLimit) {
  K5Setup s;
  auto p = LsiProfile::make(s.n, s.K);
  std::vector<double> grid;
  for (double t = 0.1; t <= 10.0 + 1e-12; t += 0.1) grid.push_back(t);
  auto rep = global_kernel_bound(s.g, p, grid);
  EXPECT_TRUE(rep.pass);
  // p(t) - 1 decays like e^{-lambda_1 t}.
  const double gap = rep.constants.at("spectral_gap");
  EXPECT_NEAR(rep.constants.at("kernel_min_at_t_max"), 1.0, 4.0 * std::exp(-10.0 * gap));
  EXPECT_NEAR(rep.constants.at("total_measure"), 1.0, 1e-12);
}

TEST(Diameter, ClosedFormsAndQuadrature) {
  auto b = diameter_bounds(2.0, 1.0, 1.0);
  EXPECT_NEAR(b.canonical_bound, 30.78, 5e-3);
  EXPECT_NEAR(b.hop_bound, 21.77, 5e-3);
  EXPECT_LT(b.relative_error, 1e-6);
  EXPECT_NEAR(std::sqrt(2.0) * b.closed_form, b.canonical_bound, 1e-12 * b.canonical_bound);
  for (double n : {1.0, 5.0, 40.0})
    for (double K : {0.1, 2.0}) EXPECT_LT(diameter_bounds(n, K, 2.0).relative_error, 1e-6);
  EXPECT_THROW(diameter_bounds(2.0, 0.0, 1.0), Error);
  EXPECT_THROW(diameter_bounds(2.0, -1.0, 1.0), Error);
}

TEST(Diameter, K5ReportHolds) {
  K5Setup s;
  auto rep = diameter_report(s.g, s.n, s.K, true);
  EXPECT_TRUE(rep.pass);
  EXPECT_EQ(rep.constants.at("hop_diameter"), 1.0);
  EXPECT_GE(rep.constants.at("canonical_lower_diameter"), std::sqrt(2.0) * rep.constants.at("intrinsic_diameter") - 1e-9);
}
