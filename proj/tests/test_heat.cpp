#include <gtest/gtest.h>

#include <boost/math/special_functions/bessel.hpp>
#include <cmath>
#include <sstream>
#include <unsupported/Eigen/MatrixFunctions>

#include "curvegraph/families.hpp"
#include "curvegraph/heat.hpp"
#include "support.hpp"

using namespace curvegraph;

namespace {

// p(t, x, y) = exp(t L)(x, y) / mu(y) from a dense matrix exponential of the
// (non-symmetric) Laplacian matrix.
Eigen::MatrixXd expm_kernel(const WeightedGraph& g, double t) {
  testsupport::DenseOracle o(g);
  Eigen::MatrixXd e = (o.lap * t).exp();
  return e * o.mu.cwiseInverse().asDiagonal();
}

}  // namespace

TEST(Kernel, SingleEdgeClosedForm) {
  auto g = families::path(2);
  auto k = SpectralKernel::global(g);
  for (double t : {0.1, 1.0, 3.0}) {
    EXPECT_NEAR(k(t, 0, 1), (1.0 - std::exp(-2.0 * t)) / 2.0, 1e-12);
    EXPECT_NEAR(k(t, 0, 0), (1.0 + std::exp(-2.0 * t)) / 2.0, 1e-12);
  }
}

TEST(Kernel, MatchesMatrixExponential) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = testsupport::random_graph(rng);
    auto k = SpectralKernel::global(g);
    for (double t : {0.05, 0.7, 4.0}) {
      auto ref = expm_kernel(g, t);
      auto mine = k.matrix(t);
      EXPECT_LE((ref - mine).cwiseAbs().maxCoeff(), 1e-11 * std::max(1.0, ref.cwiseAbs().maxCoeff()));
    }
  }
}

TEST(Kernel, DirichletMatchesRestrictedExponential) {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = testsupport::random_graph(rng);
    std::vector<VertexId> dom;
    for (VertexId x = 0; x < g.size(); ++x)
      if (x % 3 != 0) dom.push_back(x);
    if (dom.empty()) continue;
    SpectralKernel k(g, dom);
    testsupport::DenseOracle o(g);
    const auto n = static_cast<Eigen::Index>(dom.size());
    Eigen::MatrixXd lap(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) lap(i, j) = o.lap(dom[i], dom[j]);
    Eigen::MatrixXd e = (lap * 0.8).exp();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j)
        EXPECT_NEAR(k(0.8, dom[i], dom[j]), e(i, j) / g.measure(dom[j]), 1e-11);
    EXPECT_EQ(k(0.8, 0, dom[0]), 0.0);
  }
}

TEST(Kernel, AxiomsOnRandomGraphs) {
  std::mt19937_64 rng(33);
  testsupport::RandomGraphOptions opt;
  opt.max_vertices = 30;
  for (int trial = 0; trial < 10; ++trial) {
    auto g = testsupport::random_graph(rng, opt);
    auto k = SpectralKernel::global(g);
    const double t = 0.6, s = 1.3, h = 1e-4;
    auto pt = k.matrix(t), ps = k.matrix(s), pts = k.matrix(t + s);
    Eigen::VectorXd mu(g.size());
    for (VertexId x = 0; x < g.size(); ++x) mu(x) = g.measure(x);
    EXPECT_LE((pt - pt.transpose()).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE((pt * mu.asDiagonal() * ps - pts).cwiseAbs().maxCoeff(), 1e-10);
    EXPECT_LE(((pt * mu).array() - 1.0).abs().maxCoeff(), 1e-10);
    auto lap = testsupport::DenseOracle(g).lap;
    Eigen::MatrixXd dt = (k.matrix(t + h) - k.matrix(t - h)) / (2 * h);
    Eigen::MatrixXd ly = (lap * pt.transpose()).transpose();
    EXPECT_LE((dt - ly).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_GE(pt.minCoeff(), -1e-12);
  }
}

TEST(Kernel, SemigroupAndDerivative) {
  auto g = families::cycle(7, MeasureMode::degree);
  auto k = SpectralKernel::global(g);
  std::vector<double> f{1, 0, 2, 0, 3, 0, 1};
  auto u = k.apply(0.5, f, g);
  auto direct = k.matrix(0.5);
  for (VertexId x = 0; x < 7; ++x) {
    double s = 0.0;
    for (VertexId y = 0; y < 7; ++y) s += direct(x, y) * f[y] * g.measure(y);
    EXPECT_NEAR(u[x], s, 1e-12);
  }
  auto du = k.apply_derivative(0.5, f, g);
  auto lu = laplacian(g, VertexFunction(u));
  for (VertexId x = 0; x < 7; ++x) EXPECT_NEAR(du[x], lu(x), 1e-12);
}

TEST(Kernel, MaximumPrincipleOnDirichletDomains) {
  std::mt19937_64 rng(34);
  for (int trial = 0; trial < 40; ++trial) {
    auto g = testsupport::random_graph(rng);
    auto b = ball(g, 0, 1.0);
    auto dom = b.interior.empty() ? b.members : b.interior;
    SpectralKernel k(g, dom);
    auto f = testsupport::random_function(rng, g.size(), 0.0, 1.0);
    double fmax = 0.0;
    for (auto v : dom) fmax = std::max(fmax, f[v]);
    for (double t : {0.1, 1.0, 5.0}) {
      auto u = k.apply(t, f.values(), g);
      for (auto v : dom) {
        EXPECT_LE(u[v], fmax + 1e-12);
        EXPECT_GE(u[v], -1e-12);
      }
    }
  }
}

TEST(Exhaustion, SquareLatticeMatchesBesselFormula) {
  auto g = families::lattice_patch(31);
  auto c = g.index_of("15,15");
  for (double t : {0.5, 2.0}) {
    auto v = heat_kernel(g, c, c, t);
    ASSERT_TRUE(v.converged) << v.diagnostic;
    const double one_d = std::exp(-2.0 * t) * boost::math::cyl_bessel_i(0, 2.0 * t);
    EXPECT_NEAR(v.value, one_d * one_d, 1e-7);
    auto w = heat_kernel(g, c, g.index_of("16,15"), t);
    const double off = std::exp(-2.0 * t) * boost::math::cyl_bessel_i(1, 2.0 * t);
    EXPECT_NEAR(w.value, one_d * off, 1e-7);
  }
}

TEST(Exhaustion, StopsAtTheEdgeOfTheTruncation) {
  auto g = families::lattice_patch(7);
  auto v = heat_kernel(g, g.index_of("3,3"), g.index_of("3,3"), 20.0);
  EXPECT_FALSE(v.converged);
  EXPECT_FALSE(v.diagnostic.empty());
}

TEST(Exhaustion, DirichletKernelsIncrease) {
  auto g = families::lattice_patch(21);
  auto c = g.index_of("10,10");
  double prev = 0.0;
  for (std::size_t k = 1; k < 9; ++k) {
    auto kern = SpectralKernel::dirichlet(g, ball(g, c, static_cast<double>(k)).members);
    double v = kern(1.5, c, c);
    EXPECT_GE(v, prev - 1e-12);
    prev = v;
  }
}

TEST(Discrete, RowsAreProbabilityVectors) {
  auto g = families::add_loops(families::cycle(5), 1.0, MeasureMode::degree);
  auto rows = discrete_kernel_rows(g, 0, 12);
  for (const auto& r : rows) {
    double s = 0.0;
    for (double v : r) s += v;
    EXPECT_NEAR(s, 1.0, 1e-14);
  }
  EXPECT_NEAR(rows[1][0], 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(rows[1][1], 1.0 / 3.0, 1e-15);
}

TEST(Poisson, CutoffBound) {
  double bound = 0.0;
  auto K = poisson_cutoff(5.0, 1e-12, &bound);
  EXPECT_LT(bound, 1e-12);
  double tail = 0.0;
  for (std::size_t k = K + 1; k < K + 200; ++k)
    tail += std::exp(-5.0 + k * std::log(5.0) - std::lgamma(k + 1.0));
  EXPECT_LE(tail, bound);
}

TEST(Poisson, BridgeMatchesContinuousKernel) {
  auto loopless = families::path(2, MeasureMode::degree);
  for (double t : {0.1, 1.0, 5.0}) {
    auto b = poisson_bridge(loopless, 0, 1, t);
    EXPECT_NEAR(b.value, (1.0 - std::exp(-2.0 * t)) / 2.0, 1e-12);
  }
  std::mt19937_64 rng(35);
  for (int trial = 0; trial < 10; ++trial) {
    auto g = families::add_loops(testsupport::random_graph(rng), 0.5, MeasureMode::degree);
    auto k = SpectralKernel::global(g);
    for (double t : {0.1, 1.0, 5.0}) {
      auto b = poisson_bridge(g, 0, g.size() - 1, t);
      EXPECT_NEAR(b.value, k(t, 0, g.size() - 1) * g.measure(g.size() - 1), 1e-12 + 1e-10);
    }
  }
}

TEST(Submarkov, RescalesTheLaplacian) {
  auto g = families::add_loops(families::cycle(6), 2.0, MeasureMode::degree);
  const double alpha = 0.5;
  auto h = submarkov_transform(g, alpha);
  for (VertexId x = 0; x < g.size(); ++x) {
    EXPECT_NEAR(h.degree(x), g.degree(x), 1e-14);
    EXPECT_DOUBLE_EQ(h.measure(x), g.measure(x));
  }
  EXPECT_FALSE(h.has_loop(0));  // loop 2 = alpha * m(x) exactly
  VertexFunction f({1, 3, 0, 2, 5, 1});
  for (VertexId x = 0; x < 6; ++x) EXPECT_NEAR(laplacian_at(h, f, x), laplacian_at(g, f, x) / (1 - alpha), 1e-14);
  EXPECT_THROW(submarkov_transform(g, 0.6), Error);
}

TEST(Cache, RoundTrip) {
  auto g = families::torus(4, 4, MeasureMode::degree);
  auto dir = std::filesystem::temp_directory_path() / "curvegraph-cache-test";
  std::filesystem::remove_all(dir);
  std::vector<VertexId> dom{1, 2, 5, 6};
  auto first = kernel_cache::get_or_compute(dir, g, dom);
  auto second = kernel_cache::get_or_compute(dir, g, dom);
  EXPECT_EQ(first(0.3, 1, 6), second(0.3, 1, 6));
  std::stringstream buf;
  kernel_cache::save(buf, first, content_hash(g));
  EXPECT_FALSE(kernel_cache::load(buf, "other", dom).has_value());
  std::filesystem::remove_all(dir);
}

TEST(Semigroup, AxiomsOnRandomGraphs) {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = testsupport::random_graph(rng);
    auto f = testsupport::random_function(rng, g.size());
    auto one = semigroup_apply(g, VertexFunction::constant(g.size(), 1.0), 0.8);
    for (VertexId x = 0; x < g.size(); ++x) EXPECT_NEAR(one[x], 1.0, 1e-12);
    auto lpf = laplacian(g, semigroup_apply(g, f, 0.8));
    auto plf = semigroup_apply(g, laplacian(g, f), 0.8);
    auto composed = semigroup_apply(g, semigroup_apply(g, f, 0.3), 0.5);
    auto direct = semigroup_apply(g, f, 0.8);
    for (VertexId x = 0; x < g.size(); ++x) {
      EXPECT_NEAR(lpf(x), plf[x], 1e-10);
      EXPECT_NEAR(composed[x], direct[x], 1e-10);
    }
    auto same = semigroup_apply(g, f, 0.0);
    for (VertexId x = 0; x < g.size(); ++x) EXPECT_NEAR(same[x], f[x], 1e-12);
  }
  EXPECT_THROW(semigroup_apply(families::path(3), VertexFunction::undefined(3), 1.0), Error);
}

TEST(Semigroup, KeepsValuesInTheUnitInterval) {
  std::mt19937_64 rng(78);
  for (int trial = 0; trial < 20; ++trial) {
    auto g = testsupport::random_graph(rng);
    auto f = testsupport::random_function(rng, g.size(), 0.0, 1.0);
    auto u = semigroup_apply(g, f, 1.3);
    for (VertexId x = 0; x < g.size(); ++x) {
      EXPECT_GE(u[x], -1e-12);
      EXPECT_LE(u[x], 1.0 + 1e-12);
    }
  }
}

TEST(DirichletKernel, FullGraphAndBalls) {
  auto k2 = families::path(2);
  auto full = dirichlet_kernel(k2, ball(k2, 0, 1.0), 0.7);
  EXPECT_NEAR(full.values(0, 1), (1.0 - std::exp(-1.4)) / 2.0, 1e-12);

  auto g = families::torus(9, 9, MeasureMode::degree);
  auto b = ball(g, 0, 3.0);
  auto dk = dirichlet_kernel(g, b, 0.5);
  auto later = dirichlet_kernel(g, b, 0.9);
  auto sum = dirichlet_kernel(g, b, 1.4);
  const auto k = static_cast<Eigen::Index>(dk.domain.size());
  for (Eigen::Index i = 0; i < k; ++i) {
    double mass = 0.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      EXPECT_NEAR(dk.values(i, j), dk.values(j, i), 1e-12);
      EXPECT_GE(dk.values(i, j), -1e-12);
      mass += dk.values(i, j) * g.measure(dk.domain[j]);
      double comp = 0.0;
      for (Eigen::Index z = 0; z < k; ++z) comp += dk.values(i, z) * later.values(z, j) * g.measure(dk.domain[z]);
      EXPECT_NEAR(comp, sum.values(i, j), 1e-10);
    }
    EXPECT_LE(mass, 1.0 + 1e-12);
  }
  // Mass near 1 at the center for small t.
  auto tiny = dirichlet_kernel(g, b, 1e-4);
  const auto c = static_cast<Eigen::Index>(
      std::find(tiny.domain.begin(), tiny.domain.end(), VertexId{0}) - tiny.domain.begin());
  double mass = 0.0;
  for (Eigen::Index j = 0; j < k; ++j) mass += tiny.values(c, j) * g.measure(tiny.domain[j]);
  EXPECT_NEAR(mass, 1.0, 1e-6);

  EXPECT_THROW(dirichlet_kernel(g, b, 0.0), Error);
  EXPECT_THROW(dirichlet_kernel(g, ball(g, 0, 0.0), 1.0), Error);
}

TEST(DirichletKernel, EigenfunctionsAreOrthonormalAndReconstructTheLaplacian) {
  auto g = families::torus(7, 6, MeasureMode::degree);
  auto b = ball(g, 3, 3.0);
  auto k = SpectralKernel::dirichlet(g, b.members);
  const auto& dom = k.domain();
  const auto n = static_cast<Eigen::Index>(dom.size());
  Eigen::VectorXd mu(n);
  for (Eigen::Index i = 0; i < n; ++i) mu(i) = g.measure(dom[i]);
  Eigen::MatrixXd gram = k.modes().transpose() * mu.asDiagonal() * k.modes();
  EXPECT_LT((gram - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff(), 1e-10);
  EXPECT_GT(k.eigenvalues()(0), 0.0);
  for (Eigen::Index i = 1; i < n; ++i) EXPECT_LE(k.eigenvalues()(i - 1), k.eigenvalues()(i));
  // -L_U phi = lambda phi with zero values outside the domain.
  for (Eigen::Index j = 0; j < n; ++j) {
    std::vector<double> phi(g.size(), 0.0);
    for (Eigen::Index i = 0; i < n; ++i) phi[dom[i]] = k.modes()(i, j);
    VertexFunction f(phi);
    for (Eigen::Index i = 0; i < n; ++i)
      EXPECT_NEAR(-laplacian_at(g, f, dom[i]), k.eigenvalues()(j) * phi[dom[i]], 1e-10);
  }
}

TEST(Exhaustion, LargeTorusMatchesLatticeExhaustion) {
  auto torus = families::torus(30, 30, MeasureMode::unit);
  auto patch = families::lattice_patch(31, MeasureMode::unit);
  const VertexId center = patch.index_of("15,15");
  auto exhausted = heat_kernel(patch, center, center, 1.0);
  ASSERT_TRUE(exhausted.converged);
  EXPECT_NEAR(SpectralKernel::global(torus)(1.0, 0, 0), exhausted.value, 1e-6);
  const VertexId east = patch.index_of("16,15");
  auto off = heat_kernel(patch, center, east, 1.0);
  EXPECT_NEAR(SpectralKernel::global(torus)(1.0, 0, torus.index_of("1,0")), off.value, 1e-6);
}

TEST(Poisson, RejectsOverflowingCutoff) { EXPECT_THROW(poisson_cutoff(1e8, 1e-12), Error); }

TEST(Submarkov, ScalesGammaAndGamma2Tilde) {
  std::mt19937_64 rng(79);
  for (int trial = 0; trial < 20; ++trial) {
    auto base = testsupport::random_graph(rng, {.loop_probability = 0.0, .random_measure = false});
    auto g = families::add_loops(base, 3.0, MeasureMode::degree);
    const double alpha = 0.5 * largest_delta_alpha(g);
    ASSERT_GT(alpha, 0.0);
    auto h = submarkov_transform(g, alpha);
    auto f = testsupport::random_function(rng, g.size(), 0.5, 2.0);
    for (VertexId x = 0; x < g.size(); ++x) {
      EXPECT_NEAR(gamma_at(h, f, x), gamma_at(g, f, x) / (1 - alpha), 1e-12);
      EXPECT_NEAR(gamma2_tilde_at(h, f, x), gamma2_tilde_at(g, f, x) / ((1 - alpha) * (1 - alpha)), 1e-12);
      // The reduced walk p - alpha I stays nonnegative.
      for (const auto& nb : g.neighbors(x))
        EXPECT_GE(nb.weight / g.degree(x) - (nb.vertex == x ? alpha : 0.0), -1e-15);
    }
  }
}

TEST(Submarkov, TriangleWithUnitLoopsLosesItsLoops) {
  auto g = families::add_loops(families::cycle(3), 1.0, MeasureMode::degree);
  auto h = submarkov_transform(g, 1.0 / 3.0);
  for (VertexId x = 0; x < 3; ++x) {
    EXPECT_FALSE(h.has_loop(x));
    EXPECT_NEAR(h.weight(x, (x + 1) % 3), 1.5, 1e-15);
  }
  auto tiny = submarkov_transform(g, 1e-12);
  for (VertexId x = 0; x < 3; ++x) EXPECT_NEAR(tiny.loop_weight(x), 1.0, 1e-11);
}
