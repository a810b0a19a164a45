#include <gtest/gtest.h>

#include <cmath>

#include "curvegraph/families.hpp"
#include "curvegraph/operators.hpp"
#include "support.hpp"

using namespace curvegraph;
using testsupport::rel_err;

namespace {

WeightedGraph single_edge() { return families::path(2); }

}  // namespace

TEST(Anchors, SingleEdge) {
  auto g = single_edge();
  VertexFunction f({0.0, 1.0});
  EXPECT_NEAR(laplacian_at(g, f, 0), 1.0, 1e-14);
  EXPECT_NEAR(gamma_at(g, f, 0), 0.5, 1e-14);
  EXPECT_NEAR(gamma2_at(g, f, 0), 1.0, 1e-14);

  VertexFunction p({1.0, 2.0});
  auto ratio = transform(gamma(g, p), [](double v) { return v; });
  auto q = combine(ratio, p, [](double a, double b) { return a / b; });
  EXPECT_NEAR(gamma_at(g, p, q, 0), -1.0 / 8.0, 1e-14);
  EXPECT_NEAR(gamma2_tilde_at(g, p, 0), 9.0 / 8.0, 1e-14);

  VertexFunction e({1.0, std::exp(1.0)});
  EXPECT_NEAR(laplace_log_checked(g, e, 0), 1.0, 1e-14);
}

TEST(Operators, LoopsDoNotContribute) {
  auto plain = families::cycle(5);
  auto looped = families::add_loops(plain, 3.0, MeasureMode::unit);
  VertexFunction f({0.3, -1.0, 2.0, 0.5, 1.5});
  for (VertexId x = 0; x < 5; ++x) {
    EXPECT_DOUBLE_EQ(laplacian_at(plain, f, x), laplacian_at(looped, f, x));
    EXPECT_DOUBLE_EQ(gamma2_at(plain, f, x), gamma2_at(looped, f, x));
  }
}

TEST(Operators, MatchDenseOracle) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    auto g = testsupport::random_graph(rng);
    testsupport::DenseOracle oracle(g);
    for (int k = 0; k < 5; ++k) {
      auto f = testsupport::random_function(rng, g.size());
      auto h = testsupport::random_function(rng, g.size());
      auto pos = testsupport::random_function(rng, g.size(), 0.2, 3.0);
      auto fv = testsupport::to_eigen(f), hv = testsupport::to_eigen(h), pv = testsupport::to_eigen(pos);
      auto lap = oracle.laplacian(fv);
      auto gam = oracle.gamma(fv, hv);
      auto g2 = oracle.gamma2(fv, hv);
      auto g2t = oracle.gamma2_tilde(pv);
      auto ll = oracle.laplace_log(pv);
      for (VertexId x = 0; x < g.size(); ++x) {
        EXPECT_LE(rel_err(laplacian_at(g, f, x), lap(x)), 1e-12);
        EXPECT_LE(rel_err(gamma_at(g, f, h, x), gam(x)), 1e-12);
        EXPECT_LE(rel_err(gamma2_at(g, f, h, x), g2(x)), 1e-12);
        EXPECT_LE(rel_err(gamma2_tilde_at(g, pos, x), g2t(x)), 1e-12);
        EXPECT_LE(rel_err(laplace_log_checked(g, pos, x), ll(x)), 1e-12);
        auto q = point_quantities(g, pos, x, true);
        EXPECT_LE(rel_err(q.gamma2, oracle.gamma2(pv, pv)(x)), 1e-12);
        EXPECT_LE(rel_err(q.gamma2_tilde, g2t(x)), 1e-12);
      }
    }
  }
}

TEST(Property, ChainRuleForSquareRoot) {
  // L u = 2 sqrt(u) L sqrt(u) + 2 Gamma(sqrt(u))
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = testsupport::random_graph(rng);
    auto u = testsupport::random_function(rng, g.size(), 0.1, 4.0);
    auto r = transform(u, [](double v) { return std::sqrt(v); });
    for (VertexId x = 0; x < g.size(); ++x) {
      double lhs = laplacian_at(g, u, x);
      double rhs = 2.0 * r(x) * laplacian_at(g, r, x) + 2.0 * gamma_at(g, r, x);
      EXPECT_LE(rel_err(lhs, rhs), 1e-12);
    }
  }
}

TEST(Property, GammaIsBilinearSymmetricAndNonnegative) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto g = testsupport::random_graph(rng);
    auto f = testsupport::random_function(rng, g.size());
    auto h = testsupport::random_function(rng, g.size());
    auto sum = combine(f, h, [](double a, double b) { return 2.0 * a + b; });
    for (VertexId x = 0; x < g.size(); ++x) {
      EXPECT_GE(gamma_at(g, f, x), 0.0);
      EXPECT_LE(rel_err(gamma_at(g, f, h, x), gamma_at(g, h, f, x)), 1e-14);
      double expect = 2.0 * gamma_at(g, f, h, x) + gamma_at(g, h, h, x);
      EXPECT_LE(rel_err(gamma_at(g, sum, h, x), expect), 1e-12);
    }
  }
}

TEST(Domain, PartialFunctionsRestrictEvaluation) {
  auto g = families::path(6);
  VertexFunction f({1.0, 2.0, 3.0, 5.0, 0.0, 0.0}, {1, 1, 1, 1, 0, 0});
  auto lap = laplacian(g, f);
  EXPECT_TRUE(lap.is_defined(2));
  EXPECT_FALSE(lap.is_defined(3));
  auto g2 = gamma2(g, f);
  EXPECT_TRUE(g2.is_defined(1));
  EXPECT_FALSE(g2.is_defined(2));
  try {
    laplacian_at(g, f, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::missing_value);
  }
}

TEST(Domain, PositivityThreshold) {
  auto g = families::path(3);
  VertexFunction f({1.0, 1e-13, 1.0});
  try {
    gamma2_tilde_at(g, f, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::nonpositive_value);
  }
  VertexFunction ok({1.0, 2e-12, 1.0});
  EXPECT_NO_THROW(laplace_log_checked(g, ok, 0));
}
