#include <gtest/gtest.h>

#include <random>

#include "rebama/error.hpp"
#include "rebama/projection.hpp"

namespace rebama {
namespace {

Eigen::VectorXd vec(std::initializer_list<double> xs) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index k = 0;
  for (double x : xs) v[k++] = x;
  return v;
}

Eigen::VectorXd random_vector(std::mt19937_64& rng, int n, double spread = 2.0) {
  std::uniform_real_distribution<double> u(-spread, spread);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

TEST(HalfSpace, HandCases) {
  const Eigen::VectorXd c = vec({1, 1});
  EXPECT_EQ(project_halfspace(vec({0, 0}), c, 1.0), vec({0, 0}));
  EXPECT_EQ(project_halfspace(vec({2, 0}), c, 1.0), vec({1.5, -0.5}));
  EXPECT_EQ(project_halfspace(vec({0.25, 0.75}), c, 1.0), vec({0.25, 0.75}));
  EXPECT_THROW(project_halfspace(vec({1, 1}), vec({0, 0}), 1.0), ValidationError);
}

TEST(Polytope, RejectsBadRows) {
  EXPECT_THROW(HPolytope({}, vec({0})), ValidationError);
  EXPECT_THROW(HPolytope({{vec({0, 0}), 1.0}}, vec({0, 0})), ValidationError);
  EXPECT_THROW(HPolytope({{vec({1, 0}), 1.0}}, vec({2, 0})), ValidationError);
  EXPECT_THROW(HPolytope({{vec({1}), 1.0}}, vec({0, 0})), ValidationError);
}

TEST(Simplex, HandCases) {
  const auto d2 = SimplexProduct{{2}}.polytope();
  const auto d3 = SimplexProduct{{3}}.polytope();
  EXPECT_LT((dykstra_project(vec({0.8, 0.8}), d2) - vec({0.5, 0.5})).norm(), 1e-6);
  EXPECT_LT((dykstra_project(vec({1.5, -0.3, 0.1}), d3) - vec({1.0, 0.0, 0.0})).norm(), 1e-6);
  EXPECT_EQ(project_simplex(vec({0.8, 0.8})), vec({0.5, 0.5}));
  EXPECT_EQ(project_simplex(vec({1.5, -0.3, 0.1})), vec({1.0, 0.0, 0.0}));
  EXPECT_EQ(project_simplex(vec({-5, -5})), vec({0.5, 0.5}));
  EXPECT_EQ(project_simplex(vec({0.2, 0.3, 0.5})), vec({0.2, 0.3, 0.5}));
  EXPECT_LT((dykstra_project(vec({0.2, 0.3, 0.5}), d3) - vec({0.2, 0.3, 0.5})).norm(), 1e-6);
}

TEST(BoxProjection, Clamp) {
  const Box box{vec({-0.3}), vec({0.3})};
  EXPECT_EQ(project_box(vec({0.9}), box), vec({0.3}));
  EXPECT_EQ(project_box(vec({0.1}), box), vec({0.1}));
  EXPECT_EQ(project(vec({-0.9}), box, ProjectionMethod::closed_form), vec({-0.3}));
}

TEST(Dykstra, AgreesWithClosedFormOnSimplexProducts) {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<int> len(2, 6);
  for (int k = 0; k < 1000; ++k) {
    const int n = len(rng);
    const SimplexProduct domain{{n, n}};
    const Eigen::VectorXd a = random_vector(rng, 2 * n);
    const Eigen::VectorXd exact = project(a, domain, ProjectionMethod::closed_form);
    const Eigen::VectorXd approx = project(a, domain, ProjectionMethod::dykstra);
    ASSERT_LE((exact - approx).norm(), 1e-6) << "trial " << k;
    EXPECT_NEAR(exact.head(n).sum(), 1.0, 1e-12);
    EXPECT_GE(exact.minCoeff(), 0.0);
  }
}

TEST(Dykstra, AgreesWithClampOnBoxes) {
  std::mt19937_64 rng(43);
  std::uniform_int_distribution<int> len(2, 6);
  std::uniform_real_distribution<double> half(0.05, 1.0);
  for (int k = 0; k < 1000; ++k) {
    const int n = len(rng);
    Box box{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (int j = 0; j < n; ++j) {
      const double c = std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
      const double w = half(rng);
      box.lower[j] = c - w;
      box.upper[j] = c + w;
    }
    const Eigen::VectorXd a = random_vector(rng, n);
    ASSERT_LE((project_box(a, box) - dykstra_project(a, box.polytope())).norm(), 1e-6);
  }
}

TEST(Dykstra, IdempotentFeasibleNonExpansive) {
  std::mt19937_64 rng(44);
  const SimplexProduct domain{{3, 4}};
  const auto poly = domain.polytope();
  for (int k = 0; k < 300; ++k) {
    const Eigen::VectorXd a = random_vector(rng, 7);
    const Eigen::VectorXd b = random_vector(rng, 7);
    const Eigen::VectorXd pa = dykstra_project(a, poly);
    const Eigen::VectorXd pb = dykstra_project(b, poly);
    EXPECT_LE(poly.max_violation(pa), 1e-8);
    EXPECT_LE((dykstra_project(pa, poly) - pa).norm(), 1e-8);
    EXPECT_LE((pa - pb).norm(), (a - b).norm() + 2e-8);
  }
}

TEST(Dykstra, ReportsNonConvergence) {
  const auto poly = SimplexProduct{{4}}.polytope();
  try {
    dykstra_project(vec({3, -1, 2, 0.5}), poly, {1e-14, 1});
    FAIL() << "expected NonConvergence";
  } catch (const NonConvergence& e) {
    EXPECT_EQ(e.cycles(), 1);
    EXPECT_EQ(e.last_iterate().size(), 4);
    EXPECT_GT(e.residual(), 0.0);
  }
}

TEST(LpVertex, HandCases) {
  EXPECT_EQ(lp_vertex_argmax(vec({0.2, -0.1, 0.7}), SimplexProduct{{3}}), vec({0, 0, 1}));
  const Box box{vec({-1, -1}), vec({1, 1})};
  EXPECT_EQ(lp_vertex_argmax(vec({0.3, -0.2}), box), vec({1, -1}));
  EXPECT_EQ(lp_vertex_argmax(vec({0, 0}), box), vec({-1, -1}));
  EXPECT_EQ(lp_vertex_argmax(vec({0, 0, 0, 0}), SimplexProduct{{2, 2}}), vec({1, 0, 1, 0}));
}

// Enumerates every vertex of small products and checks the returned one is optimal.
TEST(LpVertex, AttainsMaximumOverAllVertices) {
  std::mt19937_64 rng(45);
  std::uniform_int_distribution<int> len(1, 5);
  for (int k = 0; k < 500; ++k) {
    const int n = len(rng), m = len(rng);
    const Eigen::VectorXd g = random_vector(rng, n + m);
    const Eigen::VectorXd x = lp_vertex_argmax(g, SimplexProduct{{n, m}});
    double best = -1e300;
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < m; ++j) best = std::max(best, g[i] + g[n + j]);
    }
    EXPECT_DOUBLE_EQ(g.dot(x), best);

    const Box box{-Eigen::VectorXd::Ones(n), 2.0 * Eigen::VectorXd::Ones(n)};
    const Eigen::VectorXd gb = g.head(n);
    const Eigen::VectorXd xb = lp_vertex_argmax(gb, box);
    double bbest = -1e300;
    for (int mask = 0; mask < (1 << n); ++mask) {
      double v = 0.0;
      for (int i = 0; i < n; ++i) v += gb[i] * ((mask >> i) & 1 ? 2.0 : -1.0);
      bbest = std::max(bbest, v);
    }
    EXPECT_DOUBLE_EQ(gb.dot(xb), bbest);
  }
}

}  // namespace
}  // namespace rebama
