#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <illiquid_eq/grid.hpp>

using namespace illiquid_eq;

TEST(Grid, NodesAndChecks) {
  const Grid1D g{0.0, 2.0, 5, 3};
  EXPECT_DOUBLE_EQ(g.dx(), 0.5);
  EXPECT_DOUBLE_EQ(g.x(4), 2.0);
  EXPECT_DOUBLE_EQ(g.t(2, 3.0), 3.0);
  EXPECT_EQ(g.refined(4).nx, 17u);
  EXPECT_THROW((Grid1D{1.0, 1.0, 5, 3}.check()), InputError);
  EXPECT_THROW((Grid1D{0.0, 1.0, 2, 3}.check()), InputError);
  EXPECT_THROW((Grid1D{0.0, 1.0, 3, 1}.check()), InputError);
}

TEST(Grid, TridiagonalMatchesDirectProduct) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const std::size_t n = 40;
  std::vector<double> lo(n), di(n), up(n), x(n), rhs(n), scratch;
  for (std::size_t j = 0; j < n; ++j) {
    lo[j] = u(rng);
    up[j] = u(rng);
    di[j] = 3.0 + u(rng);
    x[j] = u(rng);
  }
  for (std::size_t j = 0; j < n; ++j) {
    rhs[j] = di[j] * x[j];
    if (j > 0) rhs[j] += lo[j] * x[j - 1];
    if (j + 1 < n) rhs[j] += up[j] * x[j + 1];
  }
  solve_tridiagonal(lo, di, up, rhs, scratch);
  for (std::size_t j = 0; j < n; ++j) EXPECT_NEAR(rhs[j], x[j], 1e-12);
}

TEST(Grid, ZeroPivotRaises) {
  std::vector<double> lo{0, 1}, di{0, 1}, up{1, 0}, rhs{1, 1}, s;
  EXPECT_THROW(solve_tridiagonal(lo, di, up, rhs, s), NumericalError);
}

TEST(Grid, DifferencesExactOnQuadratics) {
  const double h = 0.1;
  std::vector<double> u(11), d1(11), d2(11);
  for (std::size_t j = 0; j < u.size(); ++j) {
    const double x = h * j;
    u[j] = 2.0 + 3.0 * x - 1.5 * x * x;
  }
  diff1(u, h, d1);
  diff2(u, h, d2);
  for (std::size_t j = 0; j < u.size(); ++j) {
    EXPECT_NEAR(d1[j], 3.0 - 3.0 * h * j, 1e-11);
    EXPECT_NEAR(d2[j], -3.0, 1e-9);
  }
}

TEST(Grid, SmoothingKeepsLinearData) {
  std::vector<double> u{1, 2, 3, 4, 5};
  smooth3(u);
  for (std::size_t j = 0; j < u.size(); ++j) EXPECT_DOUBLE_EQ(u[j], 1.0 + j);
}

TEST(Grid, BilinearExactOnBilinearField) {
  const Grid1D g{-1.0, 1.0, 21, 11};
  Field2D f(g.nt, g.nx);
  for (std::size_t n = 0; n < g.nt; ++n)
    for (std::size_t j = 0; j < g.nx; ++j) {
      const double t = g.t(n, 2.0), x = g.x(j);
      f(n, j) = 1.0 + 2.0 * t - x + 0.5 * t * x;
    }
  for (double t : {0.0, 0.33, 1.71, 2.0})
    for (double x : {-1.0, -0.27, 0.5, 1.0})
      EXPECT_NEAR(interp_bilinear(f, g, 2.0, t, x), 1.0 + 2.0 * t - x + 0.5 * t * x, 1e-12);
}
