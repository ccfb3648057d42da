#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include <illiquid_eq/ou.hpp>
#include <illiquid_eq/pde.hpp>
#include <illiquid_eq/simulate.hpp>

using namespace illiquid_eq;

namespace {

const std::vector<double> kTwoAgentKappas{0.8625, 0.2875};

BeliefSet two_agent_beliefs() { return BeliefSet::ornstein_uhlenbeck(kTwoAgentKappas, 1.25, 0.128); }

MarketSpec two_agent_spec(double gamma = 1e-8, double lambda = 1e-7) {
  return {CostKernel(gamma, lambda, 3.0), 0.0, {0.0, 0.0}, [](double x) { return x; }};
}

Grid1D two_agent_grid(std::size_t nx = 201, std::size_t nt = 301) {
  const double sd = 0.128 / std::sqrt(2.0 * 0.575);
  return {1.25 - 6 * sd, 1.25 + 6 * sd, nx, nt};
}

// E[f(x + m + s Z)] by the trapezoid rule in z.
template <class F>
double gaussian_expectation(F&& f, double x, double m, double s) {
  const int n = 4000;
  const double zmax = 10.0, dz = 2 * zmax / n;
  double acc = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double z = -zmax + k * dz;
    const double w = (k == 0 || k == n) ? 0.5 : 1.0;
    acc += w * f(x + m + s * z) * std::exp(-0.5 * z * z);
  }
  return acc * dz / std::sqrt(2.0 * std::numbers::pi);
}

double at(const Field2D& f, const Grid1D& g, double T, double t, double x) { return interp_bilinear(f, g, T, t, x); }

}  // namespace

TEST(Pde, TerminalConditionHolds) {
  const auto g = two_agent_grid();
  auto spec = two_agent_spec();
  spec.payoff = [](double x) { return std::sin(x); };
  const auto sol = solve_equilibrium(spec, two_agent_beliefs(), g);
  for (std::size_t j = 0; j < g.nx; ++j) {
    for (const auto& vi : sol.vi) EXPECT_EQ(vi(g.nt - 1, j), std::sin(g.x(j)));
    EXPECT_EQ(sol.v(g.nt - 1, j), std::sin(g.x(j)));
  }
}

TEST(Pde, AggregateRelationWithSupply) {
  const Grid1D g{-3.0, 4.0, 141, 101};
  const auto b = BeliefSet::constant_coefficients({0.05, -0.05}, {0.2, 0.3});
  const MarketSpec spec{CostKernel(0.5, 0.5, 1.0), 1.0, {0.7, 0.3}, [](double x) { return std::tanh(x); }};
  const auto sol = solve_equilibrium(spec, b, g);
  for (std::size_t n = 0; n < g.nt; ++n) {
    const double shift = 0.5 * spec.kernel.log_deriv(g.t(n, 1.0)) * 1.0 / 2.0;
    for (std::size_t j = 0; j < g.nx; ++j)
      EXPECT_NEAR(sol.v(n, j), 0.5 * (sol.vi[0](n, j) + sol.vi[1](n, j)) + shift, 1e-12);
  }
}

TEST(Pde, FrictionlessConstantPayoff) {
  const Grid1D g{-2.0, 2.0, 41, 51};
  const auto b = BeliefSet::constant_coefficients({0.1, -0.2}, {0.3, 0.2});
  MarketSpec spec{CostKernel::frictionless(0.4, 2.0), 0.0, {0.5, -0.5}, [](double) { return 3.0; }};
  const auto v0 = solve_frictionless(spec, b, g);
  for (double x : v0.data()) EXPECT_NEAR(x, 3.0, 1e-12);
  spec.supply = 1.5;
  spec.allocations = {1.0, 0.5};
  const auto v1 = solve_frictionless(spec, b, g);
  for (std::size_t n = 0; n < g.nt; ++n)
    for (std::size_t j = 0; j < g.nx; ++j)
      EXPECT_NEAR(v1(n, j), 3.0 - 0.4 * 1.5 * (2.0 - g.t(n, 2.0)) / 2.0, 1e-10);
}

TEST(Pde, FrictionlessOuValue) {
  const auto g = two_agent_grid();
  const auto v0 = solve_frictionless(two_agent_spec(), two_agent_beliefs(), g);
  EXPECT_NEAR(at(v0, g, 3.0, 0.0, 1.0), 1.25 - 0.25 * std::exp(-1.725), 2e-5);
}

TEST(Pde, RiskNeutralValues) {
  const auto g = two_agent_grid();
  const auto rn = solve_risk_neutral(two_agent_spec(), two_agent_beliefs(), g);
  EXPECT_NEAR(at(rn.price, g, 3.0, 0.0, 1.0), 1.18784, 2e-5);
  ASSERT_EQ(rn.agents.size(), 2u);

  auto spec = two_agent_spec();
  spec.payoff = [](double) { return -0.7; };
  const auto c = solve_risk_neutral(spec, two_agent_beliefs(), g);
  for (const auto& a : c.agents)
    for (double x : a.data()) EXPECT_NEAR(x, -0.7, 1e-12);

  const auto one = BeliefSet::ornstein_uhlenbeck({0.4}, 1.25, 0.128);
  const MarketSpec single{CostKernel::risk_neutral(1.0, 3.0), 0.0, {0.0}, [](double x) { return x * x; }};
  const auto s = solve_risk_neutral(single, one, g);
  EXPECT_EQ(max_abs_diff(s.price, s.agents[0]), 0.0);
}

TEST(Pde, MatchesOuOracleOnInteriorBox) {
  const auto g = two_agent_grid();
  const auto sol = solve_equilibrium(two_agent_spec(), two_agent_beliefs(), g);
  const OuModel ou(kTwoAgentKappas, 1.25, 0.128, 3.0);
  const auto ab = solve_ab(ou, CostKernel(1e-8, 1e-7, 3.0));
  const double lo = 1.25 - 3 * ou.stationary_sd(), hi = 1.25 + 3 * ou.stationary_sd();
  double worst = 0.0;
  for (std::size_t n = 0; n < g.nt; ++n)
    for (std::size_t j = 0; j < g.nx; ++j) {
      const double x = g.x(j);
      if (x < lo || x > hi) continue;
      worst = std::max(worst, std::fabs(sol.v(n, j) - price(ou, ab, g.t(n, 3.0), x)));
      for (std::size_t i = 0; i < 2; ++i)
        worst = std::max(worst, std::fabs(sol.vi[i](n, j) - agent_value(ab, i, g.t(n, 3.0), x)));
    }
  EXPECT_LE(worst, 1e-4);
}

TEST(Pde, HomogeneousBeliefsPriceIsDiscountedExpectation) {
  const Grid1D g{-4.0, 5.0, 361, 201};
  const double b = 0.1, s = 0.3, T = 1.0, gamma = 0.5, a0 = 1.0;
  const auto beliefs = BeliefSet::constant_coefficients({b, b}, {s, s});
  const auto f = [](double x) { return std::tanh(x); };
  const MarketSpec spec{CostKernel(gamma, 0.2, T), a0, {1.5, -0.5}, f};
  const auto sol = solve_equilibrium(spec, beliefs, g);
  for (double x : {-0.5, 0.0, 0.4, 1.0}) {
    const double expect = gaussian_expectation(f, x, b * T, s * std::sqrt(T)) - gamma * a0 * T / 2.0;
    EXPECT_NEAR(at(sol.v, g, T, 0.0, x), expect, 2e-4) << "x = " << x;
  }
  // Monte Carlo oracle from the simulation module.
  const auto batch = simulate(beliefs, Measure::of_agent(0), 0.4, 0.0, T, 2, 40000, 17);
  std::vector<double> z(batch.npaths);
  for (std::size_t p = 0; p < batch.npaths; ++p) z[p] = f(batch(p, 1)) - gamma * a0 * T / 2.0;
  const auto e = mean_and_se(z);
  EXPECT_LE(std::fabs(at(sol.v, g, T, 0.0, 0.4) - e.mean), 3.0 * e.se);
}

TEST(Pde, ZeroSupplyDependsOnlyOnCostRatio) {
  const auto g = two_agent_grid(101, 151);
  auto spec = two_agent_spec();
  spec.payoff = [](double x) { return std::sin(3.0 * x); };
  const auto base = solve_equilibrium(spec, two_agent_beliefs(), g);
  for (double c : {10.0, 0.1}) {
    auto scaled = spec;
    scaled.kernel = CostKernel(c * 1e-8, c * 1e-7, 3.0);
    const auto other = solve_equilibrium(scaled, two_agent_beliefs(), g);
    EXPECT_LE(max_abs_diff(base.v, other.v), 1e-10) << "c = " << c;
  }
}

TEST(Pde, ZeroHomogeneityWithSupply) {
  const Grid1D g{-3.0, 4.0, 101, 101};
  const auto b = BeliefSet::constant_coefficients({0.05, -0.05}, {0.2, 0.3});
  const auto f = [](double x) { return std::tanh(x); };
  const MarketSpec spec{CostKernel(0.5, 0.2, 1.0), 2.0, {1.5, 0.5}, f};
  const auto base = solve_equilibrium(spec, b, g);
  for (double c : {10.0, 0.1}) {
    const MarketSpec scaled{CostKernel(c * 0.5, c * 0.2, 1.0), 2.0 / c, {1.5 / c, 0.5 / c}, f};
    const auto other = solve_equilibrium(scaled, b, g);
    EXPECT_LE(max_abs_diff(base.v, other.v), 1e-10) << "c = " << c;
  }
}

TEST(Pde, SpatialOrderForSmoothData) {
  const auto beliefs = BeliefSet::ornstein_uhlenbeck({0.9, 0.3}, 1.25, 0.2);
  const MarketSpec spec{CostKernel(1e-2, 1e-2, 1.0), 0.0, {0.0, 0.0}, [](double x) { return std::tanh(2.0 * (x - 1.25)); }};
  const double lo = 1.25 - 6 * 0.2 / std::sqrt(1.2), hi = 1.25 + 6 * 0.2 / std::sqrt(1.2);
  std::vector<Field2D> v;
  for (std::size_t nx : {41, 81, 161}) v.push_back(solve_equilibrium(spec, beliefs, {lo, hi, nx, 801}).v);
  double e1 = 0.0, e2 = 0.0;
  for (std::size_t j = 10; j <= 30; ++j) {
    e1 = std::max(e1, std::fabs(v[0](0, j) - v[1](0, 2 * j)));
    e2 = std::max(e2, std::fabs(v[1](0, 2 * j) - v[2](0, 4 * j)));
  }
  EXPECT_GE(std::log2(e1 / e2), 1.8) << e1 << " " << e2;
}

TEST(Pde, MatchesFeynmanKacEstimate) {
  const Grid1D g{-3.0, 4.0, 281, 201};
  const auto b = BeliefSet::constant_coefficients({0.2, -0.1}, {0.25, 0.35});
  const double T = 1.0;
  const MarketSpec spec{CostKernel(1.0, 0.5, T), 0.0, {0.0, 0.0}, [](double x) { return std::tanh(x); }};
  const auto sol = solve_equilibrium(spec, b, g);
  const SurfaceFn surf{[&](double t, double x) { return interp_bilinear(sol.v, g, T, t, x); },
                       Interval{g.x_min, g.x_max}};
  for (std::size_t i = 0; i < 2; ++i) {
    const auto fk = feynman_kac_vi(b, i, surf, spec.kernel, spec.payoff, 0.0, 0.5, 201, 40000, 5 + i);
    EXPECT_LE(std::fabs(fk.mean - at(sol.vi[i], g, T, 0.0, 0.5)), 3.0 * fk.se) << "agent " << i;
  }
}

TEST(Pde, PricePathDiffusionIsSlopeTimesVol) {
  const auto g = two_agent_grid(101, 101);
  const auto sol = solve_equilibrium(two_agent_spec(), two_agent_beliefs(), g);
  const auto st = price_path_stats(sol, two_agent_beliefs());
  for (std::size_t n = 0; n < g.nt; n += 10)
    for (std::size_t j = 0; j < g.nx; j += 10)
      for (std::size_t i = 0; i < 2; ++i) EXPECT_DOUBLE_EQ(st.diffusion[i][n * g.nx + j], sol.dv_dx(n, j) * 0.128);
}

TEST(Pde, DerivativeOfAffineSolution) {
  const auto g = two_agent_grid(101, 101);
  const auto sol = solve_equilibrium(two_agent_spec(), two_agent_beliefs(), g);
  for (std::size_t j : {0u, 50u, 100u}) EXPECT_NEAR(sol.dv_dx(g.nt - 1, j), 1.0, 1e-10);
}

TEST(Pde, Errors) {
  const auto g = two_agent_grid(101, 101);
  EXPECT_THROW(solve_equilibrium({CostKernel::risk_neutral(1.0, 3.0), 0.0, {0.0, 0.0}, [](double x) { return x; }},
                                 two_agent_beliefs(), g),
               InputError);
  const BeliefSet flat({{[](double, double) { return 0.0; }, [](double, double x) { return x > 1.0 ? 0.0 : 0.1; }}});
  const MarketSpec one{CostKernel(1.0, 1.0, 1.0), 0.0, {0.0}, [](double x) { return x; }};
  EXPECT_THROW(solve_equilibrium(one, flat, {0.0, 2.0, 21, 11}), InputError);
  EXPECT_THROW(solve_equilibrium(two_agent_spec(), two_agent_beliefs(), {0.0, 2.0, 3, 11}), InputError);
  auto bad_alloc = two_agent_spec();
  bad_alloc.allocations = {1.0, 1.0};
  EXPECT_THROW(solve_equilibrium(bad_alloc, two_agent_beliefs(), g), InputError);
}

TEST(Pde, CouplingIterationCapReportsHistory) {
  SolverOptions opt;
  opt.picard_max_iter = 1;
  opt.picard_tol = 0.0;
  try {
    (void)solve_equilibrium(two_agent_spec(1.0, 1.0), two_agent_beliefs(), two_agent_grid(51, 11), opt);
    FAIL() << "expected ConvergenceError";
  } catch (const ConvergenceError& e) {
    EXPECT_FALSE(e.residual_history().empty());
  }
}
