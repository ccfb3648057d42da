#include <cmath>

#include <gtest/gtest.h>

#include <illiquid_eq/portfolio.hpp>

using namespace illiquid_eq;

namespace {

const OuModel two_agent(std::vector<double>{0.8625, 0.2875}, 1.25, 0.128, 3.0);
const CostKernel two_agent_kernel(1e-8, 1e-7, 3.0);

BeliefSet two_agent_beliefs() { return BeliefSet::ornstein_uhlenbeck({0.8625, 0.2875}, 1.25, 0.128); }

const OuEquilibriumView& two_agent_view() {
  static const OuEquilibriumView view(two_agent, solve_ab(two_agent, two_agent_kernel));
  return view;
}

// Same equilibrium with every value shifted by a constant.
class ShiftedView final : public EquilibriumView {
 public:
  ShiftedView(const EquilibriumView& base, double c) : base_(base), c_(c) {}
  std::size_t agents() const override { return base_.agents(); }
  double agent_value(std::size_t i, double t, double x) const override { return base_.agent_value(i, t, x) + c_; }
  double price(double t, double x) const override { return base_.price(t, x) + c_; }
  double price_drift(std::size_t i, double t, double x) const override { return base_.price_drift(i, t, x); }

 private:
  const EquilibriumView& base_;
  double c_;
};

double rate_scale_of(const EquilibriumView& view, const CostKernel& k, std::size_t i, double a,
                     const SimulationBatch& b) {
  double s = 0.0;
  for (std::size_t p = 0; p < b.npaths; ++p) {
    const auto st = integrate_agent(view, k, i, a, b, p);
    double nrm = 0.0;
    for (std::size_t n = 0; n + 1 < b.nt; ++n) nrm += b.dt() * st.rate[n] * st.rate[n];
    s += std::sqrt(nrm);
  }
  return s / static_cast<double>(b.npaths);
}

}  // namespace

TEST(Portfolio, RateExamples) {
  EXPECT_NEAR(equilibrium_rate(0, 0.0, 0.0, 1.0001, 1.0, two_agent_kernel), 1e3, 1e-6);
  EXPECT_EQ(equilibrium_rate(0, 3.0, 0.4, 1.2, 1.2, two_agent_kernel), 0.0);
  const CostKernel k(1.0, 1.0, 1.0);
  EXPECT_NEAR(equilibrium_rate(1, 0.0, 2.0, 0.0, 0.0, k), -2.0 * std::tanh(1.0), 1e-14);
  EXPECT_THROW(equilibrium_rate(0, 0.0, 0.0, 1.0, 1.0, CostKernel::risk_neutral(1.0, 1.0)), InputError);
}

TEST(Portfolio, HomogeneousBeliefsFollowTanhFlow) {
  const OuModel ou({0.5, 0.5}, 1.0, 0.2, 1.0);
  const CostKernel k(1.0, 1.0, 1.0);
  const OuEquilibriumView view(ou, solve_ab(ou, k));
  const auto beliefs = BeliefSet::ornstein_uhlenbeck({0.5, 0.5}, 1.0, 0.2);
  const MarketSpec spec{k, 0.0, {1.0, -1.0}, [](double x) { return x; }};
  const auto batch = simulate(beliefs, Measure::average(), 0.8, 0.0, 1.0, 2001, 3, 5);
  for (std::size_t p = 0; p < batch.npaths; ++p) {
    const auto sp = integrate_strategies(view, spec, batch, p);
    for (std::size_t n = 0; n < batch.nt; n += 100) {
      const double exact = std::cosh(1.0 - batch.t(n)) / std::cosh(1.0);
      EXPECT_NEAR(sp.positions[0][n], exact, 1e-3);
      EXPECT_NEAR(sp.positions[1][n], -exact, 1e-3);
    }
    EXPECT_LE(clearing_residual(sp, 0.0), 1e-10);
  }
}

TEST(Portfolio, SingleAgentHoldsSupply) {
  const auto beliefs = BeliefSet::constant_coefficients({0.05}, {0.2});
  const MarketSpec spec{CostKernel(0.5, 0.5, 1.0), 1.0, {1.0}, [](double x) { return x; }};
  const Grid1D g{-1.0, 3.0, 81, 101};
  const auto sol = solve_equilibrium(spec, beliefs, g);
  const GridEquilibriumView view(sol, beliefs);
  // Path mesh on the grid's time levels, so no interpolation in t.
  const auto batch = simulate(beliefs, Measure::average(), 1.0, 0.0, 1.0, g.nt, 5, 3);
  for (std::size_t p = 0; p < batch.npaths; ++p) {
    const auto sp = integrate_strategies(view, spec, batch, p);
    for (double v : sp.positions[0]) EXPECT_NEAR(v, 1.0, 1e-6);
    EXPECT_LE(clearing_residual(sp, 1.0), 1e-6);
  }
}

TEST(Portfolio, TwoAgentSpecClearsMarket) {
  const MarketSpec spec{two_agent_kernel, 0.0, {0.0, 0.0}, [](double x) { return x; }};
  const auto batch = simulate(two_agent_beliefs(), Measure::average(), 1.0, 0.0, 3.0, 2001, 20, 9);
  for (std::size_t p = 0; p < batch.npaths; ++p) {
    const auto sp = integrate_strategies(two_agent_view(), spec, batch, p);
    EXPECT_LE(clearing_residual(sp, 0.0), 1e-6);
    EXPECT_EQ(sp.positions[0][0], 0.0);
    for (const auto& r : sp.rates) EXPECT_NEAR(r.back(), 0.0, 1e-9);
  }
}

TEST(Portfolio, PathLeavingGridIsRejected) {
  const auto beliefs = BeliefSet::constant_coefficients({0.0, 0.0}, {0.5, 0.5});
  const MarketSpec spec{CostKernel(0.5, 0.5, 1.0), 0.0, {0.0, 0.0}, [](double x) { return x; }};
  const auto sol = solve_equilibrium(spec, beliefs, Grid1D{0.9, 1.1, 11, 11});
  const GridEquilibriumView view(sol, beliefs);
  const auto batch = simulate(beliefs, Measure::average(), 1.0, 0.0, 1.0, 51, 1, 3);
  try {
    integrate_strategies(view, spec, batch, 0);
    FAIL() << "expected InputError";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("path 0 spans"), std::string::npos);
  }
}

TEST(Objective, ZeroStrategyHasZeroValue) {
  const std::vector<double> zero(50, 0.0), mu(50, 3.0);
  EXPECT_EQ(detail::path_objective(zero, zero, mu, 0.01, 1.0, 1.0), 0.0);
}

TEST(Objective, OptimalStrategyIsConcaveMaximum) {
  for (std::size_t i = 0; i < 2; ++i) {
    const auto batch = simulate(two_agent_beliefs(), Measure::of_agent(i), 1.0, 0.0, 3.0, 501, 10000, 21 + i);
    const auto dirs = test_directions(10, batch, 3);
    const double s = rate_scale_of(two_agent_view(), two_agent_kernel, i, 0.0, batch);
    std::vector<Perturbation> pert;
    for (const auto& d : dirs) {
      std::vector<double> r(d);
      for (double& v : r) v *= s;
      pert.push_back({r, 0.1});
      pert.push_back({r, 0.2});
    }
    const auto rep = objective(i, batch, two_agent_view(), two_agent_kernel, 0.0, pert);
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      const auto& g1 = rep.gap[2 * d];
      const auto& g2 = rep.gap[2 * d + 1];
      EXPECT_GE(g1.mean, -3 * g1.se);
      EXPECT_NEAR(g2.mean / (4 * g1.mean), 1.0, 0.2);
    }
  }
}

TEST(Objective, GateauxResidualSmallAtOptimum) {
  const auto batch = simulate(two_agent_beliefs(), Measure::of_agent(0), 1.0, 0.0, 3.0, 501, 2000, 31);
  const auto dirs = test_directions(10, batch, 4);
  EXPECT_LE(gateaux_residual(0, batch, two_agent_view(), two_agent_kernel, 0.0, dirs).residual, 3.0);
  const std::vector<std::vector<double>> zero(2, std::vector<double>(batch.nt, 0.0));
  EXPECT_EQ(gateaux_residual(0, batch, two_agent_view(), two_agent_kernel, 0.0, zero).residual, 0.0);
  EXPECT_GT(gateaux_residual(0, batch, two_agent_view(), two_agent_kernel, 0.0, dirs, 1.5).residual, 5.0);
}

TEST(Objective, GateauxSmallForHomogeneousBeliefs) {
  const OuModel ou({0.5, 0.5}, 1.0, 0.2, 1.0);
  const CostKernel k(1.0, 1.0, 1.0);
  const OuEquilibriumView view(ou, solve_ab(ou, k));
  const auto beliefs = BeliefSet::ornstein_uhlenbeck({0.5, 0.5}, 1.0, 0.2);
  const auto batch = simulate(beliefs, Measure::of_agent(1), 0.9, 0.0, 1.0, 401, 2000, 8);
  EXPECT_LE(gateaux_residual(1, batch, view, k, -1.0, test_directions(10, batch, 6)).residual, 3.0);
}

TEST(Objective, DirectionsAreNormalised) {
  const auto batch = simulate(two_agent_beliefs(), Measure::of_agent(0), 1.0, 0.0, 3.0, 301, 1, 1);
  const auto dirs = test_directions(5, batch, 2);
  ASSERT_EQ(dirs.size(), 5u);
  for (const auto& d : dirs) {
    double nrm = 0.0;
    for (std::size_t n = 0; n + 1 < d.size(); ++n) nrm += batch.dt() * d[n] * d[n];
    EXPECT_NEAR(nrm, 1.0, 1e-12);
  }
  EXPECT_NE(dirs[0], dirs[1]);
}

TEST(Objective, MeasureMismatchIsRejected) {
  const auto batch = simulate(two_agent_beliefs(), Measure::of_agent(0), 1.0, 0.0, 3.0, 51, 10, 1);
  EXPECT_THROW(objective(1, batch, two_agent_view(), two_agent_kernel, 0.0), InputError);
  const auto avg = simulate(two_agent_beliefs(), Measure::average(), 1.0, 0.0, 3.0, 51, 10, 1);
  EXPECT_THROW(gateaux_residual(0, avg, two_agent_view(), two_agent_kernel, 0.0, {}), InputError);
}

TEST(Objective, InvariantToConstantPriceShift) {
  const auto batch = simulate(two_agent_beliefs(), Measure::of_agent(1), 1.0, 0.0, 3.0, 201, 200, 12);
  const ShiftedView shifted(two_agent_view(), 5.0);
  const auto a = objective(1, batch, two_agent_view(), two_agent_kernel, 0.0);
  const auto b = objective(1, batch, shifted, two_agent_kernel, 0.0);
  EXPECT_NEAR(a.value.mean, b.value.mean, 1e-9 * std::fabs(a.value.mean) + 1e-12);
}
