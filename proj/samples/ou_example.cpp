// Two agents disagreeing about mean reversion: equilibrium price at t = 0 from
// the ODE system and the finite-difference solver, plus both limiting prices.
#include <cstdio>

#include <illiquid_eq/illiquid_eq.hpp>

using namespace illiquid_eq;

int main() {
  const std::vector<double> kappas{0.8625, 0.2875};
  const OuModel ou(kappas, 1.25, 0.128, 3.0);
  const CostKernel kernel(1e-8, 1e-7, 3.0);
  const BeliefSet beliefs = BeliefSet::ornstein_uhlenbeck(kappas, 1.25, 0.128);
  const MarketSpec spec{kernel, 0.0, {0.0, 0.0}, [](double x) { return x; }};

  const double sd = ou.stationary_sd();
  const Grid1D grid{ou.mean_x - 6 * sd, ou.mean_x + 6 * sd, 201, 301};
  const EquilibriumSolution sol = solve_equilibrium(spec, beliefs, grid);
  const AbSolution ab = solve_ab(ou, kernel);

  std::printf("x = 1, t = 0\n");
  std::printf("  frictionless      %.6f\n", frictionless_price(ou, 0.0, 1.0));
  std::printf("  risk neutral      %.6f\n", risk_neutral_price(ou, 0.0, 1.0).price);
  std::printf("  both costs (ODE)  %.6f\n", price(ou, ab, 0.0, 1.0));
  std::printf("  both costs (PDE)  %.6f\n", interp_bilinear(sol.v, grid, 3.0, 0.0, 1.0));
  std::printf("  gamma v*_hc       %.6f\n", 1e-8 * hc_correction_closed(ou, 1e-7, 0.0, 1.0));
  std::printf("  sqrt(lambda) v*_tc %.6f\n", std::sqrt(1e-7) * tc_correction_closed(ou, 1e-8, 0.0, 1.0));
  return 0;
}
