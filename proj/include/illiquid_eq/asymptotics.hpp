#pragma once

#include <cmath>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "model.hpp"
#include "pde.hpp"

namespace illiquid_eq {

enum class CorrectionKind { transaction, holding };

/// First-order price correction v* on a grid; v*(T, .) = 0.
struct CorrectionSurface {
  Grid1D grid;
  double horizon = 0.0;
  Field2D values;
  CorrectionKind which = CorrectionKind::transaction;

  double at(double t, double x) const { return interp_bilinear(values, grid, horizon, t, x); }
};

/// How the transaction-cost source sum_i L^i(L^i v0) is assembled.
enum class TcRoute {
  with_time_derivative,  // full generator applied to each L^i v0
  spatial_only           // drops d_t, whose sum over agents vanishes
};

struct TcOptions {
  std::size_t refinement = 4;
  TcRoute route = TcRoute::with_time_derivative;
  /// Growth factor of the fourth-difference estimate under halving of h that is treated as a kink.
  double smoothness_growth = 3.0;
  SolverOptions solver{};
};

namespace detail {

/// Fourth-derivative estimate max |delta^4 u| / h^4 using every `stride`-th node.
inline double fourth_difference(std::span<const double> u, double h, std::size_t stride, double& raw) {
  double m = 0.0;
  raw = 0.0;
  for (std::size_t j = 2 * stride; j + 2 * stride < u.size(); ++j) {
    const double d = u[j - 2 * stride] - 4.0 * u[j - stride] + 6.0 * u[j] - 4.0 * u[j + stride] + u[j + 2 * stride];
    raw = std::max(raw, std::fabs(d));
  }
  const double hs = h * static_cast<double>(stride);
  m = raw / (hs * hs * hs * hs);
  return m;
}

inline void check_smoothness(std::span<const double> u, double h, double growth) {
  double raw_fine = 0.0, raw_coarse = 0.0;
  const double fine = fourth_difference(u, h, 1, raw_fine);
  const double coarse = fourth_difference(u, h, 2, raw_coarse);
  double scale = 1.0;
  for (double v : u) scale = std::max(scale, std::fabs(v));
  if (raw_fine > 1e-9 * scale && fine > growth * coarse)
    throw SmoothnessError(
        "transaction-cost correction: payoff too rough for the fourth-order derivative chain "
        "(fourth differences grow under refinement); smooth the payoff on the grid first");
}

// Central time difference, one-sided at the ends.
inline double time_difference(const Field2D& f, std::size_t n, std::size_t j, double dt) {
  const std::size_t nt = f.nt();
  if (nt == 2) return (f(1, j) - f(0, j)) / dt;
  if (n == 0) return (-3.0 * f(0, j) + 4.0 * f(1, j) - f(2, j)) / (2.0 * dt);
  if (n + 1 == nt) return (3.0 * f(n, j) - 4.0 * f(n - 1, j) + f(n - 2, j)) / (2.0 * dt);
  return (f(n + 1, j) - f(n - 1, j)) / (2.0 * dt);
}

}  // namespace detail

/// sqrt(lambda) correction to the frictionless price for general coefficients.
inline CorrectionSurface tc_correction(const MarketSpec& spec, const BeliefSet& beliefs, const Grid1D& grid,
                                       const TcOptions& opt = {}) {
  const double gamma = spec.kernel.gamma();
  if (!(gamma > 0.0)) throw InputError("tc correction: requires gamma > 0");
  if (opt.refinement < 1) throw InputError("tc correction: refinement must be at least 1");
  grid.check();
  const std::size_t n_agents = beliefs.size();
  const double T = spec.horizon();
  const double nn = static_cast<double>(n_agents);
  const Grid1D fine = grid.refined(opt.refinement);
  const double h = fine.dx();
  const double dt = fine.dt(T);

  const Field2D v0 = solve_frictionless(spec, beliefs, fine, opt.solver);
  detail::check_smoothness(v0.level(fine.nt - 1), h, opt.smoothness_growth);

  // g_i = L^i v0 = (b_i - b_bar) v0_x + (s_i^2 - s_bar^2) v0_xx / 2 + gamma a0 / N.
  std::vector<Field2D> g(n_agents, Field2D(fine.nt, fine.nx));
  std::vector<double> vx(fine.nx), vxx(fine.nx);
  const double drag = gamma * spec.supply / nn;
  for (std::size_t n = 0; n < fine.nt; ++n) {
    const double t = fine.t(n, T);
    diff1(v0.level(n), h, vx);
    diff2(v0.level(n), h, vxx);
    for (std::size_t j = 0; j < fine.nx; ++j) {
      const double x = fine.x(j);
      const double bb = beliefs.mean_drift(t, x);
      const double sb = beliefs.mean_variance(t, x);
      for (std::size_t i = 0; i < n_agents; ++i) {
        const double s = beliefs.vol(i, t, x);
        g[i](n, j) = (beliefs.drift(i, t, x) - bb) * vx[j] + 0.5 * (s * s - sb) * vxx[j] + drag;
      }
    }
    for (std::size_t i = 0; i < n_agents; ++i) smooth3(g[i].level(n));
  }

  // Source (1 / (sqrt(gamma) N)) sum_i L^i g_i at fine nodes, per level.
  Field2D src(fine.nt, fine.nx);
  std::vector<double> gx(fine.nx), gxx(fine.nx);
  const double pre = 1.0 / (std::sqrt(gamma) * nn);
  for (std::size_t n = 0; n < fine.nt; ++n) {
    const double t = fine.t(n, T);
    for (std::size_t i = 0; i < n_agents; ++i) {
      diff1(g[i].level(n), h, gx);
      diff2(g[i].level(n), h, gxx);
      for (std::size_t j = 0; j < fine.nx; ++j) {
        const double x = fine.x(j);
        const double s = beliefs.vol(i, t, x);
        double l = beliefs.drift(i, t, x) * gx[j] + 0.5 * s * s * gxx[j];
        if (opt.route == TcRoute::with_time_derivative) l += detail::time_difference(g[i], n, j, dt);
        src(n, j) += pre * l;
      }
    }
  }

  BackwardSystem sys;
  sys.components = 1;
  sys.drift = [&](std::size_t, double t, double x) { return beliefs.mean_drift(t, x); };
  sys.variance = [&](std::size_t, double t, double x) { return beliefs.mean_variance(t, x); };
  const std::size_t r = opt.refinement;
  sys.source = [&](std::size_t, std::size_t n, std::size_t j) {
    return 0.5 * (src(n, j * r) + src(n + 1, j * r));
  };
  sys.terminal.assign(1, std::vector<double>(grid.nx, 0.0));
  CorrectionSurface out;
  out.grid = grid;
  out.horizon = T;
  out.which = CorrectionKind::transaction;
  out.values = std::move(solve_backward(sys, grid, T, opt.solver).u.front());
  return out;
}

/// gamma correction to the risk-neutral price for general coefficients.
inline CorrectionSurface hc_correction(const MarketSpec& spec, const BeliefSet& beliefs, const Grid1D& grid,
                                       const SolverOptions& opt = {}) {
  const double lambda = spec.kernel.lambda();
  if (!(lambda > 0.0)) throw InputError("hc correction: requires lambda > 0");
  const double T = spec.horizon();
  const std::size_t n_agents = beliefs.size();
  const auto rn = solve_risk_neutral(spec, beliefs, grid, opt);

  BackwardSystem sys;
  sys.components = n_agents;
  sys.drift = [&](std::size_t k, double t, double x) { return beliefs.drift(k, t, x); };
  sys.variance = [&](std::size_t k, double t, double x) {
    const double s = beliefs.vol(k, t, x);
    return s * s;
  };
  sys.source = [&](std::size_t k, std::size_t n, std::size_t j) {
    const double t0 = grid.t(n, T), t1 = grid.t(n + 1, T);
    const double w0 = (T - t0) / lambda * (rn.price(n, j) - rn.agents[k](n, j));
    const double w1 = (T - t1) / lambda * (rn.price(n + 1, j) - rn.agents[k](n + 1, j));
    return 0.5 * (w0 + w1);
  };
  sys.terminal.assign(n_agents, std::vector<double>(grid.nx, 0.0));
  auto w = solve_backward(sys, grid, T, opt).u;

  CorrectionSurface out;
  out.grid = grid;
  out.horizon = T;
  out.which = CorrectionKind::holding;
  out.values = Field2D(grid.nt, grid.nx);
  const double nn = static_cast<double>(n_agents);
  for (std::size_t n = 0; n < grid.nt; ++n) {
    const double shift = (T - grid.t(n, T)) * spec.supply / nn;
    for (std::size_t j = 0; j < grid.nx; ++j) {
      double s = 0.0;
      for (const auto& wi : w) s += wi(n, j);
      out.values(n, j) = s / nn - shift;
    }
  }
  return out;
}

}  // namespace illiquid_eq
