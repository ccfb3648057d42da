#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "model.hpp"

namespace illiquid_eq {

/**
 * Backward system of M one-dimensional linear parabolic equations
 *
 *   d_t u_k + (1/2) s_k^2 d_xx u_k + b_k d_x u_k + q(t) (u_k - mean_j u_j) + S_k(t, x) = 0,
 *   u_k(T, .) = terminal_k,
 *
 * coupled only through the zeroth-order term.  Crank-Nicolson in time with two
 * implicit-Euler startup steps, central differences in space, zero second
 * derivative at both ends of the truncated domain.  The coupling is resolved
 * by Picard iteration inside each step.
 */
struct BackwardSystem {
  std::size_t components = 1;
  std::function<double(std::size_t, double, double)> drift;     // b_k(t, x)
  std::function<double(std::size_t, double, double)> variance;  // s_k(t, x)^2
  std::function<double(double)> coupling;                       // q(t); empty means none
  std::function<double(std::size_t, std::size_t, std::size_t)> source;  // S_k on step [t_n, t_n+1] at node j
  std::vector<std::vector<double>> terminal;                    // per component, per node
};

struct SolverOptions {
  double picard_tol = 1e-10;
  std::size_t picard_max_iter = 50;
  std::size_t startup_steps = 2;
};

struct SolverInfo {
  std::size_t max_picard_iterations = 0;
  double last_picard_change = 0.0;
  double picard_tol = 0.0;
};

struct SystemSolution {
  std::vector<Field2D> u;
  SolverInfo info;
};

inline SystemSolution solve_backward(const BackwardSystem& sys, const Grid1D& grid, double horizon,
                                     const SolverOptions& opt = {}) {
  grid.check();
  if (grid.nx < 4) throw InputError("pde solver: need at least 4 spatial nodes");
  const std::size_t m = sys.components;
  if (m == 0 || sys.terminal.size() != m) throw InputError("pde solver: terminal data per component required");
  for (const auto& f : sys.terminal)
    if (f.size() != grid.nx) throw InputError("pde solver: terminal data has wrong length");

  const std::size_t nx = grid.nx;
  const double h = grid.dx();
  const bool coupled = static_cast<bool>(sys.coupling) && m > 1;

  SystemSolution out;
  out.info.picard_tol = opt.picard_tol;
  out.u.assign(m, Field2D(grid.nt, nx));
  for (std::size_t k = 0; k < m; ++k)
    std::copy(sys.terminal[k].begin(), sys.terminal[k].end(), out.u[k].level(grid.nt - 1).begin());

  // Spatial operator rows (lo, di, up) per component at one time.
  struct Rows {
    std::vector<double> lo, di, up;
  };
  auto assemble = [&](std::size_t k, double t, Rows& r) {
    r.lo.resize(nx);
    r.di.resize(nx);
    r.up.resize(nx);
    for (std::size_t j = 0; j < nx; ++j) {
      const double x = grid.x(j);
      const double s2 = sys.variance(k, t, x);
      const double b = sys.drift(k, t, x);
      if (!(s2 > 0.0) || !std::isfinite(s2) || !std::isfinite(b))
        throw InputError("pde solver: degenerate or non-finite volatility at x = " + std::to_string(x));
      const double diff = 0.5 * s2 / (h * h);
      const double adv = 0.5 * b / h;
      r.lo[j] = diff - adv;
      r.di[j] = -2.0 * diff;
      r.up[j] = diff + adv;
    }
  };
  auto mean_over = [&](std::size_t n, std::vector<double>& dst) {
    dst.assign(nx, 0.0);
    for (std::size_t k = 0; k < m; ++k) {
      const auto lv = out.u[k].level(n);
      for (std::size_t j = 0; j < nx; ++j) dst[j] += lv[j];
    }
    for (double& v : dst) v /= static_cast<double>(m);
  };

  std::vector<Rows> rows0(m), rows1(m);
  std::vector<std::vector<double>> explicit_rhs(m, std::vector<double>(nx));
  std::vector<double> mean1, guess, fresh, lo, di, up, rhs, scratch, history;
  const std::size_t ni = nx - 2;  // unknowns after eliminating the two end nodes

  for (std::size_t step = 0, n = grid.nt - 1; n-- > 0; ++step) {
    const double t1 = grid.t(n + 1, horizon);
    const double t0 = grid.t(n, horizon);
    const double dt = t1 - t0;
    const double theta = step < opt.startup_steps ? 1.0 : 0.5;
    const double q0 = coupled ? sys.coupling(t0) : 0.0;
    const double q1 = coupled ? sys.coupling(t1) : 0.0;

    mean_over(n + 1, mean1);
    for (std::size_t k = 0; k < m; ++k) {
      assemble(k, t0, rows0[k]);
      assemble(k, t1, rows1[k]);
      const auto u1 = out.u[k].level(n + 1);
      auto& r = explicit_rhs[k];
      const Rows& a = rows1[k];
      for (std::size_t j = 1; j + 1 < nx; ++j) {
        const double lu = a.lo[j] * u1[j - 1] + a.di[j] * u1[j] + a.up[j] * u1[j + 1];
        r[j] = u1[j] + (1.0 - theta) * dt * (lu + q1 * (u1[j] - mean1[j]));
        if (sys.source) r[j] += dt * sys.source(k, n, j);
      }
    }

    guess = mean1;
    history.clear();
    std::size_t iter = 0;
    double change = 0.0;
    for (;;) {
      ++iter;
      for (std::size_t k = 0; k < m; ++k) {
        const Rows& a = rows0[k];
        lo.assign(ni, 0.0);
        di.assign(ni, 0.0);
        up.assign(ni, 0.0);
        rhs.assign(ni, 0.0);
        for (std::size_t j = 1; j + 1 < nx; ++j) {
          const std::size_t r = j - 1;
          lo[r] = -theta * dt * a.lo[j];
          di[r] = 1.0 - theta * dt * (a.di[j] + q0);
          up[r] = -theta * dt * a.up[j];
          rhs[r] = explicit_rhs[k][j] - theta * dt * q0 * guess[j];
        }
        // Linear extrapolation u_0 = 2u_1 - u_2 and u_{n-1} = 2u_{n-2} - u_{n-3}.
        di[0] += 2.0 * lo[0];
        up[0] -= lo[0];
        di[ni - 1] += 2.0 * up[ni - 1];
        lo[ni - 1] -= up[ni - 1];
        solve_tridiagonal(lo, di, up, rhs, scratch);
        auto u0 = out.u[k].level(n);
        for (std::size_t r = 0; r < ni; ++r) u0[r + 1] = rhs[r];
        u0[0] = 2.0 * u0[1] - u0[2];
        u0[nx - 1] = 2.0 * u0[nx - 2] - u0[nx - 3];
      }
      if (!coupled) break;
      mean_over(n, fresh);
      change = 0.0;
      for (std::size_t j = 0; j < nx; ++j) change = std::max(change, std::fabs(fresh[j] - guess[j]));
      guess.swap(fresh);
      history.push_back(change);
      out.info.last_picard_change = change;
      if (!std::isfinite(change)) throw NumericalError("pde solver: non-finite values in coupling iteration");
      if (change < opt.picard_tol) break;
      if (iter >= opt.picard_max_iter) {
        throw ConvergenceError("pde solver: Picard coupling did not converge at t = " + std::to_string(t0),
                               history);
      }
    }
    out.info.max_picard_iterations = std::max(out.info.max_picard_iterations, iter);
  }
  return out;
}

/// Discrete solution of the equilibrium system for N agents.
struct EquilibriumSolution {
  Grid1D grid;
  double horizon = 0.0;
  double gamma = 0.0;
  double lambda = 0.0;
  double supply = 0.0;
  std::vector<Field2D> vi;
  Field2D v;
  Field2D dv_dx;
  std::uint64_t spec_hash = 0;
  SolverInfo info;

  std::size_t agents() const noexcept { return vi.size(); }
};

namespace detail {

inline std::vector<double> sample_payoff(const PayoffFn& f, const Grid1D& g) {
  std::vector<double> out(g.nx);
  for (std::size_t j = 0; j < g.nx; ++j) out[j] = f(g.x(j));
  return out;
}

inline Field2D spatial_derivative(const Field2D& u, const Grid1D& g) {
  Field2D d(u.nt(), u.nx());
  for (std::size_t n = 0; n < u.nt(); ++n) diff1(u.level(n), g.dx(), d.level(n));
  return d;
}

inline void require_usable(const MarketSpec& spec, const BeliefSet& beliefs, const Grid1D& grid) {
  const auto rep = validate(spec, beliefs, {grid.x_min, grid.x_max});
  if (!rep.ok()) {
    std::string msg = "invalid market specification:";
    for (const auto& v : rep.violations) msg += " [" + v + "]";
    throw InputError(msg);
  }
}

}  // namespace detail

/// Equilibrium prices with holding cost gamma > 0 and trading cost lambda > 0.
inline EquilibriumSolution solve_equilibrium(const MarketSpec& spec, const BeliefSet& beliefs, const Grid1D& grid,
                                             const SolverOptions& opt = {}) {
  const CostKernel& kernel = spec.kernel;
  if (kernel.kind() != CostKernel::Kind::regular)
    throw InputError("solve_equilibrium: requires gamma > 0 and lambda > 0");
  detail::require_usable(spec, beliefs, grid);
  const std::size_t n_agents = beliefs.size();
  const double horizon = kernel.horizon();
  const double lam = kernel.lambda();
  const double n_real = static_cast<double>(n_agents);
  const double supply_term = lam * spec.supply / n_real;

  BackwardSystem sys;
  sys.components = n_agents;
  sys.drift = [&](std::size_t k, double t, double x) { return beliefs.drift(k, t, x); };
  sys.variance = [&](std::size_t k, double t, double x) {
    const double s = beliefs.vol(k, t, x);
    return s * s;
  };
  sys.coupling = [&](double t) { return kernel.log_deriv(t); };
  if (spec.supply != 0.0) {
    // q (v_i - v) = q (v_i - mean) - lambda q^2 a0 / N
    sys.source = [&](std::size_t, std::size_t n, std::size_t) {
      const double q = kernel.log_deriv(0.5 * (grid.t(n, horizon) + grid.t(n + 1, horizon)));
      return -supply_term * q * q;
    };
  }
  sys.terminal.assign(n_agents, detail::sample_payoff(spec.payoff, grid));

  auto solved = solve_backward(sys, grid, horizon, opt);

  EquilibriumSolution sol;
  sol.grid = grid;
  sol.horizon = horizon;
  sol.gamma = kernel.gamma();
  sol.lambda = lam;
  sol.supply = spec.supply;
  sol.info = solved.info;
  sol.vi = std::move(solved.u);
  sol.v = Field2D(grid.nt, grid.nx);
  for (std::size_t n = 0; n < grid.nt; ++n) {
    const double shift = supply_term * kernel.log_deriv(grid.t(n, horizon));
    auto vl = sol.v.level(n);
    for (std::size_t k = 0; k < n_agents; ++k) {
      const auto ul = sol.vi[k].level(n);
      for (std::size_t j = 0; j < grid.nx; ++j) vl[j] += ul[j];
    }
    for (double& x : vl) x = x / n_real + shift;
  }
  sol.dv_dx = detail::spatial_derivative(sol.v, grid);
  return sol;
}

/// Frictionless (lambda = 0) equilibrium price under the averaged coefficients.
inline Field2D solve_frictionless(const MarketSpec& spec, const BeliefSet& beliefs, const Grid1D& grid,
                                  const SolverOptions& opt = {}) {
  if (!(spec.kernel.gamma() > 0.0)) throw InputError("solve_frictionless: requires gamma > 0");
  detail::require_usable(spec, beliefs, grid);
  const double drag = spec.kernel.gamma() * spec.supply / static_cast<double>(beliefs.size());
  BackwardSystem sys;
  sys.components = 1;
  sys.drift = [&](std::size_t, double t, double x) { return beliefs.mean_drift(t, x); };
  sys.variance = [&](std::size_t, double t, double x) { return beliefs.mean_variance(t, x); };
  if (drag != 0.0) sys.source = [drag](std::size_t, std::size_t, std::size_t) { return -drag; };
  sys.terminal.push_back(detail::sample_payoff(spec.payoff, grid));
  return std::move(solve_backward(sys, grid, spec.kernel.horizon(), opt).u.front());
}

struct RiskNeutralSolution {
  Field2D price;
  std::vector<Field2D> agents;
};

/// Risk-neutral (gamma = 0) equilibrium: average of the agents' expectations.
inline RiskNeutralSolution solve_risk_neutral(const MarketSpec& spec, const BeliefSet& beliefs, const Grid1D& grid,
                                              const SolverOptions& opt = {}) {
  detail::require_usable(spec, beliefs, grid);
  BackwardSystem sys;
  sys.components = beliefs.size();
  sys.drift = [&](std::size_t k, double t, double x) { return beliefs.drift(k, t, x); };
  sys.variance = [&](std::size_t k, double t, double x) {
    const double s = beliefs.vol(k, t, x);
    return s * s;
  };
  sys.terminal.assign(beliefs.size(), detail::sample_payoff(spec.payoff, grid));
  RiskNeutralSolution out;
  out.agents = std::move(solve_backward(sys, grid, spec.kernel.horizon(), opt).u);
  out.price = Field2D(grid.nt, grid.nx);
  for (const auto& a : out.agents)
    for (std::size_t k = 0; k < a.data().size(); ++k) out.price.data()[k] += a.data()[k];
  for (double& x : out.price.data()) x /= static_cast<double>(out.agents.size());
  return out;
}

/// Price drift L^i v and diffusion d_x v sigma_i at every node.
inline PricePathStats price_path_stats(const EquilibriumSolution& sol, const BeliefSet& beliefs) {
  const Grid1D& g = sol.grid;
  const double dt = g.dt(sol.horizon);
  PricePathStats st;
  st.nt = g.nt;
  st.nx = g.nx;
  Field2D vt(g.nt, g.nx), vxx(g.nt, g.nx);
  for (std::size_t n = 0; n < g.nt; ++n) {
    diff2(sol.v.level(n), g.dx(), vxx.level(n));
    for (std::size_t j = 0; j < g.nx; ++j) {
      double d;
      if (n == 0)
        d = (-3.0 * sol.v(0, j) + 4.0 * sol.v(1, j) - sol.v(std::min<std::size_t>(2, g.nt - 1), j)) / (2.0 * dt);
      else if (n + 1 == g.nt)
        d = (3.0 * sol.v(n, j) - 4.0 * sol.v(n - 1, j) + sol.v(n >= 2 ? n - 2 : 0, j)) / (2.0 * dt);
      else
        d = (sol.v(n + 1, j) - sol.v(n - 1, j)) / (2.0 * dt);
      if (g.nt == 2) d = (sol.v(1, j) - sol.v(0, j)) / dt;
      vt(n, j) = d;
    }
  }
  for (std::size_t i = 0; i < beliefs.size(); ++i) {
    std::vector<double> mu(g.nt * g.nx), nu(g.nt * g.nx);
    for (std::size_t n = 0; n < g.nt; ++n) {
      const double t = g.t(n, sol.horizon);
      for (std::size_t j = 0; j < g.nx; ++j) {
        const double x = g.x(j);
        const double s = beliefs.vol(i, t, x);
        const std::size_t idx = n * g.nx + j;
        mu[idx] = vt(n, j) + beliefs.drift(i, t, x) * sol.dv_dx(n, j) + 0.5 * s * s * vxx(n, j);
        nu[idx] = sol.dv_dx(n, j) * s;
      }
    }
    st.drift.push_back(std::move(mu));
    st.diffusion.push_back(std::move(nu));
  }
  return st;
}

}  // namespace illiquid_eq
