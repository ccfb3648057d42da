#pragma once

#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "error.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "model.hpp"
#include "ou.hpp"
#include "parallel.hpp"
#include "pde.hpp"
#include "random.hpp"
#include "simulate.hpp"

namespace illiquid_eq {

/// Pointwise access to an equilibrium: agent values, the price and its drift under each agent.
class EquilibriumView {
public:
  virtual ~EquilibriumView() = default;
  virtual std::size_t agents() const = 0;
  virtual double agent_value(std::size_t i, double t, double x) const = 0;
  virtual double price(double t, double x) const = 0;
  /// Drift of t -> v(t, X_t) under agent i's measure.
  virtual double price_drift(std::size_t i, double t, double x) const = 0;
  /// Rounding scale of price_drift at (t, x); zero when the drift carries no cancellation.
  virtual double drift_rounding(std::size_t /*i*/, double /*t*/, double /*x*/) const { return 0.0; }
  /// Spatial range where the view is defined; unbounded by default.
  virtual Interval domain() const {
    return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  }
};

class OuEquilibriumView final : public EquilibriumView {
public:
  OuEquilibriumView(OuModel ou, AbSolution ab) : ou_(std::move(ou)), ab_(std::move(ab)) {}
  std::size_t agents() const override { return ou_.agents(); }
  double agent_value(std::size_t i, double t, double x) const override { return illiquid_eq::agent_value(ab_, i, t, x); }
  // Zero supply: the price is the agents' average value, formed from the same numbers as v_i so the
  // clearing identity holds to rounding.
  double price(double t, double x) const override {
    double s = 0.0;
    for (std::size_t i = 0; i < ou_.agents(); ++i) s += illiquid_eq::agent_value(ab_, i, t, x);
    return s / static_cast<double>(ou_.agents());
  }
  double price_drift(std::size_t i, double t, double x) const override {
    return illiquid_eq::price_drift(ou_, ab_, i, t, x);
  }
  // B_bar' - kappa_i B_bar cancels exactly for a single agent; keep the residue at rounding size.
  double drift_rounding(std::size_t i, double t, double x) const override {
    const double eps = std::numeric_limits<double>::epsilon();
    return 4.0 * eps * std::fabs(x - ou_.mean_x) *
           (std::fabs(ab_.B_bar_deriv(t)) + ou_.kappas[i] * std::fabs(ab_.B_bar(t)));
  }
  const OuModel& model() const noexcept { return ou_; }
  const AbSolution& solution() const noexcept { return ab_; }

private:
  OuModel ou_;
  AbSolution ab_;
};

class GridEquilibriumView final : public EquilibriumView {
public:
  GridEquilibriumView(const EquilibriumSolution& sol, const BeliefSet& beliefs)
      : sol_(&sol), drift_(sol.agents()) {
    const PricePathStats st = price_path_stats(sol, beliefs);
    for (std::size_t i = 0; i < sol.agents(); ++i) {
      drift_[i] = Field2D(st.nt, st.nx);
      drift_[i].data() = st.drift[i];
    }
  }
  std::size_t agents() const override { return sol_->agents(); }
  double agent_value(std::size_t i, double t, double x) const override {
    return interp_bilinear(sol_->vi[i], sol_->grid, sol_->horizon, t, x);
  }
  double price(double t, double x) const override { return interp_bilinear(sol_->v, sol_->grid, sol_->horizon, t, x); }
  double price_drift(std::size_t i, double t, double x) const override {
    return interp_bilinear(drift_[i], sol_->grid, sol_->horizon, t, x);
  }
  Interval domain() const override { return {sol_->grid.x_min, sol_->grid.x_max}; }

private:
  const EquilibriumSolution* sol_;
  std::vector<Field2D> drift_;
};

/// Optimal trading rate (G'/G) phi + (v_i - v) / lambda.
inline double equilibrium_rate(std::size_t /*i*/, double t, double phi, double vi_at, double v_at,
                               const CostKernel& kernel) {
  if (kernel.kind() != CostKernel::Kind::regular) throw InputError("equilibrium rate: requires gamma > 0, lambda > 0");
  return kernel.log_deriv(t) * phi + (vi_at - v_at) / kernel.lambda();
}

/// One agent's position and rate along one path; positions are the Euler integral of the rates.
struct AgentStrategy {
  std::vector<double> position;
  std::vector<double> rate;
};

/// All agents' strategies along one state path.
struct StrategyPath {
  std::vector<double> times;
  std::vector<double> state;
  std::vector<std::vector<double>> positions;
  std::vector<std::vector<double>> rates;
};

namespace detail {

inline void require_inside(const EquilibriumView& view, const SimulationBatch& batch, std::size_t p) {
  const Interval d = view.domain();
  const double* row = batch.path(p);
  double lo = row[0], hi = row[0];
  for (std::size_t n = 0; n < batch.nt; ++n) {
    lo = std::min(lo, row[n]);
    hi = std::max(hi, row[n]);
  }
  if (lo < d.lo || hi > d.hi)
    throw InputError("path " + std::to_string(p) + " spans [" + std::to_string(lo) + ", " + std::to_string(hi) +
                     "], outside the solution grid [" + std::to_string(d.lo) + ", " + std::to_string(d.hi) + "]");
}

}  // namespace detail

/// Forward Euler on the rate ODE along path p; rate_scale != 1 gives a deliberately distorted strategy.
inline AgentStrategy integrate_agent(const EquilibriumView& view, const CostKernel& kernel, std::size_t i,
                                     double allocation, const SimulationBatch& batch, std::size_t p,
                                     double rate_scale = 1.0) {
  detail::require_inside(view, batch, p);
  const std::size_t nt = batch.nt;
  const double h = batch.dt();
  const double* row = batch.path(p);
  AgentStrategy s;
  s.position.resize(nt);
  s.rate.resize(nt);
  s.position[0] = allocation;
  for (std::size_t n = 0; n < nt; ++n) {
    const double t = batch.t(n);
    s.rate[n] = rate_scale * equilibrium_rate(i, t, s.position[n], view.agent_value(i, t, row[n]),
                                              view.price(t, row[n]), kernel);
    if (n + 1 < nt) s.position[n + 1] = s.position[n] + h * s.rate[n];
  }
  return s;
}

inline StrategyPath integrate_strategies(const EquilibriumView& view, const MarketSpec& spec,
                                         const SimulationBatch& batch, std::size_t p) {
  if (spec.allocations.size() != view.agents()) throw InputError("strategies: allocation count mismatch");
  StrategyPath sp;
  sp.times.resize(batch.nt);
  for (std::size_t n = 0; n < batch.nt; ++n) sp.times[n] = batch.t(n);
  sp.state.assign(batch.path(p), batch.path(p) + batch.nt);
  for (std::size_t i = 0; i < view.agents(); ++i) {
    auto a = integrate_agent(view, spec.kernel, i, spec.allocations[i], batch, p);
    sp.positions.push_back(std::move(a.position));
    sp.rates.push_back(std::move(a.rate));
  }
  return sp;
}

/// max over the mesh of |sum_i phi_i - a0|.
inline double clearing_residual(const StrategyPath& s, double supply) {
  double worst = 0.0;
  for (std::size_t n = 0; n < s.times.size(); ++n) {
    double total = 0.0;
    for (const auto& p : s.positions) total += p[n];
    worst = std::max(worst, std::fabs(total - supply));
  }
  return worst;
}

/// Smooth random test directions: rates on the mesh (length nt), unit mesh-L2 norm, theta(0) = 0.
inline std::vector<std::vector<double>> test_directions(std::size_t count, const SimulationBatch& batch,
                                                        std::uint64_t seed, std::size_t bumps = 8) {
  const CounterRng rng(seed ^ 0x5bd1e995ULL);
  const double span = batch.horizon - batch.t0;
  const double width = span / static_cast<double>(bumps);
  const double h = batch.dt();
  std::vector<std::vector<double>> out(count, std::vector<double>(batch.nt, 0.0));
  for (std::size_t d = 0; d < count; ++d) {
    std::vector<double> amp(bumps);
    for (std::size_t k = 0; k < bumps; ++k) amp[k] = rng.normal(d, k);
    double norm = 0.0;
    for (std::size_t n = 0; n < batch.nt; ++n) {
      const double t = batch.t(n);
      double r = 0.0;
      for (std::size_t k = 0; k < bumps; ++k) {
        const double c = batch.t0 + span * static_cast<double>(k) / static_cast<double>(bumps - 1);
        const double z = (t - c) / width;
        r += amp[k] * std::exp(-0.5 * z * z);
      }
      out[d][n] = r;
      if (n + 1 < batch.nt) norm += h * r * r;
    }
    norm = std::sqrt(norm);
    for (double& r : out[d]) r /= norm;
  }
  return out;
}

/// Perturbation phi + eps * theta with theta the Euler integral of `rate`, theta(0) = 0.
struct Perturbation {
  std::vector<double> rate;
  double eps = 0.0;
};

struct ObjectiveReport {
  McEstimate value;                    // J(phi)
  McEstimate martingale;               // dropped sum phi (dS - mu dt)
  std::vector<McEstimate> perturbed;   // J(phi + eps theta)
  std::vector<McEstimate> gap;         // J(phi) - J(phi + eps theta), paired per path
};

struct ObjectiveOptions {
  double rate_scale = 1.0;
};

namespace detail {

inline double path_objective(const std::vector<double>& phi, const std::vector<double>& rate,
                             const std::vector<double>& mu, double h, double gamma, double lambda) {
  double j = 0.0;
  for (std::size_t n = 0; n + 1 < phi.size(); ++n)
    j += h * (phi[n] * mu[n] - 0.5 * gamma * phi[n] * phi[n] - 0.5 * lambda * rate[n] * rate[n]);
  return j;
}

inline void require_measure(std::size_t i, const SimulationBatch& batch) {
  if (batch.measure != Measure::of_agent(i))
    throw InputError("measure mismatch: batch simulated under " + batch.measure.label() + ", objective needs agent " +
                     std::to_string(i));
}

}  // namespace detail

/// Agent i's objective in drift form, with optional perturbations evaluated on the same paths.
inline ObjectiveReport objective(std::size_t i, const SimulationBatch& batch, const EquilibriumView& view,
                                 const CostKernel& kernel, double allocation,
                                 const std::vector<Perturbation>& perturbations = {},
                                 const ObjectiveOptions& opt = {}) {
  detail::require_measure(i, batch);
  const std::size_t nt = batch.nt, np = batch.npaths, nd = perturbations.size();
  const double h = batch.dt(), gamma = kernel.gamma(), lambda = kernel.lambda();
  std::vector<std::vector<double>> theta(nd);
  for (std::size_t d = 0; d < nd; ++d) {
    if (perturbations[d].rate.size() != nt) throw InputError("objective: perturbation length must equal nt");
    theta[d].assign(nt, 0.0);
    for (std::size_t n = 0; n + 1 < nt; ++n) theta[d][n + 1] = theta[d][n] + h * perturbations[d].rate[n];
  }
  std::vector<double> base(np), mart(np);
  std::vector<std::vector<double>> pert(nd, std::vector<double>(np)), gap = pert;
  parallel_for(np, [&](std::size_t begin, std::size_t end) {
    std::vector<double> mu(nt), phi(nt), rate(nt);
    for (std::size_t p = begin; p < end; ++p) {
      const auto s = integrate_agent(view, kernel, i, allocation, batch, p, opt.rate_scale);
      const double* row = batch.path(p);
      double m = 0.0;
      for (std::size_t n = 0; n < nt; ++n) mu[n] = view.price_drift(i, batch.t(n), row[n]);
      for (std::size_t n = 0; n + 1 < nt; ++n) {
        const double ds = view.price(batch.t(n + 1), row[n + 1]) - view.price(batch.t(n), row[n]);
        m += s.position[n] * (ds - mu[n] * h);
      }
      mart[p] = m;
      base[p] = detail::path_objective(s.position, s.rate, mu, h, gamma, lambda);
      for (std::size_t d = 0; d < nd; ++d) {
        const double eps = perturbations[d].eps;
        for (std::size_t n = 0; n < nt; ++n) {
          phi[n] = s.position[n] + eps * theta[d][n];
          rate[n] = s.rate[n] + eps * perturbations[d].rate[n];
        }
        pert[d][p] = detail::path_objective(phi, rate, mu, h, gamma, lambda);
        gap[d][p] = base[p] - pert[d][p];
      }
    }
  });
  ObjectiveReport rep;
  rep.value = mean_and_se(base);
  rep.martingale = mean_and_se(mart);
  for (std::size_t d = 0; d < nd; ++d) {
    rep.perturbed.push_back(mean_and_se(pert[d]));
    rep.gap.push_back(mean_and_se(gap[d]));
  }
  return rep;
}

struct GateauxReport {
  double residual = 0.0;            // max_d |mean_d| / se_d
  std::vector<double> t_stats;      // per direction
  std::vector<McEstimate> estimates;
};

/**
 * First-order condition E^i[sum_m h theta'_m Y_m] = 0 with
 * Y_m = sum_{n > m} h (mu_n - gamma phi_n) - lambda phi'_m, the exact derivative of the
 * discrete objective along each direction.
 * The standard error is floored at the mesh resolution h * E[sum_m h |theta'_m| P_m] with
 * P_m = sum_{n > m} h (gamma |phi_n| + r_n) + lambda |phi'_m|, where r_n is the view's drift
 * rounding scale, so a deterministic strategy is judged against its first-order Euler error
 * rather than zero.
 */
inline GateauxReport gateaux_residual(std::size_t i, const SimulationBatch& batch, const EquilibriumView& view,
                                      const CostKernel& kernel, double allocation,
                                      const std::vector<std::vector<double>>& directions, double rate_scale = 1.0) {
  detail::require_measure(i, batch);
  const std::size_t nt = batch.nt, np = batch.npaths, nd = directions.size();
  for (const auto& d : directions)
    if (d.size() != nt) throw InputError("gateaux: direction length must equal nt");
  const double h = batch.dt(), gamma = kernel.gamma(), lambda = kernel.lambda();
  std::vector<std::vector<double>> z(nd, std::vector<double>(np)), mag = z;
  parallel_for(np, [&](std::size_t begin, std::size_t end) {
    std::vector<double> y(nt), y_abs(nt);
    for (std::size_t p = begin; p < end; ++p) {
      const auto s = integrate_agent(view, kernel, i, allocation, batch, p, rate_scale);
      const double* row = batch.path(p);
      double tail = 0.0, tail_abs = 0.0;  // sums over n in (m, nt-2]
      for (std::size_t m = nt - 1; m-- > 0;) {
        y[m] = tail - lambda * s.rate[m];
        y_abs[m] = tail_abs + lambda * std::fabs(s.rate[m]);
        const double mu = view.price_drift(i, batch.t(m), row[m]);
        tail += h * (mu - gamma * s.position[m]);
        tail_abs += h * (gamma * std::fabs(s.position[m]) + view.drift_rounding(i, batch.t(m), row[m]));
      }
      for (std::size_t d = 0; d < nd; ++d) {
        double acc = 0.0, abs_acc = 0.0;
        for (std::size_t m = 0; m + 1 < nt; ++m) {
          acc += h * directions[d][m] * y[m];
          abs_acc += h * std::fabs(directions[d][m]) * y_abs[m];
        }
        z[d][p] = acc;
        mag[d][p] = abs_acc;
      }
    }
  });
  GateauxReport rep;
  for (std::size_t d = 0; d < nd; ++d) {
    const auto e = mean_and_se(z[d]);
    const double se = std::max(e.se, h * mean_and_se(mag[d]).mean);
    const double ts = se > 0.0 ? std::fabs(e.mean) / se : 0.0;
    rep.estimates.push_back(e);
    rep.t_stats.push_back(ts);
    rep.residual = std::max(rep.residual, ts);
  }
  return rep;
}

}  // namespace illiquid_eq
