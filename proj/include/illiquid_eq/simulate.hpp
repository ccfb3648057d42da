#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "error.hpp"
#include "kernel.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "random.hpp"

namespace illiquid_eq {

/// Which agent's dynamics drive the simulation; `average` uses b_bar and sqrt(mean sigma^2).
struct Measure {
  static constexpr std::size_t average_tag = static_cast<std::size_t>(-1);
  std::size_t agent = average_tag;

  static Measure of_agent(std::size_t i) { return {i}; }
  static Measure average() { return {}; }
  bool is_average() const noexcept { return agent == average_tag; }
  bool operator==(const Measure&) const = default;
  std::string label() const { return is_average() ? "average" : "agent " + std::to_string(agent); }
};

struct SimulationOptions {
  bool zero_noise = false;
};

/// npaths x nt state samples on a uniform mesh of [t0, T].
struct SimulationBatch {
  Measure measure;
  double x0 = 0.0;
  double t0 = 0.0;
  double horizon = 0.0;
  std::size_t nt = 0;
  std::size_t npaths = 0;
  std::uint64_t seed = 0;
  bool exact_ou = false;
  bool zero_noise = false;
  std::vector<double> paths;

  double dt() const noexcept { return (horizon - t0) / static_cast<double>(nt - 1); }
  double t(std::size_t n) const noexcept { return n + 1 == nt ? horizon : t0 + static_cast<double>(n) * dt(); }
  double operator()(std::size_t p, std::size_t n) const noexcept { return paths[p * nt + n]; }
  const double* path(std::size_t p) const noexcept { return paths.data() + p * nt; }
};

/// One Euler-Maruyama step with a given Brownian increment.
template <class Drift, class Vol>
double euler_step(Drift&& drift, Vol&& vol, double t, double x, double dt, double dw) {
  return x + drift(t, x) * dt + vol(t, x) * dw;
}

inline SimulationBatch simulate(const BeliefSet& beliefs, Measure measure, double x0, double t0, double horizon,
                                std::size_t nt, std::size_t npaths, std::uint64_t seed,
                                const SimulationOptions& opt = {}) {
  if (nt < 2) throw InputError("simulate: need at least 2 time levels");
  if (!(horizon > t0)) throw InputError("simulate: horizon must exceed start time");
  if (!measure.is_average() && measure.agent >= beliefs.size())
    throw InputError("simulate: agent index out of range");

  SimulationBatch b;
  b.measure = measure;
  b.x0 = x0;
  b.t0 = t0;
  b.horizon = horizon;
  b.nt = nt;
  b.npaths = npaths;
  b.seed = seed;
  b.zero_noise = opt.zero_noise;
  b.exact_ou = beliefs.ou().has_value();
  b.paths.assign(npaths * nt, 0.0);
  const double dt = b.dt();
  const CounterRng rng(seed);

  double kappa = 0.0, ou_mean = 0.0, ou_sd = 0.0, ou_decay = 1.0;
  if (b.exact_ou) {
    const auto& tag = *beliefs.ou();
    if (measure.is_average()) {
      for (double k : tag.kappas) kappa += k;
      kappa /= static_cast<double>(tag.kappas.size());
    } else {
      kappa = tag.kappas[measure.agent];
    }
    ou_mean = tag.mean;
    ou_decay = std::exp(-kappa * dt);
    ou_sd = tag.sigma * std::sqrt(-std::expm1(-2.0 * kappa * dt) / (2.0 * kappa));
  }
  auto drift = [&](double t, double x) {
    return measure.is_average() ? beliefs.mean_drift(t, x) : beliefs.drift(measure.agent, t, x);
  };
  auto vol = [&](double t, double x) {
    return measure.is_average() ? std::sqrt(beliefs.mean_variance(t, x)) : beliefs.vol(measure.agent, t, x);
  };

  parallel_for(npaths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      double* row = b.paths.data() + p * nt;
      row[0] = x0;
      for (std::size_t n = 0; n + 1 < nt; ++n) {
        const double z = opt.zero_noise ? 0.0 : rng.normal(p, n);
        const double x = row[n];
        if (b.exact_ou) {
          row[n + 1] = ou_mean + (x - ou_mean) * ou_decay + ou_sd * z;
        } else {
          const double t = b.t(n);
          row[n + 1] = euler_step(drift, vol, t, x, dt, std::sqrt(dt) * z);
        }
      }
    }
  });
  return b;
}

struct McEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t samples = 0;
  std::size_t exits = 0;
};

/// Mean and standard error of per-sample values, reduced in index order.
inline McEstimate mean_and_se(const std::vector<double>& z) {
  McEstimate e;
  e.samples = z.size();
  if (z.empty()) return e;
  double s = 0.0;
  for (double v : z) s += v;
  e.mean = s / static_cast<double>(z.size());
  if (z.size() > 1) {
    double ss = 0.0;
    for (double v : z) ss += (v - e.mean) * (v - e.mean);
    e.se = std::sqrt(ss / static_cast<double>(z.size() - 1) / static_cast<double>(z.size()));
  }
  return e;
}

/// Price surface seen by the Feynman-Kac estimator, with an optional domain of validity.
struct SurfaceFn {
  std::function<double(double, double)> value;
  std::optional<Interval> domain;
};

/**
 * Monte Carlo estimate of agent i's value
 *   v_i(t, x) = E^i[f(X_T)] / G(t) - int_t^T G'(u)/G(t) E^i[v(u, X_u)] du,
 * with the time integral by the trapezoid rule on the path mesh.
 */
inline McEstimate feynman_kac_vi(const BeliefSet& beliefs, std::size_t i, const SurfaceFn& v, const CostKernel& kernel,
                                 const PayoffFn& payoff, double t, double x, std::size_t nt, std::size_t npaths,
                                 std::uint64_t seed) {
  if (!kernel.has_g()) throw InputError("feynman-kac: requires lambda > 0");
  const auto batch = simulate(beliefs, Measure::of_agent(i), x, t, kernel.horizon(), nt, npaths, seed);
  const double dt = batch.dt();
  const double inv = kernel.inverse(t);
  std::vector<double> weight(nt);
  for (std::size_t n = 0; n < nt; ++n) {
    const double u = batch.t(n);
    weight[n] = kernel.log_deriv(u) * kernel.ratio(u, t) * dt * ((n == 0 || n + 1 == nt) ? 0.5 : 1.0);
  }
  std::vector<double> z(npaths);
  std::vector<unsigned char> exited(npaths, 0);
  const bool needs_integral = kernel.kind() != CostKernel::Kind::risk_neutral;
  parallel_for(npaths, [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const double* row = batch.path(p);
      double acc = payoff(row[nt - 1]) * inv;
      if (needs_integral) {
        double integral = 0.0;
        for (std::size_t n = 0; n < nt; ++n) {
          if (v.domain && (row[n] < v.domain->lo || row[n] > v.domain->hi)) exited[p] = 1;
          integral += weight[n] * v.value(batch.t(n), row[n]);
        }
        acc -= integral;
      }
      z[p] = acc;
    }
  });
  auto est = mean_and_se(z);
  for (unsigned char e : exited) est.exits += e;
  if (npaths > 0 && static_cast<double>(est.exits) > 0.01 * static_cast<double>(npaths))
    throw NumericalError("feynman-kac: " + std::to_string(est.exits) + " of " + std::to_string(npaths) +
                         " paths left the surface domain");
  return est;
}

}  // namespace illiquid_eq
