#pragma once

#include <cmath>
#include <cstdint>
#include <algorithm>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "error.hpp"
#include "kernel.hpp"

namespace illiquid_eq {

/// Coefficient function of (t, x).
using CoefFn = std::function<double(double, double)>;
/// Payoff function of the terminal state.
using PayoffFn = std::function<double(double)>;

/// One agent's view of the state dynamics dX = b(t,X) dt + sigma(t,X) dW.
struct AgentBelief {
  CoefFn drift;
  CoefFn vol;
};

/// Structural information that downstream modules may exploit.
struct OuTag {
  std::vector<double> kappas;
  double mean = 0.0;
  double sigma = 0.0;
};

struct ConstantTag {
  std::vector<double> drifts;
  std::vector<double> vols;
};

/// Heterogeneous beliefs of N agents about the same state process.
class BeliefSet {
public:
  BeliefSet() = default;
  explicit BeliefSet(std::vector<AgentBelief> agents) : agents_(std::move(agents)) {
    if (agents_.empty()) throw InputError("belief set: need at least one agent");
    for (const auto& a : agents_)
      if (!a.drift || !a.vol) throw InputError("belief set: missing coefficient function");
  }

  std::size_t size() const noexcept { return agents_.size(); }
  const AgentBelief& operator[](std::size_t i) const { return agents_.at(i); }

  double drift(std::size_t i, double t, double x) const { return agents_[i].drift(t, x); }
  double vol(std::size_t i, double t, double x) const { return agents_[i].vol(t, x); }

  /// Averaged drift (1/N) sum b_i.
  double mean_drift(double t, double x) const {
    double s = 0.0;
    for (const auto& a : agents_) s += a.drift(t, x);
    return s / static_cast<double>(agents_.size());
  }
  /// Averaged variance (1/N) sum sigma_i^2.
  double mean_variance(double t, double x) const {
    double s = 0.0;
    for (const auto& a : agents_) {
      const double v = a.vol(t, x);
      s += v * v;
    }
    return s / static_cast<double>(agents_.size());
  }

  const std::optional<OuTag>& ou() const noexcept { return ou_; }
  const std::optional<ConstantTag>& constant() const noexcept { return constant_; }

  /// Mean-reverting beliefs dX = kappa_i (mean - X) dt + sigma dW.
  static BeliefSet ornstein_uhlenbeck(std::vector<double> kappas, double mean, double sigma) {
    if (kappas.empty()) throw InputError("ou beliefs: need at least one kappa");
    for (double k : kappas)
      if (!(k > 0.0)) throw InputError("ou beliefs: kappas must be positive");
    if (!(sigma > 0.0)) throw InputError("ou beliefs: sigma must be positive");
    std::vector<AgentBelief> agents;
    for (double k : kappas)
      agents.push_back({[k, mean](double, double x) { return k * (mean - x); },
                        [sigma](double, double) { return sigma; }});
    BeliefSet b(std::move(agents));
    b.ou_ = OuTag{std::move(kappas), mean, sigma};
    return b;
  }

  /// Constant drift and volatility per agent (arithmetic Brownian motions).
  static BeliefSet constant_coefficients(std::vector<double> drifts, std::vector<double> vols) {
    if (drifts.size() != vols.size() || drifts.empty())
      throw InputError("constant beliefs: drifts and vols must be nonempty and equally long");
    std::vector<AgentBelief> agents;
    for (std::size_t i = 0; i < drifts.size(); ++i) {
      const double b = drifts[i], s = vols[i];
      agents.push_back({[b](double, double) { return b; }, [s](double, double) { return s; }});
    }
    BeliefSet out(std::move(agents));
    out.constant_ = ConstantTag{std::move(drifts), std::move(vols)};
    return out;
  }

private:
  std::vector<AgentBelief> agents_;
  std::optional<OuTag> ou_;
  std::optional<ConstantTag> constant_;
};

/// Market: cost kernel, supply, initial allocations and the terminal payoff.
struct MarketSpec {
  CostKernel kernel;
  double supply = 0.0;
  std::vector<double> allocations;
  PayoffFn payoff;

  double horizon() const noexcept { return kernel.horizon(); }
  std::size_t agents() const noexcept { return allocations.size(); }
};

/// Drift and diffusion of the price process under each agent's measure, on a grid.
struct PricePathStats {
  std::size_t nt = 0;
  std::size_t nx = 0;
  std::vector<std::vector<double>> drift;      // per agent, nt*nx row-major in time
  std::vector<std::vector<double>> diffusion;  // per agent, d_x v * sigma_i
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct ValidationOptions {
  /// Declared parabolicity floor kappa: sigma_i^2 >= kappa is required.
  double parabolicity_floor = 1e-12;
  std::size_t samples = 256;
  std::uint64_t seed = 0;
};

struct ValidationReport {
  std::vector<std::string> violations;
  /// Smallest sampled sigma_i^2 over all agents.
  double measured_floor = 0.0;

  bool ok() const noexcept { return violations.empty(); }
};

/// Spot-check the standing assumptions on the computational domain.
inline ValidationReport validate(const MarketSpec& spec, const BeliefSet& beliefs, Interval domain,
                                 const ValidationOptions& opt = {}) {
  ValidationReport rep;
  if (beliefs.size() == 0) {
    rep.violations.emplace_back("beliefs: no agents");
    return rep;
  }
  if (spec.allocations.size() != beliefs.size())
    rep.violations.emplace_back("allocation count: " + std::to_string(spec.allocations.size()) +
                                " allocations for " + std::to_string(beliefs.size()) + " agents");
  const double total = std::accumulate(spec.allocations.begin(), spec.allocations.end(), 0.0);
  if (!(std::fabs(total - spec.supply) <= 1e-12))
    rep.violations.emplace_back("allocation sum: allocations sum to " + std::to_string(total) +
                                " but supply is " + std::to_string(spec.supply));
  if (spec.supply < 0.0) rep.violations.emplace_back("supply: negative");
  if (!(domain.lo < domain.hi)) {
    rep.violations.emplace_back("domain: empty interval");
    return rep;
  }

  std::mt19937_64 rng(opt.seed);
  std::uniform_real_distribution<double> ut(0.0, spec.horizon());
  std::uniform_real_distribution<double> ux(domain.lo, domain.hi);
  double floor = std::numeric_limits<double>::infinity();
  bool coef_finite = true;
  auto probe = [&](double t, double x) {
    for (std::size_t i = 0; i < beliefs.size(); ++i) {
      const double b = beliefs.drift(i, t, x);
      const double s = beliefs.vol(i, t, x);
      if (!std::isfinite(b) || !std::isfinite(s)) coef_finite = false;
      floor = std::min(floor, s * s);
    }
  };
  // Dyadic lattice (corners, midpoints, quarter points, ...) plus random interior samples.
  for (std::size_t a = 0; a <= 16; ++a)
    for (std::size_t b = 0; b <= 16; ++b)
      probe(spec.horizon() * static_cast<double>(a) / 16.0,
            domain.lo + (domain.hi - domain.lo) * static_cast<double>(b) / 16.0);
  for (std::size_t k = 0; k < opt.samples; ++k) probe(ut(rng), ux(rng));
  rep.measured_floor = floor;
  if (!coef_finite) rep.violations.emplace_back("coefficients: non-finite drift or vol on domain");
  if (!(floor >= opt.parabolicity_floor))
    rep.violations.emplace_back("parabolicity floor: min sigma^2 = " + std::to_string(floor) +
                                " below declared " + std::to_string(opt.parabolicity_floor));

  if (!spec.payoff) {
    rep.violations.emplace_back("payoff: missing");
    return rep;
  }
  // Second differences at the sampled points must be finite and of moderate size.
  const double h = 1e-3 * (domain.hi - domain.lo);
  bool payoff_ok = true;
  for (std::size_t k = 0; k < opt.samples; ++k) {
    const double x = ux(rng);
    const double f0 = spec.payoff(x), fm = spec.payoff(x - h), fp = spec.payoff(x + h);
    const double d2 = (fp - 2.0 * f0 + fm) / (h * h);
    if (!std::isfinite(f0) || !std::isfinite(d2)) payoff_ok = false;
  }
  if (!payoff_ok) rep.violations.emplace_back("payoff smoothness: non-finite value or curvature");
  return rep;
}

}  // namespace illiquid_eq
