#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "error.hpp"
#include "kernel.hpp"
#include "model.hpp"

namespace illiquid_eq {

/// Agents disagree only on the mean-reversion speed: dX = kappa_i (mean - X) dt + sigma dW.
struct OuModel {
  std::vector<double> kappas;
  double mean_x = 0.0;
  double sigma = 0.0;
  double horizon = 0.0;

  OuModel() = default;
  OuModel(std::vector<double> k, double mean, double vol, double T)
      : kappas(std::move(k)), mean_x(mean), sigma(vol), horizon(T) {
    if (kappas.empty()) throw InputError("ou model: need at least one kappa");
    for (double v : kappas)
      if (!(v > 0.0) || !std::isfinite(v)) throw InputError("ou model: kappas must be positive");
    if (!(sigma > 0.0)) throw InputError("ou model: sigma must be positive");
    if (!(horizon > 0.0)) throw InputError("ou model: horizon must be positive");
  }

  static OuModel from_beliefs(const BeliefSet& b, double T) {
    if (!b.ou()) throw InputError("ou model: beliefs carry no ou tag");
    return {b.ou()->kappas, b.ou()->mean, b.ou()->sigma, T};
  }

  std::size_t agents() const noexcept { return kappas.size(); }
  double kappa_bar() const {
    return std::accumulate(kappas.begin(), kappas.end(), 0.0) / static_cast<double>(kappas.size());
  }
  /// Stationary standard deviation under the averaged dynamics.
  double stationary_sd() const { return sigma / std::sqrt(2.0 * kappa_bar()); }
};

/**
 * Coefficients of the affine ansatz v_i(t, x) = A_i(t) + B_i(t) x on a uniform
 * mesh of [0, T], with derivatives stored for cubic Hermite dense output.
 */
class AbSolution {
public:
  AbSolution(std::vector<double> t, std::vector<std::vector<double>> A, std::vector<std::vector<double>> B,
             std::vector<std::vector<double>> dA, std::vector<std::vector<double>> dB)
      : t_(std::move(t)), A_(std::move(A)), B_(std::move(B)), dA_(std::move(dA)), dB_(std::move(dB)) {}

  const std::vector<double>& times() const noexcept { return t_; }
  std::size_t agents() const noexcept { return A_.size(); }
  const std::vector<double>& A_nodes(std::size_t i) const { return A_.at(i); }
  const std::vector<double>& B_nodes(std::size_t i) const { return B_.at(i); }

  double A(std::size_t i, double t) const { return hermite(A_[i], dA_[i], t); }
  double B(std::size_t i, double t) const { return hermite(B_[i], dB_[i], t); }
  double dB(std::size_t i, double t) const { return hermite_slope(B_[i], dB_[i], t); }

  double B_bar(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < agents(); ++i) s += B(i, t);
    return s / static_cast<double>(agents());
  }
  double B_bar_deriv(double t) const {
    double s = 0.0;
    for (std::size_t i = 0; i < agents(); ++i) s += dB(i, t);
    return s / static_cast<double>(agents());
  }

private:
  std::size_t locate(double t, double& s, double& h) const {
    const std::size_t n = t_.size();
    h = t_[1] - t_[0];
    double pos = (t - t_[0]) / h;
    pos = std::clamp(pos, 0.0, static_cast<double>(n - 1));
    auto k = static_cast<std::size_t>(pos);
    if (k + 1 >= n) k = n - 2;
    s = pos - static_cast<double>(k);
    return k;
  }
  double hermite(const std::vector<double>& y, const std::vector<double>& d, double t) const {
    double s, h;
    const std::size_t k = locate(t, s, h);
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * y[k] + (s3 - 2 * s2 + s) * h * d[k] + (-2 * s3 + 3 * s2) * y[k + 1] +
           (s3 - s2) * h * d[k + 1];
  }
  double hermite_slope(const std::vector<double>& y, const std::vector<double>& d, double t) const {
    double s, h;
    const std::size_t k = locate(t, s, h);
    const double s2 = s * s;
    return ((6 * s2 - 6 * s) * y[k] + (6 * s - 6 * s2) * y[k + 1]) / h + (3 * s2 - 4 * s + 1) * d[k] +
           (3 * s2 - 2 * s) * d[k + 1];
  }

  std::vector<double> t_;
  std::vector<std::vector<double>> A_, B_, dA_, dB_;
};

/// Backward RK4 for B' = kappa B + q (B_bar - B), A' = q (A_bar - A) - mean kappa B.
inline AbSolution solve_ab(const OuModel& ou, const CostKernel& kernel, std::size_t n_steps = 3000) {
  if (!kernel.has_g()) throw InputError("solve_ab: requires lambda > 0");
  if (n_steps < 100) throw InputError("solve_ab: n_steps must be at least 100");
  const std::size_t n = ou.agents();
  const double T = kernel.horizon();
  const double h = T / static_cast<double>(n_steps);

  // State layout: B_0..B_{n-1}, A_0..A_{n-1}.
  auto rhs = [&](double t, const std::vector<double>& y, std::vector<double>& f) {
    const double q = kernel.log_deriv(std::clamp(t, 0.0, T));
    double bb = 0.0, ab = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      bb += y[i];
      ab += y[n + i];
    }
    bb /= static_cast<double>(n);
    ab /= static_cast<double>(n);
    f.resize(2 * n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = ou.kappas[i] * y[i] + q * (bb - y[i]);
      f[n + i] = q * (ab - y[n + i]) - ou.mean_x * ou.kappas[i] * y[i];
    }
  };

  std::vector<double> t(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) t[k] = k == n_steps ? T : static_cast<double>(k) * h;
  std::vector<std::vector<double>> A(n, std::vector<double>(n_steps + 1)), B = A, dA = A, dB = A;

  std::vector<double> y(2 * n, 0.0), k1, k2, k3, k4, tmp(2 * n);
  std::fill(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(n), 1.0);
  auto store = [&](std::size_t k, const std::vector<double>& state, const std::vector<double>& f) {
    for (std::size_t i = 0; i < n; ++i) {
      B[i][k] = state[i];
      A[i][k] = state[n + i];
      dB[i][k] = f[i];
      dA[i][k] = f[n + i];
    }
  };
  rhs(T, y, k1);
  store(n_steps, y, k1);
  for (std::size_t k = n_steps; k-- > 0;) {
    const double t1 = t[k + 1];
    const double hs = -(t1 - t[k]);
    rhs(t1, y, k1);
    for (std::size_t m = 0; m < 2 * n; ++m) tmp[m] = y[m] + 0.5 * hs * k1[m];
    rhs(t1 + 0.5 * hs, tmp, k2);
    for (std::size_t m = 0; m < 2 * n; ++m) tmp[m] = y[m] + 0.5 * hs * k2[m];
    rhs(t1 + 0.5 * hs, tmp, k3);
    for (std::size_t m = 0; m < 2 * n; ++m) tmp[m] = y[m] + hs * k3[m];
    rhs(t[k], tmp, k4);
    for (std::size_t m = 0; m < 2 * n; ++m) {
      y[m] += hs / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
      if (!std::isfinite(y[m]))
        throw NumericalError("solve_ab: non-finite state; gamma/lambda too extreme for n_steps");
    }
    rhs(t[k], y, k1);
    store(k, y, k1);
  }
  return {std::move(t), std::move(A), std::move(B), std::move(dA), std::move(dB)};
}

/// Equilibrium price X_bar + (x - X_bar) B_bar(t).
inline double price(const OuModel& ou, const AbSolution& ab, double t, double x) {
  return ou.mean_x + (x - ou.mean_x) * ab.B_bar(t);
}

/// Agent i's value A_i(t) + B_i(t) x.
inline double agent_value(const AbSolution& ab, std::size_t i, double t, double x) {
  return ab.A(i, t) + ab.B(i, t) * x;
}

/// Drift of the equilibrium price under agent i's measure.
inline double price_drift(const OuModel& ou, const AbSolution& ab, std::size_t i, double t, double x) {
  return (x - ou.mean_x) * (ab.B_bar_deriv(t) - ou.kappas[i] * ab.B_bar(t));
}

inline double frictionless_price(const OuModel& ou, double t, double x) {
  return ou.mean_x + (x - ou.mean_x) * std::exp(-ou.kappa_bar() * (ou.horizon - t));
}

struct RiskNeutralValues {
  double price = 0.0;
  std::vector<double> agents;
};

inline RiskNeutralValues risk_neutral_price(const OuModel& ou, double t, double x) {
  RiskNeutralValues r;
  for (double k : ou.kappas) {
    r.agents.push_back(ou.mean_x + (x - ou.mean_x) * std::exp(-k * (ou.horizon - t)));
    r.price += r.agents.back();
  }
  r.price /= static_cast<double>(ou.agents());
  return r;
}

/// Drift of the frictionless price perceived by agent i at price level v0.
inline double perceived_drift_frictionless(const OuModel& ou, std::size_t i, double /*t*/, double price_level) {
  return (ou.kappas.at(i) - ou.kappa_bar()) * (ou.mean_x - price_level);
}

/// Leading correction in sqrt(lambda) around the frictionless price.
inline double tc_correction_closed(const OuModel& ou, double gamma, double t, double x) {
  if (!(gamma > 0.0)) throw InputError("tc correction: requires gamma > 0");
  const double kb = ou.kappa_bar();
  double disp = 0.0;
  for (double k : ou.kappas) disp += (kb - k) * (kb - k);
  disp /= static_cast<double>(ou.agents());
  const double tau = ou.horizon - t;
  return std::sqrt(1.0 / gamma) * disp * tau * std::exp(-kb * tau) * (x - ou.mean_x);
}

/// Leading correction in gamma around the risk-neutral price.
inline double hc_correction_closed(const OuModel& ou, double lambda, double t, double x) {
  if (!(lambda > 0.0)) throw InputError("hc correction: requires lambda > 0");
  const std::size_t n = ou.agents();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (ou.kappas[i] == ou.kappas[j])
        throw InputError("hc correction: repeated kappa values; use the integral form (asymptotics::hc_correction)");
  const double tau = ou.horizon - t;
  double cross = 0.0, diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    diag += std::exp(-ou.kappas[i] * tau);
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) cross += std::exp(-ou.kappas[j] * tau) / (ou.kappas[i] - ou.kappas[j]);
  }
  const double nn = static_cast<double>(n);
  const double bracket = cross - tau * (nn - 1.0) / 2.0 * diag;
  return (x - ou.mean_x) * tau / (lambda * nn * nn) * bracket;
}

struct VolatilityPoint {
  double b_bar = 0.0;
  double frictionless = 0.0;  // exp(-kappa_bar (T - t))
  double risk_neutral = 0.0;  // (1/N) sum exp(-kappa_i (T - t))
};

inline VolatilityPoint volatility_curve(const OuModel& ou, const AbSolution& ab, double t) {
  const double tau = ou.horizon - t;
  VolatilityPoint p;
  p.b_bar = ab.B_bar(t);
  p.frictionless = std::exp(-ou.kappa_bar() * tau);
  for (double k : ou.kappas) p.risk_neutral += std::exp(-k * tau);
  p.risk_neutral /= static_cast<double>(ou.agents());
  return p;
}

}  // namespace illiquid_eq
