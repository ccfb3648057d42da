#pragma once

#include <cmath>
#include <limits>
#include <string>

#include "error.hpp"

namespace illiquid_eq {

/**
 * Cost kernel G(t) = cosh(a (T - t)) with a = sqrt(gamma / lambda).
 *
 * G is never materialized: every quantity is computed in a ratio form that
 * stays finite for a*T up to (at least) 1e4.  The two degenerate markets are
 * explicit variants rather than tiny-epsilon approximations:
 *   - risk neutral (gamma = 0, lambda > 0): G == 1, G' == 0;
 *   - frictionless (lambda = 0, gamma > 0): no G at all, callers must take
 *     the frictionless branch.
 */
class CostKernel {
public:
  enum class Kind { regular, risk_neutral, frictionless };

  CostKernel(double gamma, double lambda, double horizon)
      : gamma_(gamma), lambda_(lambda), horizon_(horizon) {
    if (!(gamma >= 0.0) || !(lambda >= 0.0) || !std::isfinite(gamma) || !std::isfinite(lambda))
      throw InputError("cost kernel: gamma and lambda must be finite and nonnegative");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
      throw InputError("cost kernel: horizon must be positive");
    if (gamma == 0.0 && lambda == 0.0)
      throw InputError("cost kernel: gamma and lambda cannot both be zero");
    if (lambda == 0.0) {
      kind_ = Kind::frictionless;
      rate_ = std::numeric_limits<double>::infinity();
    } else if (gamma == 0.0) {
      kind_ = Kind::risk_neutral;
      rate_ = 0.0;
    } else {
      kind_ = Kind::regular;
      rate_ = std::sqrt(gamma / lambda);
    }
  }

  static CostKernel risk_neutral(double lambda, double horizon) { return {0.0, lambda, horizon}; }
  static CostKernel frictionless(double gamma, double horizon) { return {gamma, 0.0, horizon}; }

  double gamma() const noexcept { return gamma_; }
  double lambda() const noexcept { return lambda_; }
  double horizon() const noexcept { return horizon_; }
  /// sqrt(gamma/lambda); +inf for the frictionless kernel.
  double rate() const noexcept { return rate_; }
  Kind kind() const noexcept { return kind_; }
  bool has_g() const noexcept { return kind_ != Kind::frictionless; }

  /// G'(t)/G(t) = -a tanh(a (T - t)).
  double log_deriv(double t) const {
    require_g("log-derivative");
    check_time(t);
    if (kind_ == Kind::risk_neutral) return 0.0;
    return -rate_ * std::tanh(rate_ * (horizon_ - t));
  }

  /// G(u)/G(s); in (0, 1] for u >= s, overflows for u << s when a*T is large.
  double ratio(double u, double s) const {
    require_g("ratio");
    check_time(u);
    check_time(s);
    if (kind_ == Kind::risk_neutral) return 1.0;
    const double xu = rate_ * (horizon_ - u);
    const double xs = rate_ * (horizon_ - s);
    return std::exp(xu - xs) * (1.0 + std::exp(-2.0 * xu)) / (1.0 + std::exp(-2.0 * xs));
  }

  /// 1/G(t), in (0, 1].
  double inverse(double t) const {
    require_g("inverse");
    check_time(t);
    if (kind_ == Kind::risk_neutral) return 1.0;
    const double x = rate_ * (horizon_ - t);
    return 2.0 * std::exp(-x) / (1.0 + std::exp(-2.0 * x));
  }

  /// Integral over [t, T] of G(u)/G(t) du = sqrt(lambda/gamma) tanh(a (T - t)).
  double discount_integral(double t) const {
    require_g("discount integral");
    check_time(t);
    if (kind_ == Kind::risk_neutral) return horizon_ - t;
    return std::tanh(rate_ * (horizon_ - t)) / rate_;
  }

private:
  void require_g(const char* what) const {
    if (kind_ == Kind::frictionless)
      throw InputError(std::string("frictionless kernel has no ") + what);
  }
  void check_time(double t) const {
    // Allow a few ulps of slack so that mesh times computed as k*dt still pass at t = T.
    const double slack = 64.0 * std::numeric_limits<double>::epsilon() * horizon_;
    if (!(t >= -slack && t <= horizon_ + slack))
      throw InputError("cost kernel: time outside [0, T]");
  }

  double gamma_;
  double lambda_;
  double horizon_;
  double rate_ = 0.0;
  Kind kind_ = Kind::regular;
};

}  // namespace illiquid_eq
