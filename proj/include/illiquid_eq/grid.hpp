#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "error.hpp"

namespace illiquid_eq {

/// Uniform space-time mesh: nx nodes on [x_min, x_max], nt levels on [0, T].
struct Grid1D {
  double x_min = 0.0;
  double x_max = 1.0;
  std::size_t nx = 3;
  std::size_t nt = 2;

  void check() const {
    if (!(x_min < x_max)) throw InputError("grid: x_min must be below x_max");
    if (nx < 3) throw InputError("grid: need at least 3 spatial nodes");
    if (nt < 2) throw InputError("grid: need at least 2 time levels");
  }
  double dx() const noexcept { return (x_max - x_min) / static_cast<double>(nx - 1); }
  double x(std::size_t j) const noexcept {
    return j + 1 == nx ? x_max : x_min + static_cast<double>(j) * dx();
  }
  double dt(double horizon) const noexcept { return horizon / static_cast<double>(nt - 1); }
  double t(std::size_t n, double horizon) const noexcept {
    return n + 1 == nt ? horizon : static_cast<double>(n) * dt(horizon);
  }
  bool contains(double xv) const noexcept { return xv >= x_min && xv <= x_max; }

  /// Same domain, spatial resolution multiplied by `factor`.
  Grid1D refined(std::size_t factor) const {
    return {x_min, x_max, (nx - 1) * factor + 1, nt};
  }
};

/// Values over (time level, node), row-major in time.
class Field2D {
public:
  Field2D() = default;
  Field2D(std::size_t nt, std::size_t nx, double fill = 0.0) : nt_(nt), nx_(nx), data_(nt * nx, fill) {}

  std::size_t nt() const noexcept { return nt_; }
  std::size_t nx() const noexcept { return nx_; }
  double& operator()(std::size_t n, std::size_t j) noexcept { return data_[n * nx_ + j]; }
  double operator()(std::size_t n, std::size_t j) const noexcept { return data_[n * nx_ + j]; }
  std::span<double> level(std::size_t n) noexcept { return {data_.data() + n * nx_, nx_}; }
  std::span<const double> level(std::size_t n) const noexcept { return {data_.data() + n * nx_, nx_}; }
  const std::vector<double>& data() const noexcept { return data_; }
  std::vector<double>& data() noexcept { return data_; }

private:
  std::size_t nt_ = 0;
  std::size_t nx_ = 0;
  std::vector<double> data_;
};

/// Largest absolute entrywise difference.
inline double max_abs_diff(const Field2D& a, const Field2D& b) {
  double m = 0.0;
  for (std::size_t k = 0; k < a.data().size(); ++k)
    m = std::max(m, std::fabs(a.data()[k] - b.data()[k]));
  return m;
}

/// Thomas algorithm; lo[0] and up[n-1] are ignored. Overwrites rhs with the solution.
inline void solve_tridiagonal(std::span<const double> lo, std::span<const double> di,
                              std::span<const double> up, std::span<double> rhs,
                              std::vector<double>& scratch) {
  const std::size_t n = di.size();
  scratch.resize(n);
  double beta = di[0];
  if (beta == 0.0) throw NumericalError("tridiagonal solve: zero pivot");
  rhs[0] /= beta;
  for (std::size_t j = 1; j < n; ++j) {
    scratch[j] = up[j - 1] / beta;
    beta = di[j] - lo[j] * scratch[j];
    if (beta == 0.0) throw NumericalError("tridiagonal solve: zero pivot");
    rhs[j] = (rhs[j] - lo[j] * rhs[j - 1]) / beta;
  }
  for (std::size_t j = n - 1; j-- > 0;) rhs[j] -= scratch[j + 1] * rhs[j + 1];
}

/// First derivative: central inside, second-order one-sided at the ends.
inline void diff1(std::span<const double> u, double h, std::span<double> out) {
  const std::size_t n = u.size();
  out[0] = (-3.0 * u[0] + 4.0 * u[1] - u[2]) / (2.0 * h);
  for (std::size_t j = 1; j + 1 < n; ++j) out[j] = (u[j + 1] - u[j - 1]) / (2.0 * h);
  out[n - 1] = (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * h);
}

/// Second derivative: central inside, copied from the neighbour at the ends.
inline void diff2(std::span<const double> u, double h, std::span<double> out) {
  const std::size_t n = u.size();
  for (std::size_t j = 1; j + 1 < n; ++j) out[j] = (u[j + 1] - 2.0 * u[j] + u[j - 1]) / (h * h);
  out[0] = out[1];
  out[n - 1] = out[n - 2];
}

/// One pass of (1/4, 1/2, 1/4) smoothing; end nodes are left untouched.
inline void smooth3(std::span<double> u) {
  if (u.size() < 3) return;
  double prev = u[0];
  for (std::size_t j = 1; j + 1 < u.size(); ++j) {
    const double cur = u[j];
    u[j] = 0.25 * prev + 0.5 * cur + 0.25 * u[j + 1];
    prev = cur;
  }
}

/// Piecewise-linear interpolation on a uniform grid; clamps outside.
inline double interp_linear(std::span<const double> u, double x_min, double h, double x) {
  const std::size_t n = u.size();
  double s = (x - x_min) / h;
  if (s <= 0.0) return u[0];
  if (s >= static_cast<double>(n - 1)) return u[n - 1];
  const auto j = static_cast<std::size_t>(s);
  const double w = s - static_cast<double>(j);
  return j + 1 < n ? (1.0 - w) * u[j] + w * u[j + 1] : u[j];
}

/// Bilinear interpolation of a field on (grid, horizon); clamps outside the box.
inline double interp_bilinear(const Field2D& f, const Grid1D& g, double horizon, double t, double x) {
  const double dt = g.dt(horizon);
  double s = t / dt;
  s = std::clamp(s, 0.0, static_cast<double>(g.nt - 1));
  auto n = static_cast<std::size_t>(s);
  if (n + 1 >= g.nt) n = g.nt - 2;
  const double w = s - static_cast<double>(n);
  const double a = interp_linear(f.level(n), g.x_min, g.dx(), x);
  const double b = interp_linear(f.level(n + 1), g.x_min, g.dx(), x);
  return (1.0 - w) * a + w * b;
}

}  // namespace illiquid_eq
