#pragma once

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "error.hpp"
#include "simulate.hpp"

namespace illiquid_eq {

/// Equally spaced observations; spacing in years.
struct TimeSeries {
  std::vector<std::string> dates;
  std::vector<double> values;
  double spacing_dt = 1.0 / 252.0;

  std::size_t size() const noexcept { return values.size(); }
};

struct IngestResult {
  TimeSeries series;
  std::size_t dropped = 0;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

inline bool iso_date(std::string_view d) {
  if (d.size() != 10 || d[4] != '-' || d[7] != '-') return false;
  for (std::size_t k : {0, 1, 2, 3, 5, 6, 8, 9})
    if (d[k] < '0' || d[k] > '9') return false;
  return true;
}

}  // namespace detail

/// Two-column CSV with a header row; "." marks a missing value and the row is dropped.
inline IngestResult parse_series(std::istream& in, const std::string& source = "input") {
  IngestResult r;
  std::string line;
  std::size_t lineno = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string_view row = detail::trim(line);
    if (header) {
      header = false;
      continue;
    }
    if (row.empty()) continue;
    const auto comma = row.find(',');
    auto fail = [&](const std::string& why) {
      throw InputError(source + ":" + std::to_string(lineno) + ": " + why);
    };
    if (comma == std::string_view::npos || row.find(',', comma + 1) != std::string_view::npos)
      fail("expected two comma-separated fields");
    const std::string_view date = detail::trim(row.substr(0, comma));
    const std::string_view value = detail::trim(row.substr(comma + 1));
    if (!detail::iso_date(date)) fail("malformed date '" + std::string(date) + "'");
    if (!r.series.dates.empty() && !(r.series.dates.back() < date)) fail("dates not strictly increasing");
    if (value == ".") {
      ++r.dropped;
      continue;
    }
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc{} || ptr != value.data() + value.size() || !std::isfinite(v))
      fail("malformed value '" + std::string(value) + "'");
    r.series.dates.emplace_back(date);
    r.series.values.push_back(v);
  }
  if (r.series.values.empty()) throw InputError(source + ": no observations");
  return r;
}

inline IngestResult ingest_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  return parse_series(in, path);
}

struct EstimateOptions {
  std::size_t max_lag = 60;
  double acf_threshold = 0.2;
  double spacing_dt = 0.0;  // 0 means use the series spacing
};

struct OuEstimate {
  double kappa_bar = 0.0;
  double mean_x = 0.0;
  double sigma = 0.0;
  double r_squared = 0.0;      // uncentered, regression through the origin
  std::size_t lag_window = 0;  // lags 1..lag_window used
  double sample_variance = 0.0;
  std::size_t observations = 0;
  std::vector<double> acf;     // lags 1..max_lag
};

/// Moment matching for mean and variance, log-autocorrelation regression for kappa.
inline OuEstimate estimate_ou(const TimeSeries& s, const EstimateOptions& opt = {}) {
  const std::size_t n = s.size();
  if (n < 100) throw InputError("estimate_ou: need at least 100 observations, got " + std::to_string(n));
  if (opt.max_lag < 1 || opt.max_lag >= n) throw InputError("estimate_ou: max_lag out of range");
  const double dt = opt.spacing_dt > 0.0 ? opt.spacing_dt : s.spacing_dt;
  OuEstimate e;
  e.observations = n;
  double m = 0.0;
  for (double v : s.values) m += v;
  m /= static_cast<double>(n);
  double ss = 0.0, scale = 0.0;
  for (double v : s.values) {
    ss += (v - m) * (v - m);
    scale = std::max(scale, std::fabs(v));
  }
  // Spread at rounding level of the data counts as none.
  const double noise = 64.0 * std::numeric_limits<double>::epsilon() * scale;
  if (!(ss > static_cast<double>(n) * noise * noise)) throw InputError("estimate_ou: zero variance");
  e.mean_x = m;
  e.sample_variance = ss / static_cast<double>(n - 1);

  e.acf.resize(opt.max_lag);
  for (std::size_t k = 1; k <= opt.max_lag; ++k) {
    double c = 0.0;
    for (std::size_t t = 0; t + k < n; ++t) c += (s.values[t] - m) * (s.values[t + k] - m);
    e.acf[k - 1] = c / ss;
  }
  for (std::size_t k = opt.max_lag; k >= 1; --k)
    if (e.acf[k - 1] > opt.acf_threshold) {
      e.lag_window = k;
      break;
    }
  if (e.lag_window == 0) throw InputError("estimate_ou: no lag with autocorrelation above threshold");
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t k = 1; k <= e.lag_window; ++k) {
    const double r = e.acf[k - 1];
    if (!(r > 0.0)) throw InputError("estimate_ou: window too wide (nonpositive autocorrelation at lag " +
                                     std::to_string(k) + ")");
    const double y = std::log(r), x = static_cast<double>(k);
    sxy += x * y;
    sxx += x * x;
    syy += y * y;
  }
  const double slope = sxy / sxx;
  e.kappa_bar = -slope / dt;
  if (!(e.kappa_bar > 0.0)) throw InputError("estimate_ou: nonpositive mean-reversion estimate");
  e.r_squared = syy > 0.0 ? slope * slope * sxx / syy : 1.0;
  e.sigma = std::sqrt(2.0 * e.kappa_bar * e.sample_variance);
  return e;
}

/// Exact-sampled OU observations with a stationary initial draw, dated on consecutive days from 2000-01-01.
inline TimeSeries synthetic_ou_series(double kappa, double mean, double sigma, std::size_t observations,
                                      std::uint64_t seed, double spacing_dt = 1.0 / 252.0) {
  if (observations < 2) throw InputError("synthetic series: need at least 2 observations");
  const auto beliefs = BeliefSet::ornstein_uhlenbeck({kappa}, mean, sigma);
  const CounterRng rng(seed);
  const double x0 = mean + sigma / std::sqrt(2.0 * kappa) * rng.normal(~0ULL, 0);
  const double span = spacing_dt * static_cast<double>(observations - 1);
  const auto b = simulate(beliefs, Measure::of_agent(0), x0, 0.0, span, observations, 1, seed);
  TimeSeries s;
  s.spacing_dt = spacing_dt;
  s.values.assign(b.path(0), b.path(0) + observations);
  using namespace std::chrono;
  const sys_days start = year_month_day{year{2000}, month{1}, day{1}};
  for (std::size_t k = 0; k < observations; ++k) {
    const year_month_day d{start + days{static_cast<int>(k)}};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    s.dates.emplace_back(buf);
  }
  return s;
}

/// kappa_1 = 2 kappa_bar - kappa_2, so the two beliefs average to kappa_bar.
inline std::pair<double, double> split_beliefs(double kappa_bar, double kappa2) {
  if (!(kappa2 > 0.0) || !(kappa2 < 2.0 * kappa_bar))
    throw InputError("split_beliefs: need 0 < kappa2 < 2 kappa_bar");
  return {2.0 * kappa_bar - kappa2, kappa2};
}

}  // namespace illiquid_eq
