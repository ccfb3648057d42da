#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "grid.hpp"
#include "kernel.hpp"
#include "model.hpp"
#include "ou.hpp"

namespace illiquid_eq {

using Json = nlohmann::json;

struct PayoffConfig {
  std::string type = "linear";  // linear | constant | call | smooth_call
  double slope = 1.0;
  double intercept = 0.0;
  double value = 0.0;
  double strike = 1.0;
  double width = 0.05;
};

struct ModelConfig {
  std::string belief_type = "ou";  // ou | constant
  std::vector<double> kappas;
  double mean = 0.0;
  double sigma = 0.0;
  std::vector<double> drifts;
  std::vector<double> vols;
  PayoffConfig payoff;
  double gamma = 0.0;
  double lambda = 0.0;
  double horizon = 1.0;
  double supply = 0.0;
  std::vector<double> allocations;
};

struct NumericsConfig {
  std::optional<double> x_min;
  std::optional<double> x_max;
  std::size_t nx = 201;
  std::size_t nt = 301;
  std::size_t ode_steps = 3000;
  std::size_t paths = 10000;
  std::size_t steps = 2000;
  std::size_t fk_paths = 100000;
  std::size_t directions = 20;
  std::size_t refinement = 4;
  std::uint64_t seed = 42;
  double x_eval = 1.0;
  bool sabotage = false;
};

struct OutputConfig {
  std::string directory = "out";
  std::vector<std::string> formats{"csv", "svg"};
  bool debug_paths = false;
};

struct CalibrationConfig {
  std::string csv;
  std::size_t max_lag = 60;
  double spacing_dt = 1.0 / 252.0;
  std::optional<double> kappa2;
};

/// Declarative run description: model, numerics, output and (optionally) calibration sections.
struct RunConfig {
  ModelConfig model;
  NumericsConfig numerics;
  OutputConfig output;
  CalibrationConfig calibration;
  Json source;  // canonical document after overrides, used for hashing

  std::size_t agents() const {
    return model.belief_type == "ou" ? model.kappas.size() : model.drifts.size();
  }

  CostKernel kernel() const { return {model.gamma, model.lambda, model.horizon}; }
  CostKernel kernel_with(double gamma, double lambda) const { return {gamma, lambda, model.horizon}; }

  BeliefSet beliefs() const {
    if (model.belief_type == "ou") return BeliefSet::ornstein_uhlenbeck(model.kappas, model.mean, model.sigma);
    return BeliefSet::constant_coefficients(model.drifts, model.vols);
  }

  PayoffFn payoff() const {
    const PayoffConfig p = model.payoff;
    if (p.type == "linear") return [p](double x) { return p.intercept + p.slope * x; };
    if (p.type == "constant") return [p](double) { return p.value; };
    if (p.type == "call") return [p](double x) { return std::max(x - p.strike, 0.0); };
    // softplus call: width * log(1 + exp((x - K) / width))
    return [p](double x) {
      const double z = (x - p.strike) / p.width;
      return p.width * (z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)));
    };
  }

  MarketSpec spec() const { return spec_with(kernel()); }
  MarketSpec spec_with(const CostKernel& k) const {
    std::vector<double> alloc = model.allocations;
    if (alloc.empty()) alloc.assign(agents(), model.supply / static_cast<double>(agents()));
    return {k, model.supply, alloc, payoff()};
  }

  OuModel ou() const {
    if (model.belief_type != "ou") throw InputError("config: command needs ou beliefs");
    return {model.kappas, model.mean, model.sigma, model.horizon};
  }

  /// Spatial grid; defaults to mean +- 6 stationary sd for ou beliefs.
  Grid1D grid() const {
    Grid1D g;
    g.nx = numerics.nx;
    g.nt = numerics.nt;
    if (numerics.x_min && numerics.x_max) {
      g.x_min = *numerics.x_min;
      g.x_max = *numerics.x_max;
    } else if (model.belief_type == "ou") {
      const double sd = ou().stationary_sd();
      g.x_min = numerics.x_min.value_or(model.mean - 6.0 * sd);
      g.x_max = numerics.x_max.value_or(model.mean + 6.0 * sd);
    } else {
      throw InputError("config: numerics.x_min and numerics.x_max are required for constant beliefs");
    }
    g.check();
    return g;
  }
};

namespace detail {

inline void reject_unknown(const Json& obj, const std::string& where, const std::set<std::string>& allowed) {
  if (!obj.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw InputError("config: unknown key '" + where + "." + it.key() + "'");
}

template <class T>
void read(const Json& obj, const char* key, const std::string& where, T& dst) {
  if (!obj.contains(key)) return;
  try {
    dst = obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("config: '" + where + "." + key + "' has the wrong type");
  }
}

template <class T>
void read(const Json& obj, const char* key, const std::string& where, std::optional<T>& dst) {
  if (!obj.contains(key)) return;
  T v{};
  read(obj, key, where, v);
  dst = v;
}

/// Parses an override value as JSON, falling back to a plain string.
inline Json parse_scalar(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return Json(text);
  }
}

}  // namespace detail

/// Applies "a.b.c=value" to the document, creating intermediate objects.
inline void apply_override(Json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InputError("--set expects key=value, got '" + assignment + "'");
  const std::string path = assignment.substr(0, eq);
  Json* node = &doc;
  std::size_t start = 0;
  for (;;) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw InputError("--set: empty key segment in '" + path + "'");
    if (!node->is_object()) throw InputError("--set: '" + path + "' descends into a non-object");
    if (dot == std::string::npos) {
      (*node)[key] = detail::parse_scalar(assignment.substr(eq + 1));
      return;
    }
    node = &(*node)[key];
    if (node->is_null()) *node = Json::object();
    start = dot + 1;
  }
}

inline RunConfig parse_config(Json doc) {
  using detail::read;
  using detail::reject_unknown;
  if (!doc.is_object() || doc.empty()) throw InputError("config: empty document");
  reject_unknown(doc, "config", {"model", "numerics", "output", "calibration"});
  RunConfig c;
  c.source = doc;

  if (doc.contains("model")) {
    const Json& m = doc["model"];
    reject_unknown(m, "model", {"beliefs", "payoff", "gamma", "lambda", "horizon", "supply", "allocations"});
    if (m.contains("beliefs")) {
      const Json& b = m["beliefs"];
      reject_unknown(b, "model.beliefs", {"type", "kappas", "mean", "sigma", "drifts", "vols"});
      read(b, "type", "model.beliefs", c.model.belief_type);
      read(b, "kappas", "model.beliefs", c.model.kappas);
      read(b, "mean", "model.beliefs", c.model.mean);
      read(b, "sigma", "model.beliefs", c.model.sigma);
      read(b, "drifts", "model.beliefs", c.model.drifts);
      read(b, "vols", "model.beliefs", c.model.vols);
    }
    if (m.contains("payoff")) {
      const Json& p = m["payoff"];
      reject_unknown(p, "model.payoff", {"type", "slope", "intercept", "value", "strike", "width"});
      read(p, "type", "model.payoff", c.model.payoff.type);
      read(p, "slope", "model.payoff", c.model.payoff.slope);
      read(p, "intercept", "model.payoff", c.model.payoff.intercept);
      read(p, "value", "model.payoff", c.model.payoff.value);
      read(p, "strike", "model.payoff", c.model.payoff.strike);
      read(p, "width", "model.payoff", c.model.payoff.width);
    }
    read(m, "gamma", "model", c.model.gamma);
    read(m, "lambda", "model", c.model.lambda);
    read(m, "horizon", "model", c.model.horizon);
    read(m, "supply", "model", c.model.supply);
    read(m, "allocations", "model", c.model.allocations);
  }
  if (doc.contains("numerics")) {
    const Json& n = doc["numerics"];
    reject_unknown(n, "numerics", {"x_min", "x_max", "nx", "nt", "ode_steps", "paths", "steps", "fk_paths",
                                   "directions", "refinement", "seed", "x_eval", "sabotage"});
    read(n, "x_min", "numerics", c.numerics.x_min);
    read(n, "x_max", "numerics", c.numerics.x_max);
    read(n, "nx", "numerics", c.numerics.nx);
    read(n, "nt", "numerics", c.numerics.nt);
    read(n, "ode_steps", "numerics", c.numerics.ode_steps);
    read(n, "paths", "numerics", c.numerics.paths);
    read(n, "steps", "numerics", c.numerics.steps);
    read(n, "fk_paths", "numerics", c.numerics.fk_paths);
    read(n, "directions", "numerics", c.numerics.directions);
    read(n, "refinement", "numerics", c.numerics.refinement);
    read(n, "seed", "numerics", c.numerics.seed);
    read(n, "x_eval", "numerics", c.numerics.x_eval);
    read(n, "sabotage", "numerics", c.numerics.sabotage);
  }
  if (doc.contains("output")) {
    const Json& o = doc["output"];
    reject_unknown(o, "output", {"directory", "formats", "debug_paths"});
    read(o, "directory", "output", c.output.directory);
    read(o, "formats", "output", c.output.formats);
    read(o, "debug_paths", "output", c.output.debug_paths);
  }
  if (doc.contains("calibration")) {
    const Json& k = doc["calibration"];
    reject_unknown(k, "calibration", {"csv", "max_lag", "spacing_dt", "kappa2"});
    read(k, "csv", "calibration", c.calibration.csv);
    read(k, "max_lag", "calibration", c.calibration.max_lag);
    read(k, "spacing_dt", "calibration", c.calibration.spacing_dt);
    read(k, "kappa2", "calibration", c.calibration.kappa2);
  }

  const auto& mt = c.model.belief_type;
  if (mt != "ou" && mt != "constant") throw InputError("config: model.beliefs.type must be 'ou' or 'constant'");
  const auto& pt = c.model.payoff.type;
  if (pt != "linear" && pt != "constant" && pt != "call" && pt != "smooth_call")
    throw InputError("config: model.payoff.type must be linear, constant, call or smooth_call");
  if (pt == "smooth_call" && !(c.model.payoff.width > 0.0)) throw InputError("config: payoff width must be positive");
  for (const auto& f : c.output.formats)
    if (f != "csv" && f != "svg" && f != "json") throw InputError("config: unknown output format '" + f + "'");
  if (doc.contains("model")) {
    if (c.agents() == 0) throw InputError("config: no agents in model.beliefs");
    if (!c.model.allocations.empty() && c.model.allocations.size() != c.agents())
      throw InputError("config: model.allocations must have one entry per agent");
    if (mt == "constant" && c.model.vols.size() != c.model.drifts.size())
      throw InputError("config: drifts and vols must have equal length");
    (void)c.kernel();
  }
  return c;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path);
  Json doc;
  try {
    doc = Json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return parse_config(std::move(doc));
}

/// 64-bit FNV-1a of the canonical document.
inline std::uint64_t config_hash(const Json& doc) {
  const std::string s = doc.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace illiquid_eq
