#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "asymptotics.hpp"
#include "calibrate.hpp"
#include "config.hpp"
#include "io.hpp"
#include "ou.hpp"
#include "pde.hpp"
#include "portfolio.hpp"
#include "simulate.hpp"
#include "svg.hpp"

namespace illiquid_eq {

/// Process exit codes shared by all commands.
enum ExitCode : int { exit_ok = 0, exit_verification_failed = 1, exit_input_error = 2 };

namespace detail {

inline std::filesystem::path prepare_out(const RunConfig& c) {
  std::filesystem::path dir(c.output.directory);
  std::filesystem::create_directories(dir);
  return dir;
}

inline bool wants(const RunConfig& c, const std::string& fmt) {
  for (const auto& f : c.output.formats)
    if (f == fmt) return true;
  return false;
}

inline std::vector<double> mesh(double T, std::size_t levels) {
  std::vector<double> t(levels);
  for (std::size_t n = 0; n < levels; ++n)
    t[n] = n + 1 == levels ? T : T * static_cast<double>(n) / static_cast<double>(levels - 1);
  return t;
}

inline void report_line(std::ostream& log, bool ok, const std::string& name, const std::string& detail) {
  log << (ok ? "PASS " : "FAIL ") << name << ": " << detail << "\n";
}

inline void write_json(const std::filesystem::path& path, const Json& doc) {
  std::ofstream o(path, std::ios::binary);
  if (!o) throw InputError("cannot write " + path.string());
  o << doc.dump(2) << "\n";
}

/// Equilibrium access for the configured market: OU closed system when possible, PDE grid otherwise.
struct ViewHolder {
  std::unique_ptr<EquilibriumSolution> solution;
  std::unique_ptr<EquilibriumView> view;
};

inline ViewHolder make_view(const RunConfig& c) {
  ViewHolder h;
  const CostKernel k = c.kernel();
  if (c.model.belief_type == "ou" && c.model.supply == 0.0 && c.model.payoff.type == "linear" &&
      c.model.payoff.slope == 1.0 && c.model.payoff.intercept == 0.0) {
    const OuModel ou = c.ou();
    h.view = std::make_unique<OuEquilibriumView>(ou, solve_ab(ou, k, c.numerics.ode_steps));
  } else {
    h.solution = std::make_unique<EquilibriumSolution>(solve_equilibrium(c.spec(), c.beliefs(), c.grid()));
    h.view = std::make_unique<GridEquilibriumView>(*h.solution, c.beliefs());
  }
  return h;
}

}  // namespace detail

/// A/B curves, price at x_eval and the volatility envelopes.
inline int cmd_ou_solve(const RunConfig& c, std::ostream& log) {
  const OuModel ou = c.ou();
  const AbSolution ab = solve_ab(ou, c.kernel(), c.numerics.ode_steps);
  const auto dir = detail::prepare_out(c);
  const double x = c.numerics.x_eval;
  const auto times = detail::mesh(ou.horizon, c.numerics.nt);
  std::vector<double> bb, env_f, env_r, px;
  {
    CsvWriter w(dir / "ou_curves.csv");
    std::vector<std::string> head{"t"};
    for (std::size_t i = 0; i < ou.agents(); ++i) head.push_back("A" + std::to_string(i + 1));
    for (std::size_t i = 0; i < ou.agents(); ++i) head.push_back("B" + std::to_string(i + 1));
    for (const char* s : {"B_bar", "envelope_frictionless", "envelope_risk_neutral", "price_at_x"}) head.emplace_back(s);
    w.row(head);
    for (double t : times) {
      std::vector<double> r{t};
      for (std::size_t i = 0; i < ou.agents(); ++i) r.push_back(ab.A(i, t));
      for (std::size_t i = 0; i < ou.agents(); ++i) r.push_back(ab.B(i, t));
      const auto vc = volatility_curve(ou, ab, t);
      r.insert(r.end(), {vc.b_bar, vc.frictionless, vc.risk_neutral, price(ou, ab, t, x)});
      bb.push_back(vc.b_bar);
      env_f.push_back(vc.frictionless);
      env_r.push_back(vc.risk_neutral);
      px.push_back(r.back());
      w.row(r);
    }
  }
  if (detail::wants(c, "svg"))
    write_svg(dir / "ou_volatility.svg",
              {"Price loading on the state", "t", "B_bar(t)",
               {{"both costs", times, bb, "", "#1f3b73"},
                {"lambda = 0", times, env_f, "6 4", "#b03a2e"},
                {"gamma = 0", times, env_r, "1 3", "#1e8449"}}});
  const auto v0 = volatility_curve(ou, ab, 0.0);
  log << "B_bar(0) = " << format_number(v0.b_bar) << " envelope [" << format_number(v0.frictionless) << ", "
      << format_number(v0.risk_neutral) << "]\n";
  log << "price(0, " << format_number(x) << ") = " << format_number(price(ou, ab, 0.0, x)) << "\n";
  return exit_ok;
}

/// Equilibrium surface CSV plus binary cache.
inline int cmd_pde_solve(const RunConfig& c, std::ostream& log) {
  const Grid1D g = c.grid();
  const BeliefSet beliefs = c.beliefs();
  EquilibriumSolution sol = solve_equilibrium(c.spec(), beliefs, g);
  sol.spec_hash = config_hash(c.source);
  const auto dir = detail::prepare_out(c);
  if (detail::wants(c, "csv")) write_solution_csv(dir / "equilibrium.csv", sol);
  write_cache(dir / "equilibrium.cache", sol);
  const double x = c.numerics.x_eval;
  log << "v(0, " << format_number(x) << ") = " << format_number(interp_bilinear(sol.v, g, sol.horizon, 0.0, x))
      << "  (max Picard iterations " << sol.info.max_picard_iterations << ")\n";
  if (beliefs.ou() && c.model.supply == 0.0 && c.model.payoff.type == "linear" && c.model.payoff.slope == 1.0 &&
      c.model.payoff.intercept == 0.0) {
    const OuModel ou = c.ou();
    const AbSolution ab = solve_ab(ou, c.kernel(), c.numerics.ode_steps);
    const double lo = ou.mean_x - 3.0 * ou.stationary_sd(), hi = ou.mean_x + 3.0 * ou.stationary_sd();
    double worst = 0.0;
    for (std::size_t n = 0; n < g.nt; ++n)
      for (std::size_t j = 0; j < g.nx; ++j)
        if (g.x(j) >= lo && g.x(j) <= hi)
          worst = std::max(worst, std::fabs(sol.v(n, j) - price(ou, ab, g.t(n, sol.horizon), g.x(j))));
    log << "max |v - ou price| on interior box = " << format_number(worst) << "\n";
  }
  return exit_ok;
}

/// Correction surfaces and small-cost sweep tables.
inline int cmd_asymptotics(const RunConfig& c, std::ostream& log) {
  const Grid1D g = c.grid();
  const BeliefSet beliefs = c.beliefs();
  const MarketSpec spec = c.spec();
  const auto dir = detail::prepare_out(c);
  const double x = c.numerics.x_eval;
  const double gamma = c.model.gamma, lambda = c.model.lambda;

  TcOptions to;
  to.refinement = c.numerics.refinement;
  const CorrectionSurface tc = tc_correction(spec, beliefs, g, to);
  const CorrectionSurface hc = hc_correction(spec, beliefs, g);
  if (detail::wants(c, "csv")) {
    write_surface_csv(dir / "tc_correction.csv", tc);
    write_surface_csv(dir / "hc_correction.csv", hc);
  }
  log << "sqrt(lambda) v*_tc(0, " << format_number(x) << ") = " << format_number(std::sqrt(lambda) * tc.at(0.0, x))
      << "\n";
  log << "gamma v*_hc(0, " << format_number(x) << ") = " << format_number(gamma * hc.at(0.0, x)) << "\n";

  // Sweeps: the OU system when available, the PDE otherwise.
  const bool use_ou = beliefs.ou() && c.model.supply == 0.0 && c.model.payoff.type == "linear" &&
                      c.model.payoff.slope == 1.0 && c.model.payoff.intercept == 0.0;
  auto priced = [&](double gm, double lm) {
    const CostKernel k = c.kernel_with(gm, lm);
    if (use_ou) {
      const OuModel ou = c.ou();
      return price(ou, solve_ab(ou, k, c.numerics.ode_steps), 0.0, x);
    }
    const auto sol = solve_equilibrium(c.spec_with(k), beliefs, g);
    return interp_bilinear(sol.v, g, sol.horizon, 0.0, x);
  };
  const double v_fl = use_ou ? frictionless_price(c.ou(), 0.0, x)
                             : interp_bilinear(solve_frictionless(spec, beliefs, g), g, spec.horizon(), 0.0, x);
  const double v_rn = use_ou ? risk_neutral_price(c.ou(), 0.0, x).price
                             : interp_bilinear(solve_risk_neutral(spec, beliefs, g).price, g, spec.horizon(), 0.0, x);
  const double tc_ref = tc.at(0.0, x), hc_ref = hc.at(0.0, x);
  {
    CsvWriter w(dir / "lambda_sweep.csv");
    w.row(std::vector<std::string>{"lambda", "price", "scaled_gap", "correction", "relative_gap"});
    log << "lambda sweep (gamma fixed):\n";
    for (int k = 0; k <= 4; ++k) {
      const double lm = 0.1 * gamma * std::pow(4.0, -k);
      const double v = priced(gamma, lm);
      const double s = (v - v_fl) / std::sqrt(lm);
      const double rel = std::fabs(s / tc_ref - 1.0);
      w.row(std::vector<double>{lm, v, s, tc_ref, rel});
      log << "  lambda=" << format_number(lm) << " (v-v0)/sqrt(lambda)=" << format_number(s)
          << " rel.gap=" << format_fixed(rel, 5) << "\n";
    }
  }
  {
    CsvWriter w(dir / "gamma_sweep.csv");
    w.row(std::vector<std::string>{"gamma", "price", "scaled_gap", "correction", "relative_gap"});
    log << "gamma sweep (lambda fixed):\n";
    for (int k = 0; k <= 4; ++k) {
      const double gm = 0.01 * lambda * std::pow(2.0, -k);
      const double v = priced(gm, lambda);
      const double s = (v - v_rn) / gm;
      const double rel = std::fabs(s / hc_ref - 1.0);
      w.row(std::vector<double>{gm, v, s, hc_ref, rel});
      log << "  gamma=" << format_number(gm) << " (v-v0)/gamma=" << format_number(s)
          << " rel.gap=" << format_fixed(rel, 5) << "\n";
    }
  }
  return exit_ok;
}

/// Path statistics at the horizon under each agent's measure and the averaged one.
inline int cmd_simulate(const RunConfig& c, std::ostream& log) {
  const BeliefSet beliefs = c.beliefs();
  const auto dir = detail::prepare_out(c);
  const std::size_t levels = c.numerics.steps + 1;
  CsvWriter w(dir / "simulation_summary.csv");
  w.row(std::vector<std::string>{"measure", "mean_T", "se_mean_T", "variance_T"});
  std::vector<Measure> measures;
  for (std::size_t i = 0; i < beliefs.size(); ++i) measures.push_back(Measure::of_agent(i));
  measures.push_back(Measure::average());
  for (std::size_t m = 0; m < measures.size(); ++m) {
    const auto batch = simulate(beliefs, measures[m], c.numerics.x_eval, 0.0, c.model.horizon, levels,
                                c.numerics.paths, c.numerics.seed + m);
    std::vector<double> end(batch.npaths);
    for (std::size_t p = 0; p < batch.npaths; ++p) end[p] = batch(p, levels - 1);
    const auto e = mean_and_se(end);
    const double var = e.se * e.se * static_cast<double>(e.samples);
    w.row(std::vector<std::string>{measures[m].label(), format_number(e.mean), format_number(e.se),
                                   format_number(var)});
    log << measures[m].label() << ": E[X_T] = " << format_number(e.mean) << " +- " << format_number(e.se)
        << ", Var[X_T] = " << format_number(var) << "\n";
    if (c.output.debug_paths) {
      CsvWriter pw(dir / ("paths_" + std::to_string(m) + ".csv"));
      pw.row(std::vector<std::string>{"path", "t", "x"});
      for (std::size_t p = 0; p < std::min<std::size_t>(batch.npaths, 100); ++p)
        for (std::size_t n = 0; n < levels; ++n)
          pw.row(std::vector<double>{static_cast<double>(p), batch.t(n), batch(p, n)});
    }
  }
  return exit_ok;
}

/// Clearing, optimality, objective perturbation and Feynman-Kac checks; exit 1 on any failure.
inline int cmd_verify(const RunConfig& c, std::ostream& log) {
  const BeliefSet beliefs = c.beliefs();
  const MarketSpec spec = c.spec();
  const CostKernel kernel = spec.kernel;
  if (kernel.kind() != CostKernel::Kind::regular) throw InputError("verify: needs gamma > 0 and lambda > 0");
  const auto holder = detail::make_view(c);
  const EquilibriumView& view = *holder.view;
  const auto dir = detail::prepare_out(c);
  const double T = c.model.horizon, x0 = c.numerics.x_eval;
  const std::uint64_t seed = c.numerics.seed;
  Json report;
  bool all_ok = true;

  // Market clearing along shared state paths, at two step sizes.
  {
    double r[2] = {0.0, 0.0}, scale = 1.0;
    for (int s = 0; s < 2; ++s) {
      const std::size_t levels = c.numerics.steps * (s + 1) + 1;
      const auto batch = simulate(beliefs, Measure::average(), x0, 0.0, T, levels, 100, seed);
      for (std::size_t p = 0; p < batch.npaths; ++p) {
        const auto sp = integrate_strategies(view, spec, batch, p);
        r[s] = std::max(r[s], clearing_residual(sp, spec.supply));
        for (const auto& ph : sp.positions)
          for (double v : ph) scale = std::max(scale, std::fabs(v));
      }
    }
    // Accumulated rounding of the refined Euler sum; below it step halving cannot be observed.
    const double floor = static_cast<double>(2 * c.numerics.steps + 1) * std::numeric_limits<double>::epsilon() * scale;
    const bool small = r[0] <= 1e-6;
    const bool rate = r[1] <= 0.6 * r[0] || std::max(r[0], r[1]) <= floor;
    all_ok &= small && rate;
    report["clearing"] = {{"residual", r[0]}, {"residual_refined", r[1]}, {"rounding_floor", floor}};
    detail::report_line(log, small && rate, "market clearing",
                        "max residual " + format_number(r[0]) + " at " + std::to_string(c.numerics.steps) +
                            " steps, " + format_number(r[1]) + " at twice the steps");
  }

  const std::size_t levels = c.numerics.steps + 1;
  const double rate_scale = c.numerics.sabotage ? 1.5 : 1.0;
  for (std::size_t i = 0; i < beliefs.size(); ++i) {
    const std::string tag = "agent " + std::to_string(i + 1);
    const auto batch = simulate(beliefs, Measure::of_agent(i), x0, 0.0, T, levels, c.numerics.paths, seed + 1 + i);
    const auto dirs = test_directions(c.numerics.directions, batch, seed);
    const auto g = gateaux_residual(i, batch, view, kernel, spec.allocations[i], dirs, rate_scale);
    const bool g_ok = g.residual <= 3.0;
    all_ok &= g_ok;
    report["gateaux"][tag] = {{"residual", g.residual}, {"rate_scale", rate_scale}};
    detail::report_line(log, g_ok, "optimality " + tag,
                        "Gateaux residual " + format_fixed(g.residual, 3) + " SE over " +
                            std::to_string(dirs.size()) + " directions" + (c.numerics.sabotage ? " (sabotaged)" : ""));

    // Perturbations sized to the strategy: s = mean mesh-L2 norm of the optimal rate.
    double s = 0.0;
    const double h = batch.dt();
    for (std::size_t p = 0; p < batch.npaths; ++p) {
      const auto a = integrate_agent(view, kernel, i, spec.allocations[i], batch, p);
      double nrm = 0.0;
      for (std::size_t n = 0; n + 1 < levels; ++n) nrm += h * a.rate[n] * a.rate[n];
      s += std::sqrt(nrm);
    }
    s = s > 0.0 ? s / static_cast<double>(batch.npaths) : 1.0;
    std::vector<Perturbation> pert;
    for (const auto& d : dirs) {
      std::vector<double> r(d);
      for (double& v : r) v *= s;
      pert.push_back({r, 0.1});
      pert.push_back({std::move(r), 0.2});
    }
    ObjectiveOptions oo;
    oo.rate_scale = rate_scale;
    const auto obj = objective(i, batch, view, kernel, spec.allocations[i], pert, oo);
    bool conc = true, quad = true;
    double worst_dev = 0.0;
    for (std::size_t d = 0; d < dirs.size(); ++d) {
      const auto& g1 = obj.gap[2 * d];
      const auto& g2 = obj.gap[2 * d + 1];
      conc &= g1.mean >= -3.0 * g1.se;
      const double dev = std::fabs(g2.mean / (4.0 * g1.mean) - 1.0);
      worst_dev = std::max(worst_dev, dev);
    }
    quad = worst_dev <= 0.2;
    all_ok &= conc && quad;
    report["objective"][tag] = {{"J", obj.value.mean},
                                {"J_se", obj.value.se},
                                {"direction_scale", s},
                                {"quadratic_gap_worst_deviation", worst_dev}};
    detail::report_line(log, conc, "objective concavity " + tag,
                        "J(phi*) = " + format_number(obj.value.mean) + " +- " + format_number(obj.value.se) +
                            ", no perturbation improves by more than 3 SE");
    detail::report_line(log, quad, "quadratic gap " + tag,
                        "worst |gap(2e)/(4 gap(e)) - 1| = " + format_fixed(worst_dev, 4));

    // Feynman-Kac representation of v_i at (0, x0).
    SurfaceFn surf{[&](double t, double x) { return view.price(t, x); }, view.domain()};
    if (!std::isfinite(surf.domain->lo)) surf.domain.reset();
    const auto fk = feynman_kac_vi(beliefs, i, surf, kernel, spec.payoff, 0.0, x0, c.numerics.nt,
                                   c.numerics.fk_paths, seed + 100 + i);
    const double target = view.agent_value(i, 0.0, x0);
    const bool fk_ok = std::fabs(fk.mean - target) <= 3.0 * fk.se;
    all_ok &= fk_ok;
    report["feynman_kac"][tag] = {{"estimate", fk.mean}, {"se", fk.se}, {"solver", target}};
    detail::report_line(log, fk_ok, "Feynman-Kac " + tag,
                        "estimate " + format_number(fk.mean) + " +- " + format_number(fk.se) + " vs solver " +
                            format_number(target));
  }
  report["passed"] = all_ok;
  detail::write_json(dir / "verify_report.json", report);
  return all_ok ? exit_ok : exit_verification_failed;
}

/// OU estimation from a two-column CSV; optional belief split.
inline int cmd_calibrate(const RunConfig& c, std::ostream& log) {
  if (c.calibration.csv.empty()) throw InputError("calibrate: set calibration.csv");
  const auto in = ingest_csv(c.calibration.csv);
  EstimateOptions eo;
  eo.max_lag = c.calibration.max_lag;
  eo.spacing_dt = c.calibration.spacing_dt;
  const auto e = estimate_ou(in.series, eo);
  Json rep = {{"observations", e.observations},
              {"dropped_rows", in.dropped},
              {"kappa_bar", e.kappa_bar},
              {"mean_X", e.mean_x},
              {"sigma", e.sigma},
              {"r_squared", e.r_squared},
              {"lag_window", e.lag_window},
              {"max_lag", eo.max_lag},
              {"spacing_dt", eo.spacing_dt},
              {"regression", "log acf on lag, no intercept"}};
  if (c.calibration.kappa2) {
    const auto [k1, k2] = split_beliefs(e.kappa_bar, *c.calibration.kappa2);
    rep["kappa1"] = k1;
    rep["kappa2"] = k2;
  }
  const auto dir = detail::prepare_out(c);
  detail::write_json(dir / "calibration.json", rep);
  log << "observations " << e.observations << " (dropped " << in.dropped << "), lags 1.." << e.lag_window << "\n";
  log << "kappa_bar = " << format_number(e.kappa_bar) << ", mean_X = " << format_number(e.mean_x)
      << ", sigma = " << format_number(e.sigma) << ", R^2 = " << format_fixed(e.r_squared, 4) << "\n";
  return exit_ok;
}

/// Price and volatility curves against t (both costs, gamma = 0, lambda = 0) and the expansion errors.
inline int cmd_figures(const RunConfig& c, std::ostream& log) {
  const OuModel ou = c.ou();
  const CostKernel k = c.kernel();
  const AbSolution ab = solve_ab(ou, k, c.numerics.ode_steps);
  const auto dir = detail::prepare_out(c);
  const double x = c.numerics.x_eval;
  const auto times = detail::mesh(ou.horizon, c.numerics.nt);
  std::vector<double> pb, pr, pf, vb, vr, vf, e0, e1;
  for (double t : times) {
    pb.push_back(price(ou, ab, t, x));
    pr.push_back(risk_neutral_price(ou, t, x).price);
    pf.push_back(frictionless_price(ou, t, x));
    const auto vc = volatility_curve(ou, ab, t);
    vb.push_back(vc.b_bar);
    vr.push_back(vc.risk_neutral);
    vf.push_back(vc.frictionless);
    e0.push_back(pr.back() - pb.back());
    e1.push_back(pr.back() + k.gamma() * hc_correction_closed(ou, k.lambda(), t, x) - pb.back());
  }
  auto table = [&](const char* name, std::vector<std::string> head, std::vector<const std::vector<double>*> cols) {
    CsvWriter w(dir / name);
    w.row(head);
    for (std::size_t n = 0; n < times.size(); ++n) {
      std::vector<double> r{times[n]};
      for (const auto* col : cols) r.push_back((*col)[n]);
      w.row(r);
    }
  };
  table("figure1_price.csv", {"t", "both_costs", "gamma_zero", "lambda_zero"}, {&pb, &pr, &pf});
  table("figure1_volatility.csv", {"t", "both_costs", "gamma_zero", "lambda_zero"}, {&vb, &vr, &vf});
  table("figure2_error_uncorrected.csv", {"t", "error"}, {&e0});
  table("figure2_error_corrected.csv", {"t", "error"}, {&e1});
  const std::string xs = format_number(x);
  write_svg(dir / "figure1_price.svg", {"Equilibrium price at x = " + xs, "t", "price",
                                        {{"both costs", times, pb, "", "#1f3b73"},
                                         {"gamma = 0", times, pr, "1 3", "#1e8449"},
                                         {"lambda = 0", times, pf, "6 4", "#b03a2e"}}});
  write_svg(dir / "figure1_volatility.svg", {"Price volatility loading", "t", "B_bar(t)",
                                             {{"both costs", times, vb, "", "#1f3b73"},
                                              {"gamma = 0", times, vr, "1 3", "#1e8449"},
                                              {"lambda = 0", times, vf, "6 4", "#b03a2e"}}});
  write_svg(dir / "figure2_error_uncorrected.svg",
            {"Risk-neutral approximation error at x = " + xs, "t", "v0 - v", {{"v0 - v", times, e0, "", "#1f3b73"}}});
  write_svg(dir / "figure2_error_corrected.svg", {"Corrected approximation error at x = " + xs, "t",
                                                  "v0 + gamma v* - v",
                                                  {{"v0 + gamma v* - v", times, e1, "", "#1f3b73"}}});

  bool between = true;
  for (std::size_t n = 0; n < times.size(); ++n) {
    const double lo = std::min(pr[n], pf[n]) - 1e-12, hi = std::max(pr[n], pf[n]) + 1e-12;
    between &= pb[n] >= lo && pb[n] <= hi;
  }
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t n = 0; n < times.size(); ++n) {
    m0 = std::max(m0, std::fabs(e0[n]));
    m1 = std::max(m1, std::fabs(e1[n]));
  }
  detail::report_line(log, between, "figure 1 ordering", "both-costs price between the limiting curves");
  detail::report_line(log, m1 <= 0.2 * m0, "figure 2 improvement",
                      "max error " + format_number(m0) + " uncorrected, " + format_number(m1) + " corrected (ratio " +
                          format_fixed(m0 > 0.0 ? m1 / m0 : 0.0, 4) + ")");
  return exit_ok;
}

}  // namespace illiquid_eq
