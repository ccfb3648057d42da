#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include <illiquid_eq/commands.hpp>

namespace ie = illiquid_eq;

int main(int argc, char** argv) {
  CLI::App app{"Equilibrium prices under heterogeneous beliefs with holding and trading costs", "illiquid-eq"};
  std::string command, config_path, out_dir;
  std::vector<std::string> overrides;
  std::uint64_t seed = 0;
  app.add_option("command", command, "ou-solve | pde-solve | asymptotics | simulate | verify | calibrate | figures")
      ->required();
  app.add_option("--config", config_path, "run configuration (JSON)")->required();
  app.add_option("--set", overrides, "override a config key, e.g. numerics.nx=401")->expected(1)
      ->multi_option_policy(CLI::MultiOptionPolicy::TakeAll);
  app.add_option("--out", out_dir, "output directory (overrides output.directory)");
  auto* seed_opt = app.add_option("--seed", seed, "random seed (overrides numerics.seed)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? ie::exit_ok : ie::exit_input_error;
  }

  using Cmd = int (*)(const ie::RunConfig&, std::ostream&);
  const std::map<std::string, Cmd> commands{
      {"ou-solve", ie::cmd_ou_solve},   {"pde-solve", ie::cmd_pde_solve}, {"asymptotics", ie::cmd_asymptotics},
      {"simulate", ie::cmd_simulate},   {"verify", ie::cmd_verify},       {"calibrate", ie::cmd_calibrate},
      {"figures", ie::cmd_figures}};
  const auto it = commands.find(command);
  if (it == commands.end()) {
    std::cerr << "unknown command '" << command << "'\n" << app.help();
    return ie::exit_input_error;
  }
  try {
    if (!out_dir.empty()) overrides.push_back("output.directory=" + ie::Json(out_dir).dump());
    if (seed_opt->count()) overrides.push_back("numerics.seed=" + std::to_string(seed));
    const ie::RunConfig cfg = ie::load_config(config_path, overrides);
    return it->second(cfg, std::cout);
  } catch (const ie::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return ie::exit_input_error;
  } catch (const ie::ConvergenceError& e) {
    std::cerr << "numerical error: " << e.what() << " (last changes:";
    for (double r : e.residual_history()) std::cerr << " " << r;
    std::cerr << ")\n";
    return ie::exit_verification_failed;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ie::exit_verification_failed;
  }
}
