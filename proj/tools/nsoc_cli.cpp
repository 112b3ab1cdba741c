// Command-line front end for batch experiments.
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nsoc/errors.hpp"
#include "nsoc/experiment.hpp"

namespace {

struct Common {
  std::string config;
  std::string out = "nsoc_out";
  long long seed = -1;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Flat key = value config file");
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--seed", c.seed, "Seed for all sampled quantities (overrides the config)");
  sub->add_option("--set", c.overrides, "Extra key=value assignments applied after the config file");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensitivity analysis and optimal control for -Δy + sgn(y)|y|^α = u"};
  app.require_subcommand(1);
  Common common;
  std::string study_kind;

  for (const char* name : {"solve", "differentiate", "optimize", "verify"}) {
    add_common(app.add_subcommand(name, std::string("Run ") + name), common);
  }
  auto* study = app.add_subcommand("study", "Parameter sweeps");
  add_common(study, common);
  study->add_option("kind", study_kind, "frechet | deadzone | convergence")
      ->required()
      ->check(CLI::IsMember({"frechet", "deadzone", "convergence"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(nsoc::ExitCode::config);
  }

  nsoc::ExperimentConfig cfg;
  try {
    if (!common.config.empty()) cfg = nsoc::load_config(common.config);
    for (const auto& kv : common.overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw nsoc::ConfigError("--set expects key=value, got '" + kv + "'");
      nsoc::set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
  } catch (const nsoc::IoError& e) {
    std::cerr << "nsoc: i/o error: " << e.what() << '\n';
    return static_cast<int>(nsoc::ExitCode::io);
  } catch (const nsoc::ConfigError& e) {
    std::cerr << "nsoc: config error: " << e.what() << '\n';
    return static_cast<int>(nsoc::ExitCode::config);
  }
  cfg.command = app.get_subcommands().front()->get_name();
  if (cfg.command == "study") cfg.study = study_kind;
  if (common.seed >= 0) cfg.seed = static_cast<std::uint64_t>(common.seed);

  const auto result = nsoc::run_experiment(cfg, common.out);
  if (result.report.find("status")) result.report.write(std::cout);
  if (result.code != nsoc::ExitCode::ok) std::cerr << "nsoc: " << result.message << '\n';
  return static_cast<int>(result.code);
}
