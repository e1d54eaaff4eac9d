// Copyright (c) 2026 rcss authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rcss/config.hpp"
#include "rcss/runner.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitConfig = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "rcss - block-wise continuous speech separation on synthetic sessions"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::string> overrides;
  app.add_option("-c,--config", config_path, "run configuration JSON")
      ->required();
  app.add_option("--set", overrides,
                 "override a config field, e.g. --set /window/channels=3");

  auto* generate = app.add_subcommand("generate", "synthesize the sessions");
  auto* separate = app.add_subcommand("separate", "run the block pipeline");
  auto* evaluate = app.add_subcommand("evaluate", "score separated sessions");
  std::string compare_dir;
  evaluate->add_option("--compare", compare_dir,
                       "other run directory to diff reports against");

  auto* sweep = app.add_subcommand("sweep", "re-run over parameter values");
  std::string parameter;
  std::vector<std::string> values;
  sweep->add_option("--param", parameter, "config knob or /json/pointer")
      ->required();
  sweep->add_option("--values", values, "JSON literals, one run each")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n";
    return kExitConfig;
  }

  try {
    nlohmann::json base = rcss::load_config_json(config_path);
    for (const auto& assignment : overrides) {
      rcss::apply_override(base, assignment);
    }
    if (sweep->parsed()) {
      rcss::cmd_sweep(base, parameter, values);
      return kExitOk;
    }
    const rcss::RunConfig cfg = rcss::parse_run_config(base);
    if (generate->parsed()) {
      rcss::cmd_generate(cfg);
    } else if (separate->parsed()) {
      rcss::cmd_separate(cfg);
    } else if (evaluate->parsed()) {
      rcss::cmd_evaluate(cfg, compare_dir);
    }
    return kExitOk;
  } catch (const rcss::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInternal;
  }
}
