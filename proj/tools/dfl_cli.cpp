// Command-line front end: run, plot, validate.

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <iostream>

#include "dfl/config.hpp"
#include "dfl/plot.hpp"
#include "dfl/runner.hpp"

namespace {

enum Exit { kOk = 0, kFailure = 1, kBadConfig = 2, kRefused = 3 };

int report_config_error(const dfl::ConfigError& e) {
  std::cerr << "error: invalid configuration\n";
  for (const auto& line : e.errors()) std::cerr << "  " << line << '\n';
  return kBadConfig;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized federated learning simulator"};
  app.require_subcommand(1);

  std::string run_config;
  std::string run_out;
  bool force = false;
  int threads = 0;
  std::vector<std::string> overrides;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("config", run_config, "Experiment YAML file")->required()->check(CLI::ExistingFile);
  run->add_option("--out", run_out, "Output directory (default: output_dir from the config)");
  run->add_flag("--force", force, "Overwrite results of an earlier run in the output directory");
  run->add_option("--threads", threads, "Worker threads (default: threads from the config)")
      ->check(CLI::PositiveNumber);
  run->add_option("--set", overrides, "Override a config value, e.g. --set attack.pnr=0.8 (repeatable)");

  std::vector<std::string> summaries;
  std::string plot_out;
  auto* plot = app.add_subcommand("plot", "Render SVG charts from summary.json files");
  plot->add_option("summaries", summaries, "summary.json files")->required()->check(CLI::ExistingFile);
  plot->add_option("--out", plot_out, "Directory for the SVG files")->required();

  std::string validate_config;
  auto* validate = app.add_subcommand("validate", "Check a config file and print its full form");
  validate->add_option("config", validate_config, "Experiment YAML file")->required()->check(CLI::ExistingFile);
  validate->add_option("--set", overrides, "Override a config value (repeatable)");

  CLI11_PARSE(app, argc, argv);
  spdlog::set_pattern("[%l] %v");

  try {
    if (*run) {
      const auto cfg = dfl::parse_config(run_config, overrides);
      dfl::RunnerOptions options;
      options.force = force;
      if (threads > 0) options.threads = threads;
      const std::filesystem::path out = run_out.empty() ? cfg.output_dir : std::filesystem::path(run_out);
      dfl::run(cfg, out, options);
      std::cout << "wrote " << out.string() << '\n';
    } else if (*plot) {
      std::vector<std::filesystem::path> paths(summaries.begin(), summaries.end());
      for (const auto& p : dfl::plot(paths, plot_out)) std::cout << p.string() << '\n';
    } else if (*validate) {
      std::cout << dfl::dump_config(dfl::parse_config(validate_config, overrides));
    }
  } catch (const dfl::ConfigError& e) {
    return report_config_error(e);
  } catch (const dfl::OutputExists& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRefused;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kOk;
}
