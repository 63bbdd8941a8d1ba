#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "towerlimits/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"statistical-limit-law experiment runner for expanding maps, "
               "suspensions, and the planar periodic Lorentz gas"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  bool strict = false, as_json = false;
  int threads = 0;

  auto* run = app.add_subcommand("run", "run one experiment from a config file");
  run->add_option("config", config_path, "sectioned key=value config file")->required();
  run->add_flag("--strict", strict, "exit 1 when any acceptance verdict fails");
  run->add_option("--threads", threads, "replica worker threads (0 = hardware)");
  run->add_option("--out", out_dir, "output directory (overrides [run] out)");

  auto* list = app.add_subcommand("list", "print the experiment catalog");
  list->add_flag("--json", as_json, "machine-readable catalog");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    std::cout << towerlimits::list_experiments(as_json);
    return 0;
  }

  towerlimits::ExperimentConfig cfg;
  try {
    cfg = towerlimits::parse_config_file(config_path);
  } catch (const towerlimits::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  }
  if (threads > 0) cfg.threads = threads;
  if (!out_dir.empty()) cfg.out_dir = out_dir;

  try {
    const auto result = towerlimits::run_experiment(cfg, strict);
    std::cout << result.summary_json;
    return result.exit_code;
  } catch (const towerlimits::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "precondition failure: " << e.what() << "\n";
    return 3;
  }
}
