#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "mfc/config.hpp"
#include "mfc/problems.hpp"
#include "mfc/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"mean-field particle optimal control laboratory"};
  app.require_subcommand(1);

  std::string config_path;
  mfc::RunOptions opt;
  CLI::App* run = app.add_subcommand("run", "execute an experiment configuration");
  run->add_option("config", config_path, "path to the JSON experiment config")->required();
  run->add_option("--output-dir", opt.output_dir_override,
                  "override the output directory from the config");
  run->add_option("--threads", opt.threads, "worker threads for sweep studies")
      ->default_val(1);
  run->add_flag("--verbose", opt.verbose, "chatty progress output");

  CLI::App* list = app.add_subcommand("list-problems", "print the problem catalog");

  CLI11_PARSE(app, argc, argv);

  if (list->parsed()) {
    for (const auto& info : mfc::problem_catalog())
      std::cout << info.id << "  [" << info.family << "]\n    " << info.summary << "\n";
    return 0;
  }

  try {
    mfc::ExperimentConfig cfg = mfc::load_config(config_path);
    const int code = mfc::run_experiment(cfg, opt);
    if (code != 0)
      std::cerr << "run finished with solver failures (see manifest.json)\n";
    return code;
  } catch (const mfc::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
