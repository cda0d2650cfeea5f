#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "synthlab/harness.hpp"

int main(int argc, char** argv) {
  CLI::App app{"synthlab: synthetic environments, reward networks and one-shot world models"};
  app.require_subcommand(1);

  std::string config_path;
  int workers = 1;
  std::optional<std::uint64_t> seed_override;
  auto* run = app.add_subcommand("run", "Execute the run described by a JSON config");
  run->add_option("--config", config_path, "Path to the run config")->required();
  run->add_option("--workers", workers, "Parallel candidate evaluations (meta-training)")->check(CLI::PositiveNumber);
  run->add_option("--seed-override", seed_override, "Replace the config's seed list with this single seed");

  std::string run_dir;
  auto* report = app.add_subcommand("report", "Summarise a finished run directory");
  report->add_option("--run-dir", run_dir, "Directory written by `synthlab run`")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (run->parsed()) return synthlab::run_main(config_path, workers, seed_override, std::cout, std::cerr);
  return synthlab::report_main(run_dir, std::cout, std::cerr);
}
