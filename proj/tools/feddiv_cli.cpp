#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "feddiv/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Federated learning with noisy labels: noise-filtered FedAvg simulator"};
  app.require_subcommand(1);

  std::string config_path, out_dir, log_path;
  std::vector<std::string> overrides;

  auto* run = app.add_subcommand("run", "Run one experiment and write run.jsonl and summary.json");
  run->add_option("config", config_path, "JSON config file")->required();
  run->add_option("--out", out_dir, "Output directory")->required();
  run->add_option("--set", overrides, "Override a config field, key=value (repeatable)");

  auto* compare = app.add_subcommand("compare", "Run all four variants on identical data and tabulate");
  compare->add_option("config", config_path, "JSON config file")->required();
  compare->add_option("--out", out_dir, "Output directory")->required();
  compare->add_option("--set", overrides, "Override a config field, key=value (repeatable)");

  auto* inspect = app.add_subcommand("inspect", "Print a per-round table from a run.jsonl");
  inspect->add_option("log", log_path, "Path to run.jsonl")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return feddiv::cli::run(config_path, out_dir, overrides, std::cout, std::cerr);
  if (compare->parsed()) return feddiv::cli::compare(config_path, out_dir, overrides, std::cout, std::cerr);
  return feddiv::cli::inspect(log_path, std::cout, std::cerr);
}
