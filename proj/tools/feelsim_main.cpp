#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "feelsim/cli_io.hpp"

namespace {

// Exit codes: 0 ok, 1 config error, 2 runtime error.
constexpr int kConfigError = 1;
constexpr int kRuntimeError = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Federated edge learning simulator with data-aware splitting and "
               "energy-aware node selection"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::vector<std::string> overrides;
  bool dump_partitions = false;

  CLI::App* run_cmd = app.add_subcommand("run", "Run the configured scheme(s) and emit CSV results");
  run_cmd->add_option("--config", config_path, "Config file (INI sections or run_meta.json)")
      ->required();
  run_cmd->add_option("--set", overrides, "Override, e.g. --set training.learning_rate=0.01");
  run_cmd->add_option("--out", out_dir, "Output directory")->required();
  run_cmd->add_flag("--dump-partitions", dump_partitions,
                    "Also write per-device partitions to partitions.jsonl");

  CLI::App* bench_cmd =
      app.add_subcommand("split-bench", "Benchmark greedy vs random vs exact splitting");
  bench_cmd->add_option("--config", config_path, "Config file")->required();
  bench_cmd->add_option("--set", overrides, "Override, e.g. --set bench.instances=10");
  bench_cmd->add_option("--out", out_dir, "Output directory")->required();

  CLI::App* validate_cmd =
      app.add_subcommand("validate-config", "Parse and validate a config, print the resolved form");
  validate_cmd->add_option("--config", config_path, "Config file")->required();
  validate_cmd->add_option("--set", overrides, "Override to apply before validation");

  CLI11_PARSE(app, argc, argv);

  try {
    const feelsim::LoadedConfig loaded = feelsim::parse_config(config_path, overrides);
    if (validate_cmd->parsed()) {
      std::cout << feelsim::resolved_config(loaded) << "\n";
      std::cerr << "config ok\n";
      return 0;
    }
    if (bench_cmd->parsed()) {
      feelsim::split_bench(loaded.cfg, out_dir);
      std::cout << "wrote " << out_dir << "/split_bench.csv\n";
      return 0;
    }
    const auto reports = feelsim::run_and_emit(loaded, out_dir, dump_partitions);
    for (const auto& [scheme, report] : reports) {
      const auto& last = report.per_round.back();
      std::cout << feelsim::scheme_name(scheme) << ": final accuracy "
                << feelsim::format_double(last.accuracy_mean) << " (std "
                << feelsim::format_double(last.accuracy_std) << "), cumulative energy "
                << feelsim::format_double(last.cumulative_energy_mean) << " J over "
                << report.per_round.size() << " rounds\n";
    }
    std::cout << "results in " << out_dir << "\n";
    return 0;
  } catch (const feelsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}
