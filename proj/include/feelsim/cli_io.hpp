#ifndef FEELSIM_CLI_IO_HPP
#define FEELSIM_CLI_IO_HPP

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "feelsim/orchestrator.hpp"

namespace feelsim {

// Bad config file, bad override, or violated invariant; CLI exit code 1.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct LoadedConfig {
  RunConfig cfg;
  bool all_schemes = false;  // scheme = all: run proposed + both baselines
};

// Parses an INI-style sectioned config ([section] / key = value / # comments)
// or a run_meta.json produced by emit_results. Dotted-path overrides
// ("training.learning_rate=0.01") apply last. Unknown keys are errors.
LoadedConfig parse_config(const std::string& path, const std::vector<std::string>& overrides);
LoadedConfig parse_config_text(const std::string& text, const std::string& origin,
                               const std::vector<std::string>& overrides);

// Locale-independent shortest round-trip formatting ('.' decimal separator).
std::string format_double(double value);

// The fully resolved configuration as pretty-printed JSON (the same object
// run_meta.json carries under "config").
std::string resolved_config(const LoadedConfig& loaded);

// Writes metrics.csv, summary.csv, run_meta.json, selection.csv (proposed
// scheme) and optionally partitions.jsonl into out_dir.
void emit_results(const std::vector<std::pair<Scheme, RunReport>>& reports, const RunConfig& cfg,
                  const std::string& out_dir, bool dump_partitions = false);

// Greedy vs random vs exact splitting benchmark; writes split_bench.csv.
void split_bench(const RunConfig& cfg, const std::string& out_dir);

// Runs cfg's scheme (or all three) and emits everything. Returns the reports.
std::vector<std::pair<Scheme, RunReport>> run_and_emit(const LoadedConfig& loaded,
                                                       const std::string& out_dir,
                                                       bool dump_partitions = false);

}  // namespace feelsim

#endif
