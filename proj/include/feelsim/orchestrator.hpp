#ifndef FEELSIM_ORCHESTRATOR_HPP
#define FEELSIM_ORCHESTRATOR_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "feelsim/data_model.hpp"
#include "feelsim/device_energy.hpp"
#include "feelsim/learning.hpp"
#include "feelsim/selection.hpp"
#include "feelsim/similarity.hpp"
#include "feelsim/splitting.hpp"

namespace feelsim {

enum class Scheme { proposed, vanilla_feel, random_selection };

const char* scheme_name(Scheme scheme);

struct BenchConfig {
  int instances = 20;
  int sample_cap = 10;  // exact solver limit is 12
  int subset_count = 2;
  int random_draws = 16;
};

struct RunConfig {
  Scheme scheme = Scheme::proposed;
  int device_count = 20;
  int rounds = 100;
  int trials = 5;
  int participants_per_round = 5;
  int subdatasets_per_device = 4;
  std::uint64_t master_seed = 42;
  int threads = 0;  // 0 = one worker per hardware thread, capped by trials

  GlobalDataSpec data;
  TrainingConfig training;
  SimilarityConfig similarity;
  SelectionConfig selection;  // participants_per_round mirrored in here
  ProfileRanges energy;
  std::string fleet_csv;  // optional; overrides generated profiles
  BenchConfig bench;
};

void validate_config(const RunConfig& cfg);

struct RoundReport {
  int round = 0;  // 1-based
  double accuracy = 0.0;
  double global_loss = 0.0;
  double instantaneous_energy_j = 0.0;
  double cumulative_energy_j = 0.0;
  std::vector<int> participant_ids;
  std::vector<int> dropped_ids;  // infeasible at selection time this round
};

struct SelectionRow {
  int round = 0;
  int device_id = 0;
  double coefficient = 0.0;
  bool selected = false;
};

struct PartitionRecord {
  int device_id = 0;
  Partition partition;
  std::vector<SubDatasetSummary> summaries;
};

struct TrialOutput {
  std::vector<RoundReport> rounds;
  std::vector<SelectionRow> selection_rows;   // proposed scheme only
  std::vector<PartitionRecord> partitions;    // proposed scheme only
  std::vector<int> died_device_ids;           // battery exhausted during the trial
  std::vector<DeviceState> final_states;      // indexed by device id
  std::vector<double> charged_by_device;      // total energy drained per device
};

struct RoundStats {
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double loss_mean = 0.0, loss_std = 0.0;
  double instant_energy_mean = 0.0, instant_energy_std = 0.0;
  double cumulative_energy_mean = 0.0, cumulative_energy_std = 0.0;
};

struct RunReport {
  std::vector<TrialOutput> trials;
  std::vector<RoundStats> per_round;  // cross-trial, population std
};

// One full trial: build data + fleet from trial_seed, split (proposed scheme),
// then rounds of select -> train -> aggregate -> evaluate -> charge.
TrialOutput run_trial_full(const RunConfig& cfg, std::uint64_t trial_seed);
std::vector<RoundReport> run_trial(const RunConfig& cfg, std::uint64_t trial_seed);

std::uint64_t trial_seed(std::uint64_t master_seed, int trial_index);

// cfg.trials trials with seeds derived from the master seed, plus per-round
// cross-trial statistics. Deterministic end-to-end.
RunReport run(const RunConfig& cfg);

}  // namespace feelsim

#endif
