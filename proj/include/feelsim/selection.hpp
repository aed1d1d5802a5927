#ifndef FEELSIM_SELECTION_HPP
#define FEELSIM_SELECTION_HPP

#include <span>
#include <vector>

#include "feelsim/device_energy.hpp"
#include "feelsim/splitting.hpp"

namespace feelsim {

// What a candidate node sends the server before a round.
struct NodeReport {
  int device_id = 0;
  std::vector<SubDatasetSummary> subdataset_summaries;
  double remaining_energy_j = 0.0;
  RoundCosts round_costs;        // for the sub-dataset it would train next
  double best_similarity = 0.0;  // min internal_similarity across its sub-datasets
};

struct SelectionConfig {
  int participants_per_round = 5;
  double similarity_weight = 0.5;
  double energy_weight = 0.5;
  double deadline_s = 10.0;
};

struct FleetStats {
  double similarity_min = 0.0;
  double similarity_max = 0.0;
  double energy_min = 0.0;
  double energy_max = 0.0;
};

struct SelectionResult {
  std::vector<int> selected;                         // ascending device ids
  std::vector<std::pair<int, double>> coefficients;  // (device_id, coefficient) per candidate
  std::vector<int> excluded_infeasible;              // ascending device ids
};

FleetStats fleet_stats(std::span<const NodeReport> candidates);

// w_s * norm(similarity) + w_e * (1 - norm(energy)); min-max normalized over
// the current candidates, each norm pinned to 0.5 when the range collapses.
// Lower is better.
double coefficient(const NodeReport& report, const FleetStats& stats,
                   const SelectionConfig& cfg);

// Drops infeasible candidates, ranks the rest by ascending (coefficient,
// device_id) and keeps the first n. An empty result means the round is skipped.
SelectionResult select(const std::vector<NodeReport>& reports, const SelectionConfig& cfg);

// Total computation + transmission energy of the selected nodes.
double p2_objective(const SelectionResult& result, const std::vector<NodeReport>& reports);

}  // namespace feelsim

#endif
