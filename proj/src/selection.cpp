#include "feelsim/selection.hpp"

#include <algorithm>
#include <stdexcept>

namespace feelsim {

FleetStats fleet_stats(std::span<const NodeReport> candidates) {
  if (candidates.empty()) throw std::invalid_argument("fleet_stats: no candidates");
  FleetStats s;
  s.similarity_min = s.similarity_max = candidates.front().best_similarity;
  s.energy_min = s.energy_max = candidates.front().remaining_energy_j;
  for (const NodeReport& r : candidates) {
    s.similarity_min = std::min(s.similarity_min, r.best_similarity);
    s.similarity_max = std::max(s.similarity_max, r.best_similarity);
    s.energy_min = std::min(s.energy_min, r.remaining_energy_j);
    s.energy_max = std::max(s.energy_max, r.remaining_energy_j);
  }
  return s;
}

namespace {

double min_max_norm(double value, double lo, double hi) {
  if (hi <= lo) return 0.5;  // degenerate fleet: the term carries no signal
  return (value - lo) / (hi - lo);
}

}  // namespace

double coefficient(const NodeReport& report, const FleetStats& stats,
                   const SelectionConfig& cfg) {
  const double sim = min_max_norm(report.best_similarity, stats.similarity_min,
                                  stats.similarity_max);
  const double energy = min_max_norm(report.remaining_energy_j, stats.energy_min,
                                     stats.energy_max);
  return cfg.similarity_weight * sim + cfg.energy_weight * (1.0 - energy);
}

SelectionResult select(const std::vector<NodeReport>& reports, const SelectionConfig& cfg) {
  if (reports.empty()) throw std::invalid_argument("select: no reports");
  if (cfg.participants_per_round < 1)
    throw std::invalid_argument("select: participants_per_round < 1");
  if (cfg.similarity_weight + cfg.energy_weight <= 0.0)
    throw std::invalid_argument("select: similarity_weight + energy_weight must be > 0");

  SelectionResult result;
  std::vector<const NodeReport*> candidates;
  for (const NodeReport& r : reports) {
    if (feasible(r.remaining_energy_j, r.round_costs, cfg.deadline_s))
      candidates.push_back(&r);
    else
      result.excluded_infeasible.push_back(r.device_id);
  }
  std::sort(result.excluded_infeasible.begin(), result.excluded_infeasible.end());
  if (candidates.empty()) return result;  // empty selection: round is skipped

  std::vector<NodeReport> snapshot;
  snapshot.reserve(candidates.size());
  for (const NodeReport* r : candidates) snapshot.push_back(*r);
  const FleetStats stats = fleet_stats(snapshot);

  std::vector<std::pair<double, int>> ranked;  // (coefficient, device_id)
  for (const NodeReport* r : candidates) {
    const double c = coefficient(*r, stats, cfg);
    ranked.emplace_back(c, r->device_id);
    result.coefficients.emplace_back(r->device_id, c);
  }
  std::sort(ranked.begin(), ranked.end());
  std::sort(result.coefficients.begin(), result.coefficients.end());

  const std::size_t n = std::min<std::size_t>(ranked.size(),
                                              std::size_t(cfg.participants_per_round));
  for (std::size_t i = 0; i < n; ++i) result.selected.push_back(ranked[i].second);
  std::sort(result.selected.begin(), result.selected.end());
  return result;
}

double p2_objective(const SelectionResult& result, const std::vector<NodeReport>& reports) {
  double total = 0.0;
  for (int id : result.selected) {
    const auto it = std::find_if(reports.begin(), reports.end(),
                                 [&](const NodeReport& r) { return r.device_id == id; });
    if (it == reports.end()) throw std::invalid_argument("p2_objective: unknown device id");
    total += it->round_costs.total_energy_j();
  }
  return total;
}

}  // namespace feelsim
