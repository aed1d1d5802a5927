#include "feelsim/similarity.hpp"

#include <algorithm>
#include <stdexcept>

#include "feelsim/splitting.hpp"

namespace feelsim {

TokenSet tokenize(const Sample& sample, const SimilarityConfig& cfg) {
  TokenSet out;
  out.tokens.reserve(sample.features.size() + 1);
  for (std::size_t i = 0; i < sample.features.size(); ++i) {
    if (sample.features[i] >= cfg.binarize_threshold)
      out.tokens.push_back(static_cast<std::int32_t>(i));
  }
  if (cfg.include_label_token)
    out.tokens.push_back(static_cast<std::int32_t>(sample.features.size()) + sample.label);
  return out;  // ascending by construction
}

std::vector<TokenSet> tokenize_all(const LocalDataset& dataset, const SimilarityConfig& cfg) {
  std::vector<TokenSet> out;
  out.reserve(dataset.samples.size());
  for (const Sample& s : dataset.samples) out.push_back(tokenize(s, cfg));
  return out;
}

double jaccard(const TokenSet& a, const TokenSet& b) {
  if (a.tokens.empty() && b.tokens.empty()) return 1.0;  // identical by convention
  std::size_t i = 0, j = 0, common = 0;
  while (i < a.tokens.size() && j < b.tokens.size()) {
    if (a.tokens[i] < b.tokens[j]) {
      ++i;
    } else if (b.tokens[j] < a.tokens[i]) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  const std::size_t unions = a.tokens.size() + b.tokens.size() - common;
  return static_cast<double>(common) / static_cast<double>(unions);
}

double similarity_to_subset(const TokenSet& candidate, std::span<const TokenSet> subset,
                            const SimilarityConfig& cfg) {
  if (subset.empty()) throw std::invalid_argument("similarity_to_subset: empty subset");
  if (cfg.subset_aggregation == SubsetAggregation::max) {
    double best = 0.0;
    for (const TokenSet& m : subset) best = std::max(best, jaccard(candidate, m));
    return best;
  }
  double sum = 0.0;
  for (const TokenSet& m : subset) sum += jaccard(candidate, m);
  return sum / static_cast<double>(subset.size());
}

double p1_objective(const Partition& partition, const std::vector<TokenSet>& tokens) {
  if (partition.assignment.size() != tokens.size())
    throw std::invalid_argument("p1_objective: assignment/token count mismatch");
  std::vector<std::vector<std::size_t>> members(partition.subset_count);
  for (std::size_t i = 0; i < partition.assignment.size(); ++i) {
    const int d = partition.assignment[i];
    if (d < 0 || d >= partition.subset_count)
      throw std::out_of_range("p1_objective: subset index out of range");
    members[d].push_back(i);
  }
  double total = 0.0;
  for (const auto& group : members) {
    for (std::size_t u = 0; u < group.size(); ++u) {
      for (std::size_t v = u + 1; v < group.size(); ++v) {
        total += jaccard(tokens[group[u]], tokens[group[v]]);
      }
    }
  }
  return total;
}

}  // namespace feelsim
