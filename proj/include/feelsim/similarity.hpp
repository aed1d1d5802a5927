#ifndef FEELSIM_SIMILARITY_HPP
#define FEELSIM_SIMILARITY_HPP

#include <cstdint>
#include <span>
#include <vector>

#include "feelsim/data_model.hpp"

namespace feelsim {

struct Partition;  // defined in splitting.hpp

// Sorted, deduplicated token ids derived from one sample.
struct TokenSet {
  std::vector<std::int32_t> tokens;
};

enum class SubsetAggregation { mean, max };

struct SimilarityConfig {
  double binarize_threshold = 0.5;   // on [0,1]-normalized features
  bool include_label_token = true;
  SubsetAggregation subset_aggregation = SubsetAggregation::mean;
};

// Token set = { i : features[i] >= threshold } plus feature_dim + label when
// label tokens are enabled.
TokenSet tokenize(const Sample& sample, const SimilarityConfig& cfg);

std::vector<TokenSet> tokenize_all(const LocalDataset& dataset, const SimilarityConfig& cfg);

// |a n b| / |a u b|; both-empty pairs count as identical (1.0).
double jaccard(const TokenSet& a, const TokenSet& b);

// Aggregated Jaccard similarity of a candidate against every member of a
// sub-dataset (mean by default, max optionally).
double similarity_to_subset(const TokenSet& candidate, std::span<const TokenSet> subset,
                            const SimilarityConfig& cfg);

// Total intra-sub-dataset pairwise similarity; each unordered pair counted once.
double p1_objective(const Partition& partition, const std::vector<TokenSet>& tokens);

}  // namespace feelsim

#endif
