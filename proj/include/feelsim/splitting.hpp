#ifndef FEELSIM_SPLITTING_HPP
#define FEELSIM_SPLITTING_HPP

#include <cstdint>
#include <vector>

#include "feelsim/rng.hpp"
#include "feelsim/similarity.hpp"

namespace feelsim {

// Assignment of every sample of a local dataset to exactly one sub-dataset.
struct Partition {
  int subset_count = 1;
  std::vector<int> assignment;  // per-sample index in [0, subset_count)
};

struct SubDatasetSummary {
  int device_id = 0;
  int subset_index = 0;
  int size = 0;
  double internal_similarity = 0.0;  // mean pairwise Jaccard within the subset
};

// Greedy diversity-maximizing split: k random seed samples, then every
// remaining sample (in seeded random order) joins the sub-dataset it is least
// similar to. A post-pass moves samples out of size>=3 subsets until every
// subset holds at least 2 samples.
Partition split(const LocalDataset& dataset, int k, const SimilarityConfig& cfg,
                std::uint64_t seed);

// Exhaustive minimizer over all assignments into exactly k subsets of size >= 2
// (k == 1 exempt). Only instances with |D| <= 12 are accepted.
Partition split_exact(const LocalDataset& dataset, int k, const SimilarityConfig& cfg);

// Uniformly random assignment conditioned on every subset having >= 2 samples.
Partition random_feasible_partition(std::size_t sample_count, int k, Rng& rng);

std::vector<SubDatasetSummary> summarize(const Partition& partition, const LocalDataset& dataset,
                                         const SimilarityConfig& cfg);

// Throws unless the partition covers all sample_count samples, every index is
// in range, and every subset has >= 2 samples (when 2k <= sample_count).
void validate_partition(const Partition& partition, std::size_t sample_count);

}  // namespace feelsim

#endif
