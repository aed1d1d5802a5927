#include "feelsim/splitting.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace feelsim {

namespace {

void check_split_args(std::size_t n, int k) {
  if (k < 1) throw std::invalid_argument("split: k < 1");
  if (n == 0) throw std::invalid_argument("split: empty dataset");
  if (k > 1 && std::size_t(2) * std::size_t(k) > n) {
    std::ostringstream oss;
    oss << "split: k=" << k << " out of range for " << n << " samples (need 2k <= |D|)";
    throw std::invalid_argument(oss.str());
  }
}

}  // namespace

Partition split(const LocalDataset& dataset, int k, const SimilarityConfig& cfg,
                std::uint64_t seed) {
  const std::size_t n = dataset.samples.size();
  check_split_args(n, k);

  const std::vector<TokenSet> tokens = tokenize_all(dataset, cfg);
  Partition part;
  part.subset_count = k;
  part.assignment.assign(n, -1);

  Rng rng(seed);
  // k distinct seed samples, one per sub-dataset.
  std::vector<std::size_t> picked = rng.sample_without_replacement(n, std::size_t(k));
  std::vector<std::vector<std::size_t>> members(k);
  for (int d = 0; d < k; ++d) {
    part.assignment[picked[d]] = d;
    members[d].push_back(picked[d]);
  }

  // Remaining pool, visited in seeded random order.
  std::vector<std::size_t> pool;
  pool.reserve(n - std::size_t(k));
  for (std::size_t i = 0; i < n; ++i)
    if (part.assignment[i] < 0) pool.push_back(i);
  rng.shuffle(pool);

  std::vector<TokenSet> member_tokens;
  for (std::size_t v : pool) {
    int best = 0;
    double best_score = std::numeric_limits<double>::infinity();
    for (int d = 0; d < k; ++d) {
      double score;
      if (cfg.subset_aggregation == SubsetAggregation::max) {
        score = 0.0;
        for (std::size_t m : members[d]) score = std::max(score, jaccard(tokens[v], tokens[m]));
      } else {
        double sum = 0.0;
        for (std::size_t m : members[d]) sum += jaccard(tokens[v], tokens[m]);
        score = sum / static_cast<double>(members[d].size());
      }
      if (score < best_score) {  // ties keep the lowest subset index
        best_score = score;
        best = d;
      }
    }
    part.assignment[v] = best;
    members[best].push_back(v);
  }

  // Constraint repair: every sub-dataset needs >= 2 samples. Feed deficient
  // subsets with the least-similar sample drawn from any subset of size >= 3.
  if (k > 1) {
    while (true) {
      int deficient = -1;
      for (int d = 0; d < k; ++d) {
        if (members[d].size() < 2) {
          deficient = d;
          break;
        }
      }
      if (deficient < 0) break;

      int donor = -1;
      std::size_t donor_pos = 0;
      double best_sim = std::numeric_limits<double>::infinity();
      for (int d = 0; d < k; ++d) {
        if (d == deficient || members[d].size() < 3) continue;
        for (std::size_t pos = 0; pos < members[d].size(); ++pos) {
          double sum = 0.0;
          for (std::size_t m : members[deficient]) sum += jaccard(tokens[members[d][pos]], tokens[m]);
          const double sim = sum / static_cast<double>(members[deficient].size());
          if (sim < best_sim) {
            best_sim = sim;
            donor = d;
            donor_pos = pos;
          }
        }
      }
      if (donor < 0) throw std::logic_error("split: repair found no donor subset");
      const std::size_t moved = members[donor][donor_pos];
      members[donor].erase(members[donor].begin() + static_cast<std::ptrdiff_t>(donor_pos));
      members[deficient].push_back(moved);
      part.assignment[moved] = deficient;
    }
  }
  return part;
}

Partition split_exact(const LocalDataset& dataset, int k, const SimilarityConfig& cfg) {
  const std::size_t n = dataset.samples.size();
  check_split_args(n, k);
  if (n > 12) throw std::invalid_argument("split_exact: instance too large (|D| > 12)");

  const std::vector<TokenSet> tokens = tokenize_all(dataset, cfg);
  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) sim[i][j] = sim[j][i] = jaccard(tokens[i], tokens[j]);

  const std::size_t min_size = (k > 1) ? 2 : 1;
  std::vector<int> assignment(n, -1);
  std::vector<int> best_assignment;
  std::vector<std::size_t> sizes(k, 0);
  double best_obj = std::numeric_limits<double>::infinity();

  // Restricted-growth enumeration in lexicographic order; the first optimum
  // found is the lexicographically smallest, which is the tie-break rule.
  auto rec = [&](auto&& self, std::size_t i, int used, double partial) -> void {
    if (partial >= best_obj) return;
    if (i == n) {
      const bool filled = std::all_of(sizes.begin(), sizes.end(),
                                      [&](std::size_t s) { return s >= min_size; });
      if (used == k && filled) {
        best_obj = partial;
        best_assignment = assignment;
      }
      return;
    }
    // Enough samples left to open the remaining subsets and fill deficits?
    std::size_t need = std::size_t(k - used) * min_size;
    for (int d = 0; d < used; ++d) need += (sizes[d] < min_size) ? (min_size - sizes[d]) : 0;
    if (need > n - i) return;

    const int open_limit = std::min(used + 1, k);
    for (int d = 0; d < open_limit; ++d) {
      double delta = 0.0;
      for (std::size_t j = 0; j < i; ++j)
        if (assignment[j] == d) delta += sim[i][j];
      assignment[i] = d;
      ++sizes[d];
      self(self, i + 1, std::max(used, d + 1), partial + delta);
      --sizes[d];
      assignment[i] = -1;
    }
  };
  rec(rec, 0, 0, 0.0);

  Partition part;
  part.subset_count = k;
  part.assignment = std::move(best_assignment);
  return part;
}

Partition random_feasible_partition(std::size_t sample_count, int k, Rng& rng) {
  check_split_args(sample_count, k);
  Partition part;
  part.subset_count = k;
  for (int attempt = 0; attempt < 100000; ++attempt) {
    part.assignment.assign(sample_count, 0);
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t i = 0; i < sample_count; ++i) {
      const int d = static_cast<int>(rng.below(std::uint64_t(k)));
      part.assignment[i] = d;
      ++sizes[d];
    }
    const std::size_t min_size = (k > 1) ? 2 : 1;
    if (std::all_of(sizes.begin(), sizes.end(), [&](std::size_t s) { return s >= min_size; }))
      return part;
  }
  throw std::runtime_error("random_feasible_partition: rejection sampling failed");
}

std::vector<SubDatasetSummary> summarize(const Partition& partition, const LocalDataset& dataset,
                                         const SimilarityConfig& cfg) {
  validate_partition(partition, dataset.samples.size());
  const std::vector<TokenSet> tokens = tokenize_all(dataset, cfg);
  std::vector<std::vector<std::size_t>> members(partition.subset_count);
  for (std::size_t i = 0; i < partition.assignment.size(); ++i)
    members[partition.assignment[i]].push_back(i);

  std::vector<SubDatasetSummary> out;
  out.reserve(members.size());
  for (int d = 0; d < partition.subset_count; ++d) {
    SubDatasetSummary s;
    s.device_id = dataset.device_id;
    s.subset_index = d;
    s.size = static_cast<int>(members[d].size());
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t u = 0; u < members[d].size(); ++u) {
      for (std::size_t v = u + 1; v < members[d].size(); ++v) {
        sum += jaccard(tokens[members[d][u]], tokens[members[d][v]]);
        ++pairs;
      }
    }
    s.internal_similarity = pairs ? sum / static_cast<double>(pairs) : 0.0;
    out.push_back(s);
  }
  return out;
}

void validate_partition(const Partition& partition, std::size_t sample_count) {
  if (partition.subset_count < 1) throw std::invalid_argument("partition: subset_count < 1");
  if (partition.assignment.size() != sample_count)
    throw std::invalid_argument("partition: assignment does not cover all samples");
  std::vector<std::size_t> sizes(partition.subset_count, 0);
  for (int a : partition.assignment) {
    if (a < 0 || a >= partition.subset_count)
      throw std::invalid_argument("partition: subset index out of range");
    ++sizes[std::size_t(a)];
  }
  if (std::size_t(2) * std::size_t(partition.subset_count) <= sample_count) {
    for (std::size_t s : sizes) {
      if (s < 2) throw std::invalid_argument("partition: sub-dataset smaller than 2 samples");
    }
  }
}

}  // namespace feelsim
