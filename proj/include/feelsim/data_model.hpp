#ifndef FEELSIM_DATA_MODEL_HPP
#define FEELSIM_DATA_MODEL_HPP

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace feelsim {

// One labeled data point. Features are normalized into [0,1] at ingestion.
struct Sample {
  std::vector<double> features;
  int label = 0;
};

// A device's private training data.
struct LocalDataset {
  int device_id = 0;
  std::vector<Sample> samples;
};

enum class DataSource { synthetic_blobs, idx_files };

struct GlobalDataSpec {
  DataSource source = DataSource::synthetic_blobs;
  int class_count = 10;
  int feature_dim = 32;
  int total_train_samples = 5000;
  double test_fraction = 0.2;
  int noniid_shards_per_device = 4;
  double unbalance_factor = 3.0;  // max/min ratio of device dataset sizes
  double blob_stddev = 0.15;      // per-dimension cluster noise
  std::string idx_images;        // required when source == idx_files
  std::string idx_labels;
  std::uint64_t seed = 0;
};

// Reads an IDX image/label file pair (MNIST wire format: big-endian
// dimensions, unsigned pixel bytes). Pixels are scaled by 1/255.
std::vector<Sample> load_idx(const std::string& images_path, const std::string& labels_path);

// Draws class_count isotropic Gaussian clusters with distinct means in
// [0,1]^feature_dim, clipped to [0,1]. Classes are balanced round-robin.
std::vector<Sample> generate_blobs(const GlobalDataSpec& spec);

// Seeded shuffle, then the first test_fraction of samples become the
// server-held test split; the rest are training data.
std::pair<std::vector<Sample>, std::vector<Sample>> split_train_test(
    const std::vector<Sample>& samples, double test_fraction, std::uint64_t seed);

// Label-sorted shard partitioning (label skew) followed by a size rebalance
// so the max/min device dataset ratio tracks spec.unbalance_factor.
std::vector<LocalDataset> partition_noniid(const std::vector<Sample>& samples,
                                           int device_count, const GlobalDataSpec& spec);

}  // namespace feelsim

#endif
