#include "feelsim/data_model.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "feelsim/rng.hpp"

namespace feelsim {

namespace {

constexpr std::uint32_t kImagesMagic = 0x00000803;
constexpr std::uint32_t kLabelsMagic = 0x00000801;

// Sub-stream tags so one GlobalDataSpec seed drives independent decisions.
constexpr std::uint64_t kBlobMeansTag = 1;
constexpr std::uint64_t kBlobNoiseTag = 2;
constexpr std::uint64_t kShardDealTag = 3;
constexpr std::uint64_t kUnbalanceTag = 4;

std::uint32_t read_be_u32(std::istream& in, std::size_t& offset, const std::string& path,
                          const char* what) {
  std::uint8_t b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) {
    std::ostringstream oss;
    oss << path << ": truncated header, expected " << what << " at byte offset " << offset;
    throw std::runtime_error(oss.str());
  }
  offset += 4;
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
         (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

std::ifstream open_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  return in;
}

}  // namespace

std::vector<Sample> load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream images = open_binary(images_path);
  std::size_t img_off = 0;
  const std::uint32_t img_magic = read_be_u32(images, img_off, images_path, "magic number");
  if (img_magic != kImagesMagic) {
    std::ostringstream oss;
    oss << images_path << ": malformed magic number 0x" << std::hex << img_magic
        << " at byte offset 0, expected 0x" << kImagesMagic;
    throw std::runtime_error(oss.str());
  }
  const std::uint32_t image_count = read_be_u32(images, img_off, images_path, "image count");
  const std::uint32_t rows = read_be_u32(images, img_off, images_path, "row count");
  const std::uint32_t cols = read_be_u32(images, img_off, images_path, "column count");

  std::ifstream labels = open_binary(labels_path);
  std::size_t lab_off = 0;
  const std::uint32_t lab_magic = read_be_u32(labels, lab_off, labels_path, "magic number");
  if (lab_magic != kLabelsMagic) {
    std::ostringstream oss;
    oss << labels_path << ": malformed magic number 0x" << std::hex << lab_magic
        << " at byte offset 0, expected 0x" << kLabelsMagic;
    throw std::runtime_error(oss.str());
  }
  const std::uint32_t label_count = read_be_u32(labels, lab_off, labels_path, "label count");

  if (image_count != label_count) {
    std::ostringstream oss;
    oss << images_path << ": image/label count mismatch at byte offset 4, " << image_count
        << " images vs " << label_count << " labels";
    throw std::runtime_error(oss.str());
  }

  const std::size_t pixels = std::size_t(rows) * cols;
  if (pixels == 0) {
    std::ostringstream oss;
    oss << images_path << ": malformed image dimensions " << rows << "x" << cols
        << " at byte offset 8";
    throw std::runtime_error(oss.str());
  }
  std::vector<Sample> out;
  out.reserve(image_count);
  std::vector<std::uint8_t> buf(pixels);
  for (std::uint32_t i = 0; i < image_count; ++i) {
    images.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(pixels));
    if (!images) {
      std::ostringstream oss;
      oss << images_path << ": truncated payload in image " << i << " at byte offset "
          << img_off + static_cast<std::size_t>(images.gcount());
      throw std::runtime_error(oss.str());
    }
    img_off += pixels;
    std::uint8_t label = 0;
    labels.read(reinterpret_cast<char*>(&label), 1);
    if (!labels) {
      std::ostringstream oss;
      oss << labels_path << ": truncated payload at label " << i << ", byte offset " << lab_off;
      throw std::runtime_error(oss.str());
    }
    lab_off += 1;

    Sample s;
    s.features.resize(pixels);
    for (std::size_t p = 0; p < pixels; ++p) s.features[p] = buf[p] / 255.0;
    s.label = label;
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> generate_blobs(const GlobalDataSpec& spec) {
  if (spec.feature_dim < 1) throw std::invalid_argument("generate_blobs: feature_dim < 1");
  if (spec.class_count < 2) throw std::invalid_argument("generate_blobs: class_count < 2");
  if (spec.total_train_samples < 1)
    throw std::invalid_argument("generate_blobs: total_train_samples < 1");

  Rng means_rng(derive_seed(spec.seed, kBlobMeansTag));
  std::vector<std::vector<double>> means(spec.class_count);
  for (auto& m : means) {
    m.resize(spec.feature_dim);
    for (auto& v : m) v = means_rng.next_unit();
  }

  Rng noise_rng(derive_seed(spec.seed, kBlobNoiseTag));
  std::vector<Sample> out(spec.total_train_samples);
  for (int i = 0; i < spec.total_train_samples; ++i) {
    const int cls = i % spec.class_count;  // balanced before device partitioning
    Sample& s = out[i];
    s.label = cls;
    s.features.resize(spec.feature_dim);
    for (int d = 0; d < spec.feature_dim; ++d) {
      const double v = means[cls][d] + noise_rng.normal(0.0, spec.blob_stddev);
      s.features[d] = std::clamp(v, 0.0, 1.0);
    }
  }
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_train_test(
    const std::vector<Sample>& samples, double test_fraction, std::uint64_t seed) {
  if (test_fraction <= 0.0 || test_fraction >= 1.0)
    throw std::invalid_argument("split_train_test: test_fraction outside (0,1)");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);

  const auto test_count =
      static_cast<std::size_t>(test_fraction * static_cast<double>(samples.size()));
  if (test_count == 0 || test_count == samples.size())
    throw std::invalid_argument("split_train_test: split leaves one side empty");
  std::vector<Sample> test, train;
  test.reserve(test_count);
  train.reserve(samples.size() - test_count);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < test_count ? test : train).push_back(samples[order[i]]);
  }
  return {std::move(train), std::move(test)};
}

std::vector<LocalDataset> partition_noniid(const std::vector<Sample>& samples, int device_count,
                                           const GlobalDataSpec& spec) {
  if (device_count < 1) throw std::invalid_argument("partition_noniid: device_count < 1");
  const int shards_per_device = spec.noniid_shards_per_device;
  if (shards_per_device < 1)
    throw std::invalid_argument("partition_noniid: noniid_shards_per_device < 1");
  const std::size_t shard_count = std::size_t(device_count) * shards_per_device;
  if (samples.size() < shard_count) {
    std::ostringstream oss;
    oss << "partition_noniid: " << samples.size() << " samples cannot fill " << shard_count
        << " shards";
    throw std::invalid_argument(oss.str());
  }

  // Label-sorted order, index as tie-break for determinism.
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (samples[a].label != samples[b].label) return samples[a].label < samples[b].label;
    return a < b;
  });

  // Contiguous shards, near-equal sizes.
  const std::size_t base = samples.size() / shard_count;
  const std::size_t extra = samples.size() % shard_count;
  std::vector<std::pair<std::size_t, std::size_t>> shard_spans;  // (begin, end) into order
  std::size_t pos = 0;
  for (std::size_t s = 0; s < shard_count; ++s) {
    const std::size_t len = base + (s < extra ? 1 : 0);
    shard_spans.emplace_back(pos, pos + len);
    pos += len;
  }

  // Deal shards_per_device shards to each device without replacement.
  std::vector<std::size_t> shard_ids(shard_count);
  std::iota(shard_ids.begin(), shard_ids.end(), std::size_t{0});
  Rng deal_rng(derive_seed(spec.seed, kShardDealTag));
  deal_rng.shuffle(shard_ids);

  std::vector<LocalDataset> devices(device_count);
  for (int dev = 0; dev < device_count; ++dev) {
    devices[dev].device_id = dev;
    for (int s = 0; s < shards_per_device; ++s) {
      const auto [begin, end] = shard_spans[shard_ids[std::size_t(dev) * shards_per_device + s]];
      for (std::size_t i = begin; i < end; ++i) devices[dev].samples.push_back(samples[order[i]]);
    }
  }

  if (device_count == 1 || spec.unbalance_factor <= 1.0) return devices;

  // Rebalance sizes toward a linear ramp between 1 and unbalance_factor,
  // assigned to devices in seeded order.
  const double u = spec.unbalance_factor;
  std::vector<double> weights(device_count);
  for (int i = 0; i < device_count; ++i)
    weights[i] = 1.0 + (u - 1.0) * double(i) / double(device_count - 1);
  Rng unb_rng(derive_seed(spec.seed, kUnbalanceTag));
  unb_rng.shuffle(weights);
  const double weight_sum = std::accumulate(weights.begin(), weights.end(), 0.0);

  const std::size_t total = samples.size();
  std::vector<std::size_t> target(device_count);
  std::vector<std::pair<double, int>> fractions;
  long long assigned = 0;
  for (int i = 0; i < device_count; ++i) {
    const double exact = double(total) * weights[i] / weight_sum;
    target[i] = std::max<std::size_t>(1, static_cast<std::size_t>(exact));
    assigned += static_cast<long long>(target[i]);
    fractions.emplace_back(exact - double(target[i]), i);
  }
  std::sort(fractions.begin(), fractions.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  long long leftover = static_cast<long long>(total) - assigned;
  for (std::size_t i = 0; leftover > 0; i = (i + 1) % fractions.size(), --leftover)
    ++target[fractions[i].second];
  // Clamping small targets to 1 can overshoot; shave the largest targets back.
  while (leftover < 0) {
    auto mx = std::max_element(target.begin(), target.end());
    if (*mx <= 1) break;
    --*mx;
    ++leftover;
  }

  // Keep the ratio within the documented slack even after rounding.
  while (true) {
    auto mx = std::max_element(target.begin(), target.end());
    auto mn = std::min_element(target.begin(), target.end());
    if (double(*mx) <= u * double(*mn) + 1.0) break;
    --*mx;
    ++*mn;
  }

  // Move surplus samples (tail first) into deficit devices, lowest ids first.
  for (int src = 0; src < device_count; ++src) {
    while (devices[src].samples.size() > target[src]) {
      int dst = -1;
      for (int j = 0; j < device_count; ++j) {
        if (devices[j].samples.size() < target[j]) {
          dst = j;
          break;
        }
      }
      if (dst < 0) break;
      devices[dst].samples.push_back(std::move(devices[src].samples.back()));
      devices[src].samples.pop_back();
    }
  }
  return devices;
}

}  // namespace feelsim
