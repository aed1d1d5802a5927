#include "feelsim/cli_io.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "feelsim/rng.hpp"

namespace feelsim {

namespace {

using nlohmann::json;

constexpr const char* kArtifactName = "feelsim";
constexpr const char* kArtifactVersion = "0.1.0";

// ---------------------------------------------------------------------------
// Key registry: one row per config key, shared by the INI parser, the JSON
// loader, overrides, and run_meta emission, so unknown keys fail everywhere.

struct KeyValue {
  std::string value;
  std::string where;  // "path:line" or "override"
};

using KeyMap = std::map<std::string, KeyValue>;  // "section.key" -> value

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "run.scheme", "run.device_count", "run.rounds", "run.trials",
      "run.participants_per_round", "run.subdatasets_per_device", "run.master_seed",
      "run.threads",
      "data.source", "data.class_count", "data.feature_dim", "data.total_train_samples",
      "data.test_fraction", "data.noniid_shards_per_device", "data.unbalance_factor",
      "data.blob_stddev", "data.idx_images", "data.idx_labels",
      "training.learning_rate", "training.epochs", "training.batch_size", "training.loss",
      "training.model", "training.hidden_dims",
      "similarity.binarize_threshold", "similarity.include_label_token",
      "similarity.subset_aggregation",
      "selection.similarity_weight", "selection.energy_weight", "selection.deadline_s",
      "energy.cpu_freq_ghz_min", "energy.cpu_freq_ghz_max", "energy.cycles_per_sample_min",
      "energy.cycles_per_sample_max", "energy.alpha", "energy.tx_power_w_min",
      "energy.tx_power_w_max", "energy.uplink_mbps_min", "energy.uplink_mbps_max",
      "energy.initial_energy_j_min", "energy.initial_energy_j_max", "energy.fleet_csv",
      "bench.instances", "bench.sample_cap", "bench.subset_count", "bench.random_draws",
  };
  return keys;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void put_key(KeyMap& map, const std::string& path, const std::string& value,
             const std::string& where) {
  if (!known_keys().count(path))
    throw ConfigError(where + ": unknown key \"" + path + "\"");
  map[path] = {value, where};
}

KeyMap parse_ini(const std::string& text, const std::string& origin) {
  KeyMap map;
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // Inline comments: a '#' or ';' preceded by whitespace starts a comment.
    for (std::size_t i = 1; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') &&
          (line[i - 1] == ' ' || line[i - 1] == '\t')) {
        line.resize(i);
        break;
      }
    }
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    const std::string where = origin + ":" + std::to_string(line_no);
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(where + ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty()) throw ConfigError(where + ": empty section name");
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw ConfigError(where + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) throw ConfigError(where + ": empty key");
    if (section.empty()) throw ConfigError(where + ": key outside any [section]");
    put_key(map, section + "." + key, value, where);
  }
  return map;
}

void flatten_json(const json& j, const std::string& prefix, KeyMap& map,
                  const std::string& origin) {
  for (const auto& [key, value] : j.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) {
      flatten_json(value, path, map, origin);
    } else if (value.is_string()) {
      put_key(map, path, value.get<std::string>(), origin);
    } else {
      put_key(map, path, value.dump(), origin);
    }
  }
}

KeyMap parse_json_config(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  if (j.contains("config")) j = j.at("config");  // run_meta.json layout
  if (!j.is_object()) throw ConfigError(origin + ": expected a JSON object of config sections");
  KeyMap map;
  flatten_json(j, "", map, origin);
  return map;
}

// ---------------------------------------------------------------------------
// Typed readers with key-path error reporting.

class ConfigReader {
 public:
  explicit ConfigReader(KeyMap map) : map_(std::move(map)) {}

  bool has(const std::string& path) const { return map_.count(path) != 0; }

  std::string get_string(const std::string& path, const std::string& fallback) {
    const auto it = map_.find(path);
    return it == map_.end() ? fallback : it->second.value;
  }

  double get_double(const std::string& path, double fallback) {
    const auto it = map_.find(path);
    if (it == map_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const double v = std::stod(it->second.value, &pos);
      if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(it->second.where + ": key \"" + path + "\" expects a number, got \"" +
                        it->second.value + "\"");
    }
  }

  long long get_int(const std::string& path, long long fallback) {
    const auto it = map_.find(path);
    if (it == map_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const long long v = std::stoll(it->second.value, &pos);
      if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(it->second.where + ": key \"" + path + "\" expects an integer, got \"" +
                        it->second.value + "\"");
    }
  }

  std::uint64_t get_u64(const std::string& path, std::uint64_t fallback) {
    const auto it = map_.find(path);
    if (it == map_.end()) return fallback;
    try {
      std::size_t pos = 0;
      const std::uint64_t v = std::stoull(it->second.value, &pos);
      if (pos != it->second.value.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError(it->second.where + ": key \"" + path +
                        "\" expects an unsigned integer, got \"" + it->second.value + "\"");
    }
  }

  bool get_bool(const std::string& path, bool fallback) {
    const auto it = map_.find(path);
    if (it == map_.end()) return fallback;
    const std::string& v = it->second.value;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(it->second.where + ": key \"" + path + "\" expects true/false, got \"" + v +
                      "\"");
  }

  std::string where(const std::string& path) const {
    const auto it = map_.find(path);
    return it == map_.end() ? "config" : it->second.where;
  }

 private:
  KeyMap map_;
};

LoadedConfig build_config(ConfigReader& reader) {
  LoadedConfig loaded;
  RunConfig& cfg = loaded.cfg;

  const std::string scheme = reader.get_string("run.scheme", "proposed");
  if (scheme == "all") {
    loaded.all_schemes = true;
    cfg.scheme = Scheme::proposed;
  } else if (scheme == "proposed") {
    cfg.scheme = Scheme::proposed;
  } else if (scheme == "vanilla_feel") {
    cfg.scheme = Scheme::vanilla_feel;
  } else if (scheme == "random_selection") {
    cfg.scheme = Scheme::random_selection;
  } else {
    throw ConfigError(reader.where("run.scheme") +
                      ": run.scheme must be proposed|vanilla_feel|random_selection|all");
  }
  cfg.device_count = static_cast<int>(reader.get_int("run.device_count", cfg.device_count));
  cfg.rounds = static_cast<int>(reader.get_int("run.rounds", cfg.rounds));
  cfg.trials = static_cast<int>(reader.get_int("run.trials", cfg.trials));
  cfg.participants_per_round =
      static_cast<int>(reader.get_int("run.participants_per_round", cfg.participants_per_round));
  cfg.subdatasets_per_device =
      static_cast<int>(reader.get_int("run.subdatasets_per_device", cfg.subdatasets_per_device));
  cfg.master_seed = reader.get_u64("run.master_seed", cfg.master_seed);
  cfg.threads = static_cast<int>(reader.get_int("run.threads", cfg.threads));

  const std::string source = reader.get_string("data.source", "synthetic_blobs");
  if (source == "synthetic_blobs") {
    cfg.data.source = DataSource::synthetic_blobs;
  } else if (source == "idx_files") {
    cfg.data.source = DataSource::idx_files;
  } else {
    throw ConfigError(reader.where("data.source") +
                      ": data.source must be synthetic_blobs|idx_files");
  }
  cfg.data.class_count = static_cast<int>(reader.get_int("data.class_count", cfg.data.class_count));
  cfg.data.feature_dim = static_cast<int>(reader.get_int("data.feature_dim", cfg.data.feature_dim));
  cfg.data.total_train_samples =
      static_cast<int>(reader.get_int("data.total_train_samples", cfg.data.total_train_samples));
  cfg.data.test_fraction = reader.get_double("data.test_fraction", cfg.data.test_fraction);
  cfg.data.noniid_shards_per_device = static_cast<int>(
      reader.get_int("data.noniid_shards_per_device", cfg.data.noniid_shards_per_device));
  cfg.data.unbalance_factor = reader.get_double("data.unbalance_factor", cfg.data.unbalance_factor);
  cfg.data.blob_stddev = reader.get_double("data.blob_stddev", cfg.data.blob_stddev);
  cfg.data.idx_images = reader.get_string("data.idx_images", cfg.data.idx_images);
  cfg.data.idx_labels = reader.get_string("data.idx_labels", cfg.data.idx_labels);

  cfg.training.learning_rate =
      reader.get_double("training.learning_rate", cfg.training.learning_rate);
  cfg.training.epochs = static_cast<int>(reader.get_int("training.epochs", cfg.training.epochs));
  cfg.training.batch_size =
      static_cast<int>(reader.get_int("training.batch_size", cfg.training.batch_size));
  const std::string loss = reader.get_string("training.loss", "mse_onehot");
  if (loss == "mse_onehot") {
    cfg.training.loss_kind = LossKind::mse_onehot;
  } else if (loss == "cross_entropy") {
    cfg.training.loss_kind = LossKind::cross_entropy;
  } else {
    throw ConfigError(reader.where("training.loss") +
                      ": training.loss must be mse_onehot|cross_entropy");
  }
  const std::string model = reader.get_string("training.model", "logistic");
  if (model == "logistic") {
    cfg.training.model_kind = ModelKind::logistic;
  } else if (model == "mlp") {
    cfg.training.model_kind = ModelKind::mlp;
  } else {
    throw ConfigError(reader.where("training.model") + ": training.model must be logistic|mlp");
  }
  if (reader.has("training.hidden_dims")) {
    cfg.training.hidden_dims.clear();
    std::istringstream hs(reader.get_string("training.hidden_dims", ""));
    std::string part;
    while (std::getline(hs, part, ',')) {
      try {
        cfg.training.hidden_dims.push_back(std::stoi(trim(part)));
      } catch (const std::exception&) {
        throw ConfigError(reader.where("training.hidden_dims") +
                          ": training.hidden_dims expects comma-separated integers");
      }
    }
  }

  cfg.similarity.binarize_threshold =
      reader.get_double("similarity.binarize_threshold", cfg.similarity.binarize_threshold);
  cfg.similarity.include_label_token =
      reader.get_bool("similarity.include_label_token", cfg.similarity.include_label_token);
  const std::string agg = reader.get_string("similarity.subset_aggregation", "mean");
  if (agg == "mean") {
    cfg.similarity.subset_aggregation = SubsetAggregation::mean;
  } else if (agg == "max") {
    cfg.similarity.subset_aggregation = SubsetAggregation::max;
  } else {
    throw ConfigError(reader.where("similarity.subset_aggregation") +
                      ": similarity.subset_aggregation must be mean|max");
  }

  cfg.selection.similarity_weight =
      reader.get_double("selection.similarity_weight", cfg.selection.similarity_weight);
  cfg.selection.energy_weight =
      reader.get_double("selection.energy_weight", cfg.selection.energy_weight);
  cfg.selection.deadline_s = reader.get_double("selection.deadline_s", cfg.selection.deadline_s);
  cfg.selection.participants_per_round = cfg.participants_per_round;

  cfg.energy.cpu_freq_hz_min =
      reader.get_double("energy.cpu_freq_ghz_min", cfg.energy.cpu_freq_hz_min / 1e9) * 1e9;
  cfg.energy.cpu_freq_hz_max =
      reader.get_double("energy.cpu_freq_ghz_max", cfg.energy.cpu_freq_hz_max / 1e9) * 1e9;
  cfg.energy.cycles_per_sample_min =
      reader.get_double("energy.cycles_per_sample_min", cfg.energy.cycles_per_sample_min);
  cfg.energy.cycles_per_sample_max =
      reader.get_double("energy.cycles_per_sample_max", cfg.energy.cycles_per_sample_max);
  cfg.energy.capacitance_alpha = reader.get_double("energy.alpha", cfg.energy.capacitance_alpha);
  cfg.energy.tx_power_w_min = reader.get_double("energy.tx_power_w_min", cfg.energy.tx_power_w_min);
  cfg.energy.tx_power_w_max = reader.get_double("energy.tx_power_w_max", cfg.energy.tx_power_w_max);
  cfg.energy.uplink_bps_min =
      reader.get_double("energy.uplink_mbps_min", cfg.energy.uplink_bps_min / 1e6) * 1e6;
  cfg.energy.uplink_bps_max =
      reader.get_double("energy.uplink_mbps_max", cfg.energy.uplink_bps_max / 1e6) * 1e6;
  cfg.energy.initial_energy_j_min =
      reader.get_double("energy.initial_energy_j_min", cfg.energy.initial_energy_j_min);
  cfg.energy.initial_energy_j_max =
      reader.get_double("energy.initial_energy_j_max", cfg.energy.initial_energy_j_max);
  cfg.fleet_csv = reader.get_string("energy.fleet_csv", cfg.fleet_csv);

  cfg.bench.instances = static_cast<int>(reader.get_int("bench.instances", cfg.bench.instances));
  cfg.bench.sample_cap = static_cast<int>(reader.get_int("bench.sample_cap", cfg.bench.sample_cap));
  cfg.bench.subset_count =
      static_cast<int>(reader.get_int("bench.subset_count", cfg.bench.subset_count));
  cfg.bench.random_draws =
      static_cast<int>(reader.get_int("bench.random_draws", cfg.bench.random_draws));

  try {
    feelsim::validate_config(cfg);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  return loaded;
}

void apply_overrides(KeyMap& map, const std::vector<std::string>& overrides) {
  for (const std::string& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override \"" + ov + "\": expected section.key=value");
    const std::string path = trim(ov.substr(0, eq));
    const std::string value = trim(ov.substr(eq + 1));
    if (path.find('.') == std::string::npos)
      throw ConfigError("override \"" + ov + "\": key must be section.key");
    put_key(map, path, value, "override");
  }
}

}  // namespace

LoadedConfig parse_config_text(const std::string& text, const std::string& origin,
                               const std::vector<std::string>& overrides) {
  const auto first = text.find_first_not_of(" \t\r\n");
  KeyMap map = (first != std::string::npos && text[first] == '{') ? parse_json_config(text, origin)
                                                                  : parse_ini(text, origin);
  apply_overrides(map, overrides);
  ConfigReader reader(std::move(map));
  return build_config(reader);
}

LoadedConfig parse_config(const std::string& path, const std::vector<std::string>& overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path, overrides);
}

std::string format_double(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

json config_to_json(const RunConfig& cfg, bool all_schemes) {
  json j;
  j["run"]["scheme"] = all_schemes ? "all" : scheme_name(cfg.scheme);
  j["run"]["device_count"] = cfg.device_count;
  j["run"]["rounds"] = cfg.rounds;
  j["run"]["trials"] = cfg.trials;
  j["run"]["participants_per_round"] = cfg.participants_per_round;
  j["run"]["subdatasets_per_device"] = cfg.subdatasets_per_device;
  j["run"]["master_seed"] = cfg.master_seed;
  j["run"]["threads"] = cfg.threads;
  j["data"]["source"] =
      cfg.data.source == DataSource::synthetic_blobs ? "synthetic_blobs" : "idx_files";
  j["data"]["class_count"] = cfg.data.class_count;
  j["data"]["feature_dim"] = cfg.data.feature_dim;
  j["data"]["total_train_samples"] = cfg.data.total_train_samples;
  j["data"]["test_fraction"] = cfg.data.test_fraction;
  j["data"]["noniid_shards_per_device"] = cfg.data.noniid_shards_per_device;
  j["data"]["unbalance_factor"] = cfg.data.unbalance_factor;
  j["data"]["blob_stddev"] = cfg.data.blob_stddev;
  if (!cfg.data.idx_images.empty()) j["data"]["idx_images"] = cfg.data.idx_images;
  if (!cfg.data.idx_labels.empty()) j["data"]["idx_labels"] = cfg.data.idx_labels;
  j["training"]["learning_rate"] = cfg.training.learning_rate;
  j["training"]["epochs"] = cfg.training.epochs;
  j["training"]["batch_size"] = cfg.training.batch_size;
  j["training"]["loss"] =
      cfg.training.loss_kind == LossKind::mse_onehot ? "mse_onehot" : "cross_entropy";
  j["training"]["model"] = cfg.training.model_kind == ModelKind::logistic ? "logistic" : "mlp";
  {
    std::string dims;
    for (std::size_t i = 0; i < cfg.training.hidden_dims.size(); ++i) {
      if (i) dims += ",";
      dims += std::to_string(cfg.training.hidden_dims[i]);
    }
    j["training"]["hidden_dims"] = dims;
  }
  j["similarity"]["binarize_threshold"] = cfg.similarity.binarize_threshold;
  j["similarity"]["include_label_token"] = cfg.similarity.include_label_token;
  j["similarity"]["subset_aggregation"] =
      cfg.similarity.subset_aggregation == SubsetAggregation::mean ? "mean" : "max";
  j["selection"]["similarity_weight"] = cfg.selection.similarity_weight;
  j["selection"]["energy_weight"] = cfg.selection.energy_weight;
  j["selection"]["deadline_s"] = cfg.selection.deadline_s;
  j["energy"]["cpu_freq_ghz_min"] = cfg.energy.cpu_freq_hz_min / 1e9;
  j["energy"]["cpu_freq_ghz_max"] = cfg.energy.cpu_freq_hz_max / 1e9;
  j["energy"]["cycles_per_sample_min"] = cfg.energy.cycles_per_sample_min;
  j["energy"]["cycles_per_sample_max"] = cfg.energy.cycles_per_sample_max;
  j["energy"]["alpha"] = cfg.energy.capacitance_alpha;
  j["energy"]["tx_power_w_min"] = cfg.energy.tx_power_w_min;
  j["energy"]["tx_power_w_max"] = cfg.energy.tx_power_w_max;
  j["energy"]["uplink_mbps_min"] = cfg.energy.uplink_bps_min / 1e6;
  j["energy"]["uplink_mbps_max"] = cfg.energy.uplink_bps_max / 1e6;
  j["energy"]["initial_energy_j_min"] = cfg.energy.initial_energy_j_min;
  j["energy"]["initial_energy_j_max"] = cfg.energy.initial_energy_j_max;
  if (!cfg.fleet_csv.empty()) j["energy"]["fleet_csv"] = cfg.fleet_csv;
  j["bench"]["instances"] = cfg.bench.instances;
  j["bench"]["sample_cap"] = cfg.bench.sample_cap;
  j["bench"]["subset_count"] = cfg.bench.subset_count;
  j["bench"]["random_draws"] = cfg.bench.random_draws;
  return j;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);  // '\n' endings on every platform
  if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
  return out;
}

}  // namespace

std::string resolved_config(const LoadedConfig& loaded) {
  return config_to_json(loaded.cfg, loaded.all_schemes).dump(2);
}

void emit_results(const std::vector<std::pair<Scheme, RunReport>>& reports, const RunConfig& cfg,
                  const std::string& out_dir, bool dump_partitions) {
  namespace fs = std::filesystem;
  const fs::path dir(out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw std::runtime_error(out_dir + ": cannot create output directory: " + ec.message());

  {
    auto out = open_out(dir / "metrics.csv");
    out << "scheme,trial,round,accuracy,loss,instant_energy_j,cumulative_energy_j,participants\n";
    for (const auto& [scheme, report] : reports) {
      for (std::size_t t = 0; t < report.trials.size(); ++t) {
        for (const RoundReport& r : report.trials[t].rounds) {
          out << scheme_name(scheme) << ',' << t << ',' << r.round << ','
              << format_double(r.accuracy) << ',' << format_double(r.global_loss) << ','
              << format_double(r.instantaneous_energy_j) << ','
              << format_double(r.cumulative_energy_j) << ',' << r.participant_ids.size() << '\n';
        }
      }
    }
  }

  {
    auto out = open_out(dir / "summary.csv");
    out << "scheme,round,accuracy_mean,accuracy_std,loss_mean,loss_std,"
           "instant_energy_mean,instant_energy_std,cumulative_energy_mean,cumulative_energy_std\n";
    for (const auto& [scheme, report] : reports) {
      for (std::size_t r = 0; r < report.per_round.size(); ++r) {
        const RoundStats& s = report.per_round[r];
        out << scheme_name(scheme) << ',' << (r + 1) << ',' << format_double(s.accuracy_mean)
            << ',' << format_double(s.accuracy_std) << ',' << format_double(s.loss_mean) << ','
            << format_double(s.loss_std) << ',' << format_double(s.instant_energy_mean) << ','
            << format_double(s.instant_energy_std) << ','
            << format_double(s.cumulative_energy_mean) << ','
            << format_double(s.cumulative_energy_std) << '\n';
      }
    }
  }

  // Per-candidate coefficients from the proposed scheme's selection rounds.
  for (const auto& [scheme, report] : reports) {
    if (scheme != Scheme::proposed) continue;
    auto out = open_out(dir / "selection.csv");
    out << "trial,round,device_id,coefficient,selected\n";
    for (std::size_t t = 0; t < report.trials.size(); ++t) {
      for (const SelectionRow& row : report.trials[t].selection_rows) {
        out << t << ',' << row.round << ',' << row.device_id << ','
            << format_double(row.coefficient) << ',' << (row.selected ? 1 : 0) << '\n';
      }
    }
  }

  if (dump_partitions) {
    auto out = open_out(dir / "partitions.jsonl");
    for (const auto& [scheme, report] : reports) {
      if (scheme != Scheme::proposed) continue;
      for (std::size_t t = 0; t < report.trials.size(); ++t) {
        for (const PartitionRecord& rec : report.trials[t].partitions) {
          json j;
          j["trial"] = t;
          j["device_id"] = rec.device_id;
          j["subset_count"] = rec.partition.subset_count;
          j["assignment"] = rec.partition.assignment;
          json sums = json::array();
          for (const SubDatasetSummary& s : rec.summaries) {
            sums.push_back({{"subset_index", s.subset_index},
                            {"size", s.size},
                            {"internal_similarity", s.internal_similarity}});
          }
          j["summaries"] = sums;
          out << j.dump() << '\n';
        }
      }
    }
  }

  {
    json meta;
    meta["artifact"] = kArtifactName;
    meta["version"] = kArtifactVersion;
    meta["master_seed"] = cfg.master_seed;
    bool all = reports.size() > 1;
    meta["config"] = config_to_json(cfg, all);
    json schemes = json::array();
    for (const auto& [scheme, _] : reports) schemes.push_back(scheme_name(scheme));
    meta["schemes_run"] = schemes;
    auto out = open_out(dir / "run_meta.json");
    out << meta.dump(2) << '\n';
  }
}

void split_bench(const RunConfig& cfg, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  auto out = open_out(fs::path(out_dir) / "split_bench.csv");
  out << "instance,size,k,greedy_objective,random_mean_objective,random_max_objective,"
         "exact_objective,greedy_runtime_s,random_runtime_s,exact_runtime_s,note\n";

  // Instances are device datasets from the trial-0 data pipeline, truncated
  // to bench.sample_cap samples.
  GlobalDataSpec data_spec = cfg.data;
  const std::uint64_t seed = trial_seed(cfg.master_seed, 0);
  data_spec.seed = derive_seed(seed, 0xB1);
  std::vector<Sample> pool = (data_spec.source == DataSource::synthetic_blobs)
                                 ? generate_blobs(data_spec)
                                 : load_idx(data_spec.idx_images, data_spec.idx_labels);
  const std::vector<Sample> train =
      split_train_test(pool, data_spec.test_fraction, derive_seed(seed, 0xB2)).first;
  std::vector<LocalDataset> datasets = partition_noniid(train, cfg.device_count, data_spec);

  Rng bench_rng(derive_seed(seed, 0xB3));
  const int k = cfg.bench.subset_count;
  using clock = std::chrono::steady_clock;
  for (int inst = 0; inst < cfg.bench.instances; ++inst) {
    LocalDataset data = datasets[std::size_t(inst) % datasets.size()];
    data.device_id = inst;
    if (static_cast<int>(data.samples.size()) > cfg.bench.sample_cap)
      data.samples.resize(std::size_t(cfg.bench.sample_cap));
    const std::size_t n = data.samples.size();
    if (static_cast<int>(n) < 2 * k) continue;
    const std::vector<TokenSet> tokens = tokenize_all(data, cfg.similarity);

    const auto t0 = clock::now();
    const Partition greedy = split(data, k, cfg.similarity, bench_rng.next_u64());
    const auto t1 = clock::now();
    const double greedy_obj = p1_objective(greedy, tokens);

    double random_sum = 0.0, random_max = 0.0;
    const auto t2 = clock::now();
    for (int d = 0; d < cfg.bench.random_draws; ++d) {
      const Partition rp = random_feasible_partition(n, k, bench_rng);
      const double obj = p1_objective(rp, tokens);
      random_sum += obj;
      random_max = std::max(random_max, obj);
    }
    const auto t3 = clock::now();

    std::string exact_obj, exact_time, note;
    if (n <= 12) {
      const auto t4 = clock::now();
      const Partition exact = split_exact(data, k, cfg.similarity);
      const auto t5 = clock::now();
      exact_obj = format_double(p1_objective(exact, tokens));
      exact_time = format_double(std::chrono::duration<double>(t5 - t4).count());
    } else {
      note = "instance too large";
    }

    out << inst << ',' << n << ',' << k << ',' << format_double(greedy_obj) << ','
        << format_double(random_sum / cfg.bench.random_draws) << ',' << format_double(random_max)
        << ',' << exact_obj << ',' << format_double(std::chrono::duration<double>(t1 - t0).count())
        << ',' << format_double(std::chrono::duration<double>(t3 - t2).count()) << ',' << exact_time
        << ',' << note << '\n';
  }
}

std::vector<std::pair<Scheme, RunReport>> run_and_emit(const LoadedConfig& loaded,
                                                       const std::string& out_dir,
                                                       bool dump_partitions) {
  std::vector<std::pair<Scheme, RunReport>> reports;
  if (loaded.all_schemes) {
    for (Scheme scheme :
         {Scheme::proposed, Scheme::vanilla_feel, Scheme::random_selection}) {
      RunConfig cfg = loaded.cfg;
      cfg.scheme = scheme;
      reports.emplace_back(scheme, run(cfg));
    }
  } else {
    reports.emplace_back(loaded.cfg.scheme, run(loaded.cfg));
  }
  emit_results(reports, loaded.cfg, out_dir, dump_partitions);
  return reports;
}

}  // namespace feelsim
