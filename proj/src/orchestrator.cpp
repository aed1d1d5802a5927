#include "feelsim/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "feelsim/rng.hpp"

namespace feelsim {

namespace {

// Seed-stream tags; every random decision in a trial hangs off one of these.
constexpr std::uint64_t kDataTag = 0x01;
constexpr std::uint64_t kTestSplitTag = 0x02;
constexpr std::uint64_t kFleetTag = 0x03;
constexpr std::uint64_t kInitTag = 0x04;
constexpr std::uint64_t kSplitTag = 0x05;
constexpr std::uint64_t kTrainTag = 0x06;
constexpr std::uint64_t kRandomSelectTag = 0x07;

struct DeviceRuntime {
  DeviceState state;
  LocalDataset dataset;
  Partition partition;                        // proposed scheme only
  std::vector<SubDatasetSummary> summaries;   // proposed scheme only
  double best_similarity = 0.0;
  int rotation = 0;  // next sub-dataset index (proposed)
  std::vector<std::vector<Sample>> subdatasets;
};

std::vector<Sample> collect_subset(const LocalDataset& dataset, const Partition& partition,
                                   int subset_index) {
  std::vector<Sample> out;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i)
    if (partition.assignment[i] == subset_index) out.push_back(dataset.samples[i]);
  return out;
}

}  // namespace

const char* scheme_name(Scheme scheme) {
  switch (scheme) {
    case Scheme::proposed: return "proposed";
    case Scheme::vanilla_feel: return "vanilla_feel";
    case Scheme::random_selection: return "random_selection";
  }
  return "unknown";
}

void validate_config(const RunConfig& cfg) {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (cfg.rounds < 1) fail("rounds must be >= 1");
  if (cfg.trials < 1) fail("trials must be >= 1");
  if (cfg.device_count < 1) fail("device_count must be >= 1");
  if (cfg.participants_per_round < 1) fail("participants_per_round must be >= 1");
  if (cfg.device_count < cfg.participants_per_round)
    fail("device_count must be >= participants_per_round");
  if (cfg.subdatasets_per_device < 1) fail("subdatasets_per_device must be >= 1");
  if (cfg.data.class_count < 2) fail("data.class_count must be >= 2");
  if (cfg.data.feature_dim < 1) fail("data.feature_dim must be >= 1");
  if (cfg.data.total_train_samples < 1) fail("data.total_train_samples must be >= 1");
  if (cfg.data.test_fraction <= 0.0 || cfg.data.test_fraction >= 1.0)
    fail("data.test_fraction must be inside (0,1)");
  if (cfg.data.noniid_shards_per_device < 1) fail("data.noniid_shards_per_device must be >= 1");
  if (cfg.data.unbalance_factor < 1.0) fail("data.unbalance_factor must be >= 1");
  if (cfg.data.blob_stddev < 0.0) fail("data.blob_stddev must be >= 0");
  if (cfg.data.source == DataSource::idx_files &&
      (cfg.data.idx_images.empty() || cfg.data.idx_labels.empty()))
    fail("data.idx_images and data.idx_labels are required when data.source = idx_files");
  if (cfg.training.learning_rate <= 0.0) fail("training.learning_rate must be > 0");
  if (cfg.training.epochs < 1) fail("training.epochs must be >= 1");
  if (cfg.training.batch_size < 1) fail("training.batch_size must be >= 1");
  if (cfg.training.model_kind == ModelKind::mlp) {
    if (cfg.training.hidden_dims.size() != 1 || cfg.training.hidden_dims[0] < 1)
      fail("training.hidden_dims must name one positive hidden width for the mlp model");
  }
  if (cfg.similarity.binarize_threshold <= 0.0 || cfg.similarity.binarize_threshold >= 1.0)
    fail("similarity.binarize_threshold must be inside (0,1)");
  if (cfg.selection.similarity_weight < 0.0 || cfg.selection.energy_weight < 0.0)
    fail("selection weights must be >= 0");
  if (cfg.selection.similarity_weight + cfg.selection.energy_weight <= 0.0)
    fail("selection.similarity_weight + selection.energy_weight must be > 0");
  if (cfg.selection.deadline_s <= 0.0) fail("selection.deadline_s must be > 0");
  auto range_ok = [&](double lo, double hi) { return lo > 0.0 && hi >= lo; };
  if (!range_ok(cfg.energy.cpu_freq_hz_min, cfg.energy.cpu_freq_hz_max))
    fail("energy.cpu_freq range invalid");
  if (!range_ok(cfg.energy.cycles_per_sample_min, cfg.energy.cycles_per_sample_max))
    fail("energy.cycles_per_sample range invalid");
  if (cfg.energy.capacitance_alpha <= 0.0) fail("energy.alpha must be > 0");
  if (!range_ok(cfg.energy.tx_power_w_min, cfg.energy.tx_power_w_max))
    fail("energy.tx_power range invalid");
  if (!range_ok(cfg.energy.uplink_bps_min, cfg.energy.uplink_bps_max))
    fail("energy.uplink range invalid");
  if (!range_ok(cfg.energy.initial_energy_j_min, cfg.energy.initial_energy_j_max))
    fail("energy.initial_energy range invalid");
  if (cfg.bench.instances < 1) fail("bench.instances must be >= 1");
  if (cfg.bench.sample_cap < 2) fail("bench.sample_cap must be >= 2");
  if (cfg.bench.subset_count < 1) fail("bench.subset_count must be >= 1");
  if (cfg.bench.random_draws < 1) fail("bench.random_draws must be >= 1");
}

std::uint64_t trial_seed(std::uint64_t master_seed, int trial_index) {
  return derive_seed(master_seed, 0x7452, static_cast<std::uint64_t>(trial_index));
}

TrialOutput run_trial_full(const RunConfig& cfg, std::uint64_t seed) {
  validate_config(cfg);
  TrialOutput out;
  out.charged_by_device.assign(std::size_t(cfg.device_count), 0.0);

  // Data pipeline: global pool -> server-held test split -> non-IID devices.
  GlobalDataSpec data_spec = cfg.data;
  data_spec.seed = derive_seed(seed, kDataTag);
  std::vector<Sample> pool = (data_spec.source == DataSource::synthetic_blobs)
                                 ? generate_blobs(data_spec)
                                 : load_idx(data_spec.idx_images, data_spec.idx_labels);
  auto [train, test] =
      split_train_test(pool, data_spec.test_fraction, derive_seed(seed, kTestSplitTag));
  std::vector<LocalDataset> datasets = partition_noniid(train, cfg.device_count, data_spec);

  // Fleet.
  std::vector<DeviceProfile> profiles =
      cfg.fleet_csv.empty() ? generate_fleet(cfg.device_count, cfg.energy, derive_seed(seed, kFleetTag))
                            : load_fleet_csv(cfg.fleet_csv);
  if (static_cast<int>(profiles.size()) != cfg.device_count)
    throw std::invalid_argument("fleet size does not match device_count");
  for (int i = 0; i < cfg.device_count; ++i) {
    if (profiles[i].device_id != i)
      throw std::invalid_argument("fleet device ids must be 0..device_count-1 in order");
  }

  std::vector<DeviceRuntime> devices(cfg.device_count);
  for (int i = 0; i < cfg.device_count; ++i) {
    devices[i].state = DeviceState{profiles[i], profiles[i].initial_energy_j, true};
    devices[i].dataset = std::move(datasets[i]);
  }

  // Proposed scheme: every node splits its data up front and
  // keeps per-sub-dataset similarity summaries for its reports.
  const bool uses_split = cfg.scheme == Scheme::proposed;
  if (uses_split) {
    for (DeviceRuntime& dev : devices) {
      const int wanted = cfg.subdatasets_per_device;
      const int feasible_k =
          std::max(1, std::min<int>(wanted, static_cast<int>(dev.dataset.samples.size() / 2)));
      dev.partition =
          split(dev.dataset, feasible_k, cfg.similarity,
                derive_seed(seed, kSplitTag, static_cast<std::uint64_t>(dev.dataset.device_id)));
      dev.summaries = summarize(dev.partition, dev.dataset, cfg.similarity);
      dev.best_similarity = 1.0;
      for (const SubDatasetSummary& s : dev.summaries)
        dev.best_similarity = std::min(dev.best_similarity, s.internal_similarity);
      for (int d = 0; d < dev.partition.subset_count; ++d)
        dev.subdatasets.push_back(collect_subset(dev.dataset, dev.partition, d));
      out.partitions.push_back({dev.dataset.device_id, dev.partition, dev.summaries});
    }
  }

  // Model.
  const int class_count = cfg.data.class_count;
  const ModelShape shape = model_shape(cfg.training, cfg.data.feature_dim, class_count);
  ModelParams global = init_params(shape, derive_seed(seed, kInitTag));
  const double model_bits = 32.0 * static_cast<double>(global.values.size());

  SelectionConfig sel_cfg = cfg.selection;
  sel_cfg.participants_per_round = cfg.participants_per_round;

  // Carry-over metrics for rounds where nothing trains. Before the first
  // trained round those describe the initial model.
  double cumulative_energy = 0.0;
  const EvalResult initial_eval = evaluate(global, test, cfg.training);
  double last_accuracy = initial_eval.accuracy;
  double last_loss = initial_eval.loss;

  for (int round = 1; round <= cfg.rounds; ++round) {
    // Candidate reports from alive devices; costs describe the data each
    // device would train this round.
    std::vector<NodeReport> reports;
    std::vector<int> dead_or_infeasible;
    for (DeviceRuntime& dev : devices) {
      if (!dev.state.alive) {
        dead_or_infeasible.push_back(dev.state.profile.device_id);
        continue;
      }
      NodeReport r;
      r.device_id = dev.state.profile.device_id;
      r.remaining_energy_j = dev.state.remaining_energy_j;
      long long count;
      if (uses_split) {
        r.subdataset_summaries = dev.summaries;
        r.best_similarity = dev.best_similarity;
        count = static_cast<long long>(dev.subdatasets[dev.rotation].size());
      } else {
        count = static_cast<long long>(dev.dataset.samples.size());
      }
      r.round_costs = round_costs(dev.state.profile, count, cfg.training.epochs, model_bits);
      reports.push_back(std::move(r));
    }

    // Scheme-specific participant choice; all schemes honor feasibility.
    std::vector<int> participants;
    std::vector<int> dropped = dead_or_infeasible;
    if (!reports.empty()) {
      if (cfg.scheme == Scheme::proposed) {
        const SelectionResult sel = select(reports, sel_cfg);
        participants = sel.selected;
        dropped.insert(dropped.end(), sel.excluded_infeasible.begin(),
                       sel.excluded_infeasible.end());
        std::vector<bool> is_selected(cfg.device_count, false);
        for (int id : sel.selected) is_selected[id] = true;
        for (const auto& [id, coeff] : sel.coefficients)
          out.selection_rows.push_back({round, id, coeff, is_selected[id]});
      } else {
        std::vector<int> feasible_ids;
        for (const NodeReport& r : reports) {
          if (feasible(r.remaining_energy_j, r.round_costs, sel_cfg.deadline_s))
            feasible_ids.push_back(r.device_id);
          else
            dropped.push_back(r.device_id);
        }
        std::sort(feasible_ids.begin(), feasible_ids.end());
        if (cfg.scheme == Scheme::vanilla_feel) {
          participants = feasible_ids;
        } else if (!feasible_ids.empty()) {
          Rng sel_rng(derive_seed(seed, kRandomSelectTag, static_cast<std::uint64_t>(round)));
          const std::size_t n = std::min<std::size_t>(feasible_ids.size(),
                                                      std::size_t(cfg.participants_per_round));
          for (std::size_t i : sel_rng.sample_without_replacement(feasible_ids.size(), n))
            participants.push_back(feasible_ids[i]);
          std::sort(participants.begin(), participants.end());
        }
      }
    }
    std::sort(dropped.begin(), dropped.end());

    RoundReport report;
    report.round = round;
    report.participant_ids = participants;
    report.dropped_ids = dropped;

    if (participants.empty()) {
      // Nothing trains: the model and its metrics carry over, no energy moves.
      report.accuracy = last_accuracy;
      report.global_loss = last_loss;
      report.instantaneous_energy_j = 0.0;
      report.cumulative_energy_j = cumulative_energy;
      out.rounds.push_back(std::move(report));
      continue;
    }

    std::vector<LocalUpdate> updates;
    double round_energy = 0.0;
    for (int id : participants) {
      DeviceRuntime& dev = devices[id];
      std::span<const Sample> round_data;
      if (uses_split) {
        round_data = dev.subdatasets[dev.rotation];
        dev.rotation = (dev.rotation + 1) % dev.partition.subset_count;
      } else {
        round_data = dev.dataset.samples;
      }
      const std::uint64_t train_seed =
          derive_seed(seed, kTrainTag,
                      static_cast<std::uint64_t>(round) * 1000003ULL + static_cast<std::uint64_t>(id));
      updates.push_back(local_train(global, round_data, cfg.training, train_seed, id));

      const RoundCosts costs =
          round_costs(dev.state.profile, static_cast<long long>(round_data.size()),
                      cfg.training.epochs, model_bits);
      if (costs.total_time_s() > sel_cfg.deadline_s)
        throw std::logic_error("participant exceeds the round deadline; selection bug");
      dev.state = charge(dev.state, costs);
      if (!dev.state.alive) out.died_device_ids.push_back(id);
      out.charged_by_device[std::size_t(id)] += costs.total_energy_j();
      round_energy += costs.total_energy_j();
    }

    global = aggregate(updates);
    report.global_loss = global_loss(updates);
    const EvalResult ev = evaluate(global, test, cfg.training);
    report.accuracy = ev.accuracy;

    cumulative_energy += round_energy;
    report.instantaneous_energy_j = round_energy;
    report.cumulative_energy_j = cumulative_energy;
    last_accuracy = report.accuracy;
    last_loss = report.global_loss;
    out.rounds.push_back(std::move(report));
  }
  out.final_states.reserve(devices.size());
  for (const DeviceRuntime& dev : devices) out.final_states.push_back(dev.state);
  return out;
}

std::vector<RoundReport> run_trial(const RunConfig& cfg, std::uint64_t seed) {
  return run_trial_full(cfg, seed).rounds;
}

RunReport run(const RunConfig& cfg) {
  validate_config(cfg);
  RunReport report;
  report.trials.resize(cfg.trials);

  int workers = cfg.threads > 0 ? cfg.threads
                                : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, cfg.trials));
  if (workers == 1) {
    for (int t = 0; t < cfg.trials; ++t)
      report.trials[t] = run_trial_full(cfg, trial_seed(cfg.master_seed, t));
  } else {
    // Trials are independent; results are collected by index so completion
    // order cannot affect the report.
    std::vector<std::future<TrialOutput>> futures;
    futures.reserve(cfg.trials);
    for (int t = 0; t < cfg.trials; ++t) {
      futures.push_back(std::async(std::launch::async, [&cfg, t] {
        return run_trial_full(cfg, trial_seed(cfg.master_seed, t));
      }));
    }
    for (int t = 0; t < cfg.trials; ++t) report.trials[t] = futures[t].get();
  }

  report.per_round.resize(cfg.rounds);
  const double n = static_cast<double>(cfg.trials);
  for (int r = 0; r < cfg.rounds; ++r) {
    auto stat = [&](auto&& get) {
      double mean = 0.0;
      for (const TrialOutput& t : report.trials) mean += get(t.rounds[r]);
      mean /= n;
      double var = 0.0;
      for (const TrialOutput& t : report.trials) {
        const double d = get(t.rounds[r]) - mean;
        var += d * d;
      }
      return std::pair<double, double>(mean, std::sqrt(var / n));  // population std
    };
    RoundStats& s = report.per_round[r];
    std::tie(s.accuracy_mean, s.accuracy_std) =
        stat([](const RoundReport& rr) { return rr.accuracy; });
    std::tie(s.loss_mean, s.loss_std) =
        stat([](const RoundReport& rr) { return rr.global_loss; });
    std::tie(s.instant_energy_mean, s.instant_energy_std) =
        stat([](const RoundReport& rr) { return rr.instantaneous_energy_j; });
    std::tie(s.cumulative_energy_mean, s.cumulative_energy_std) =
        stat([](const RoundReport& rr) { return rr.cumulative_energy_j; });
  }
  return report;
}

}  // namespace feelsim
