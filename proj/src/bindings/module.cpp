#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "feelsim/cli_io.hpp"
#include "feelsim/orchestrator.hpp"

namespace py = pybind11;
using namespace feelsim;

namespace {

RunConfig config_from_file(const std::string& path, const std::vector<std::string>& overrides) {
  return parse_config(path, overrides).cfg;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Federated edge learning simulator: Jaccard-based data splitting and "
            "energy-aware participant selection";

  py::register_exception<ConfigError>(m, "ConfigError");

  // data model -------------------------------------------------------------
  py::class_<Sample>(m, "Sample")
      .def(py::init<>())
      .def(py::init([](std::vector<double> features, int label) {
             return Sample{std::move(features), label};
           }),
           py::arg("features"), py::arg("label"))
      .def_readwrite("features", &Sample::features)
      .def_readwrite("label", &Sample::label);

  py::class_<LocalDataset>(m, "LocalDataset")
      .def(py::init<>())
      .def(py::init([](int device_id, std::vector<Sample> samples) {
             return LocalDataset{device_id, std::move(samples)};
           }),
           py::arg("device_id"), py::arg("samples"))
      .def_readwrite("device_id", &LocalDataset::device_id)
      .def_readwrite("samples", &LocalDataset::samples);

  py::enum_<DataSource>(m, "DataSource")
      .value("synthetic_blobs", DataSource::synthetic_blobs)
      .value("idx_files", DataSource::idx_files);

  py::class_<GlobalDataSpec>(m, "GlobalDataSpec")
      .def(py::init<>())
      .def_readwrite("source", &GlobalDataSpec::source)
      .def_readwrite("class_count", &GlobalDataSpec::class_count)
      .def_readwrite("feature_dim", &GlobalDataSpec::feature_dim)
      .def_readwrite("total_train_samples", &GlobalDataSpec::total_train_samples)
      .def_readwrite("test_fraction", &GlobalDataSpec::test_fraction)
      .def_readwrite("noniid_shards_per_device", &GlobalDataSpec::noniid_shards_per_device)
      .def_readwrite("unbalance_factor", &GlobalDataSpec::unbalance_factor)
      .def_readwrite("blob_stddev", &GlobalDataSpec::blob_stddev)
      .def_readwrite("idx_images", &GlobalDataSpec::idx_images)
      .def_readwrite("idx_labels", &GlobalDataSpec::idx_labels)
      .def_readwrite("seed", &GlobalDataSpec::seed);

  m.def("load_idx", &load_idx, py::arg("images_path"), py::arg("labels_path"));
  m.def("generate_blobs", &generate_blobs, py::arg("spec"));
  m.def("split_train_test", &split_train_test, py::arg("samples"), py::arg("test_fraction"),
        py::arg("seed"));
  m.def("partition_noniid", &partition_noniid, py::arg("samples"), py::arg("device_count"),
        py::arg("spec"));

  // similarity ---------------------------------------------------------------
  py::class_<TokenSet>(m, "TokenSet")
      .def(py::init<>())
      .def(py::init([](std::vector<std::int32_t> tokens) { return TokenSet{std::move(tokens)}; }),
           py::arg("tokens"))
      .def_readwrite("tokens", &TokenSet::tokens);

  py::enum_<SubsetAggregation>(m, "SubsetAggregation")
      .value("mean", SubsetAggregation::mean)
      .value("max", SubsetAggregation::max);

  py::class_<SimilarityConfig>(m, "SimilarityConfig")
      .def(py::init<>())
      .def_readwrite("binarize_threshold", &SimilarityConfig::binarize_threshold)
      .def_readwrite("include_label_token", &SimilarityConfig::include_label_token)
      .def_readwrite("subset_aggregation", &SimilarityConfig::subset_aggregation);

  m.def("tokenize", &tokenize, py::arg("sample"), py::arg("cfg") = SimilarityConfig{});
  m.def("jaccard", &jaccard, py::arg("a"), py::arg("b"));
  m.def(
      "similarity_to_subset",
      [](const TokenSet& candidate, const std::vector<TokenSet>& subset,
         const SimilarityConfig& cfg) { return similarity_to_subset(candidate, subset, cfg); },
      py::arg("candidate"), py::arg("subset"), py::arg("cfg") = SimilarityConfig{});
  m.def("p1_objective", &p1_objective, py::arg("partition"), py::arg("tokens"));

  // splitting ----------------------------------------------------------------
  py::class_<Partition>(m, "Partition")
      .def(py::init<>())
      .def_readwrite("subset_count", &Partition::subset_count)
      .def_readwrite("assignment", &Partition::assignment);

  py::class_<SubDatasetSummary>(m, "SubDatasetSummary")
      .def(py::init<>())
      .def_readwrite("device_id", &SubDatasetSummary::device_id)
      .def_readwrite("subset_index", &SubDatasetSummary::subset_index)
      .def_readwrite("size", &SubDatasetSummary::size)
      .def_readwrite("internal_similarity", &SubDatasetSummary::internal_similarity);

  m.def("split", &split, py::arg("dataset"), py::arg("k"), py::arg("cfg") = SimilarityConfig{},
        py::arg("seed") = 0);
  m.def("split_exact", &split_exact, py::arg("dataset"), py::arg("k"),
        py::arg("cfg") = SimilarityConfig{});
  m.def("summarize", &summarize, py::arg("partition"), py::arg("dataset"),
        py::arg("cfg") = SimilarityConfig{});
  m.def("validate_partition", &validate_partition, py::arg("partition"), py::arg("sample_count"));

  // learning -------------------------------------------------------------
  py::enum_<LossKind>(m, "LossKind")
      .value("mse_onehot", LossKind::mse_onehot)
      .value("cross_entropy", LossKind::cross_entropy);

  py::enum_<ModelKind>(m, "ModelKind")
      .value("logistic", ModelKind::logistic)
      .value("mlp", ModelKind::mlp);

  py::class_<TrainingConfig>(m, "TrainingConfig")
      .def(py::init<>())
      .def_readwrite("learning_rate", &TrainingConfig::learning_rate)
      .def_readwrite("epochs", &TrainingConfig::epochs)
      .def_readwrite("batch_size", &TrainingConfig::batch_size)
      .def_readwrite("loss_kind", &TrainingConfig::loss_kind)
      .def_readwrite("model_kind", &TrainingConfig::model_kind)
      .def_readwrite("hidden_dims", &TrainingConfig::hidden_dims);

  py::class_<ModelShape>(m, "ModelShape")
      .def(py::init<>())
      .def_readwrite("feature_dim", &ModelShape::feature_dim)
      .def_readwrite("class_count", &ModelShape::class_count)
      .def_readwrite("hidden", &ModelShape::hidden)
      .def("param_count", &ModelShape::param_count);

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init<>())
      .def_readwrite("shape", &ModelParams::shape)
      .def_readwrite("values", &ModelParams::values);

  py::class_<LocalUpdate>(m, "LocalUpdate")
      .def(py::init<>())
      .def_readwrite("device_id", &LocalUpdate::device_id)
      .def_readwrite("params", &LocalUpdate::params)
      .def_readwrite("sample_count", &LocalUpdate::sample_count)
      .def_readwrite("train_loss", &LocalUpdate::train_loss);

  py::class_<EvalResult>(m, "EvalResult")
      .def_readonly("accuracy", &EvalResult::accuracy)
      .def_readonly("loss", &EvalResult::loss);

  m.def("model_shape", &model_shape, py::arg("cfg"), py::arg("feature_dim"),
        py::arg("class_count"));
  m.def("init_params", &init_params, py::arg("shape"), py::arg("seed"));
  m.def("predict", &predict, py::arg("params"), py::arg("sample"));
  m.def(
      "local_loss",
      [](const ModelParams& p, const std::vector<Sample>& data, const TrainingConfig& cfg) {
        return local_loss(p, data, cfg);
      },
      py::arg("params"), py::arg("data"), py::arg("cfg") = TrainingConfig{});
  m.def(
      "loss_gradient",
      [](const ModelParams& p, const std::vector<Sample>& data, const TrainingConfig& cfg) {
        return loss_gradient(p, data, cfg);
      },
      py::arg("params"), py::arg("data"), py::arg("cfg") = TrainingConfig{});
  m.def(
      "local_train",
      [](const ModelParams& p, const std::vector<Sample>& data, const TrainingConfig& cfg,
         std::uint64_t seed, int device_id) { return local_train(p, data, cfg, seed, device_id); },
      py::arg("params"), py::arg("data"), py::arg("cfg") = TrainingConfig{}, py::arg("seed") = 0,
      py::arg("device_id") = 0);
  m.def("aggregate", &aggregate, py::arg("updates"));
  m.def("global_loss", &global_loss, py::arg("updates"));
  m.def(
      "evaluate",
      [](const ModelParams& p, const std::vector<Sample>& test, const TrainingConfig& cfg) {
        return evaluate(p, test, cfg);
      },
      py::arg("params"), py::arg("test"), py::arg("cfg") = TrainingConfig{});

  // device energy ----------------------------------------------------------
  py::class_<DeviceProfile>(m, "DeviceProfile")
      .def(py::init<>())
      .def_readwrite("device_id", &DeviceProfile::device_id)
      .def_readwrite("cpu_freq_hz", &DeviceProfile::cpu_freq_hz)
      .def_readwrite("cycles_per_sample", &DeviceProfile::cycles_per_sample)
      .def_readwrite("capacitance_alpha", &DeviceProfile::capacitance_alpha)
      .def_readwrite("tx_power_w", &DeviceProfile::tx_power_w)
      .def_readwrite("uplink_bps", &DeviceProfile::uplink_bps)
      .def_readwrite("initial_energy_j", &DeviceProfile::initial_energy_j);

  py::class_<DeviceState>(m, "DeviceState")
      .def(py::init<>())
      .def_readwrite("profile", &DeviceState::profile)
      .def_readwrite("remaining_energy_j", &DeviceState::remaining_energy_j)
      .def_readwrite("alive", &DeviceState::alive);

  py::class_<RoundCosts>(m, "RoundCosts")
      .def(py::init<>())
      .def_readwrite("t_cmp_s", &RoundCosts::t_cmp_s)
      .def_readwrite("t_up_s", &RoundCosts::t_up_s)
      .def_readwrite("e_cmp_j", &RoundCosts::e_cmp_j)
      .def_readwrite("e_up_j", &RoundCosts::e_up_j)
      .def("total_time_s", &RoundCosts::total_time_s)
      .def("total_energy_j", &RoundCosts::total_energy_j);

  m.def("compute_time", &compute_time, py::arg("profile"), py::arg("sample_count"),
        py::arg("epochs"));
  m.def("compute_energy", &compute_energy, py::arg("profile"), py::arg("sample_count"),
        py::arg("epochs"));
  m.def("upload_time", &upload_time, py::arg("profile"), py::arg("model_bits"));
  m.def("upload_energy", &upload_energy, py::arg("profile"), py::arg("model_bits"));
  m.def("round_costs", &round_costs, py::arg("profile"), py::arg("sample_count"),
        py::arg("epochs"), py::arg("model_bits"));
  m.def(
      "feasible",
      [](const DeviceState& st, const RoundCosts& costs, double deadline_s) {
        return feasible(st, costs, deadline_s);
      },
      py::arg("state"), py::arg("costs"), py::arg("deadline_s"));
  m.def("charge", &charge, py::arg("state"), py::arg("costs"));

  // selection ---------------------------------------------------------------
  py::class_<NodeReport>(m, "NodeReport")
      .def(py::init<>())
      .def_readwrite("device_id", &NodeReport::device_id)
      .def_readwrite("subdataset_summaries", &NodeReport::subdataset_summaries)
      .def_readwrite("remaining_energy_j", &NodeReport::remaining_energy_j)
      .def_readwrite("round_costs", &NodeReport::round_costs)
      .def_readwrite("best_similarity", &NodeReport::best_similarity);

  py::class_<SelectionConfig>(m, "SelectionConfig")
      .def(py::init<>())
      .def_readwrite("participants_per_round", &SelectionConfig::participants_per_round)
      .def_readwrite("similarity_weight", &SelectionConfig::similarity_weight)
      .def_readwrite("energy_weight", &SelectionConfig::energy_weight)
      .def_readwrite("deadline_s", &SelectionConfig::deadline_s);

  py::class_<SelectionResult>(m, "SelectionResult")
      .def(py::init<>())
      .def_readwrite("selected", &SelectionResult::selected)
      .def_readwrite("coefficients", &SelectionResult::coefficients)
      .def_readwrite("excluded_infeasible", &SelectionResult::excluded_infeasible);

  m.def("select", &feelsim::select, py::arg("reports"), py::arg("cfg"));
  m.def("p2_objective", &p2_objective, py::arg("result"), py::arg("reports"));

  // orchestrator + io ---------------------------------------------------------
  py::enum_<Scheme>(m, "Scheme")
      .value("proposed", Scheme::proposed)
      .value("vanilla_feel", Scheme::vanilla_feel)
      .value("random_selection", Scheme::random_selection);

  py::class_<BenchConfig>(m, "BenchConfig")
      .def(py::init<>())
      .def_readwrite("instances", &BenchConfig::instances)
      .def_readwrite("sample_cap", &BenchConfig::sample_cap)
      .def_readwrite("subset_count", &BenchConfig::subset_count)
      .def_readwrite("random_draws", &BenchConfig::random_draws);

  py::class_<ProfileRanges>(m, "ProfileRanges")
      .def(py::init<>())
      .def_readwrite("cpu_freq_hz_min", &ProfileRanges::cpu_freq_hz_min)
      .def_readwrite("cpu_freq_hz_max", &ProfileRanges::cpu_freq_hz_max)
      .def_readwrite("cycles_per_sample_min", &ProfileRanges::cycles_per_sample_min)
      .def_readwrite("cycles_per_sample_max", &ProfileRanges::cycles_per_sample_max)
      .def_readwrite("capacitance_alpha", &ProfileRanges::capacitance_alpha)
      .def_readwrite("tx_power_w_min", &ProfileRanges::tx_power_w_min)
      .def_readwrite("tx_power_w_max", &ProfileRanges::tx_power_w_max)
      .def_readwrite("uplink_bps_min", &ProfileRanges::uplink_bps_min)
      .def_readwrite("uplink_bps_max", &ProfileRanges::uplink_bps_max)
      .def_readwrite("initial_energy_j_min", &ProfileRanges::initial_energy_j_min)
      .def_readwrite("initial_energy_j_max", &ProfileRanges::initial_energy_j_max);

  m.def("generate_fleet", &generate_fleet, py::arg("device_count"), py::arg("ranges"),
        py::arg("seed"));
  m.def("load_fleet_csv", &load_fleet_csv, py::arg("path"));

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("scheme", &RunConfig::scheme)
      .def_readwrite("device_count", &RunConfig::device_count)
      .def_readwrite("rounds", &RunConfig::rounds)
      .def_readwrite("trials", &RunConfig::trials)
      .def_readwrite("participants_per_round", &RunConfig::participants_per_round)
      .def_readwrite("subdatasets_per_device", &RunConfig::subdatasets_per_device)
      .def_readwrite("master_seed", &RunConfig::master_seed)
      .def_readwrite("threads", &RunConfig::threads)
      .def_readwrite("data", &RunConfig::data)
      .def_readwrite("training", &RunConfig::training)
      .def_readwrite("similarity", &RunConfig::similarity)
      .def_readwrite("selection", &RunConfig::selection)
      .def_readwrite("energy", &RunConfig::energy)
      .def_readwrite("fleet_csv", &RunConfig::fleet_csv)
      .def_readwrite("bench", &RunConfig::bench);

  py::class_<RoundReport>(m, "RoundReport")
      .def_readonly("round", &RoundReport::round)
      .def_readonly("accuracy", &RoundReport::accuracy)
      .def_readonly("global_loss", &RoundReport::global_loss)
      .def_readonly("instantaneous_energy_j", &RoundReport::instantaneous_energy_j)
      .def_readonly("cumulative_energy_j", &RoundReport::cumulative_energy_j)
      .def_readonly("participant_ids", &RoundReport::participant_ids)
      .def_readonly("dropped_ids", &RoundReport::dropped_ids);

  py::class_<RoundStats>(m, "RoundStats")
      .def_readonly("accuracy_mean", &RoundStats::accuracy_mean)
      .def_readonly("accuracy_std", &RoundStats::accuracy_std)
      .def_readonly("loss_mean", &RoundStats::loss_mean)
      .def_readonly("loss_std", &RoundStats::loss_std)
      .def_readonly("instant_energy_mean", &RoundStats::instant_energy_mean)
      .def_readonly("instant_energy_std", &RoundStats::instant_energy_std)
      .def_readonly("cumulative_energy_mean", &RoundStats::cumulative_energy_mean)
      .def_readonly("cumulative_energy_std", &RoundStats::cumulative_energy_std);

  py::class_<SelectionRow>(m, "SelectionRow")
      .def_readonly("round", &SelectionRow::round)
      .def_readonly("device_id", &SelectionRow::device_id)
      .def_readonly("coefficient", &SelectionRow::coefficient)
      .def_readonly("selected", &SelectionRow::selected);

  py::class_<TrialOutput>(m, "TrialOutput")
      .def_readonly("rounds", &TrialOutput::rounds)
      .def_readonly("selection_rows", &TrialOutput::selection_rows)
      .def_readonly("died_device_ids", &TrialOutput::died_device_ids)
      .def_readonly("charged_by_device", &TrialOutput::charged_by_device);

  py::class_<RunReport>(m, "RunReport")
      .def_readonly("trials", &RunReport::trials)
      .def_readonly("per_round", &RunReport::per_round);

  m.def("validate_config", &validate_config, py::arg("cfg"));
  m.def("run_trial", &run_trial, py::arg("cfg"), py::arg("trial_seed"));
  m.def("trial_seed", &trial_seed, py::arg("master_seed"), py::arg("trial_index"));
  m.def("run", &run, py::arg("cfg"), py::call_guard<py::gil_scoped_release>());

  m.def("parse_config", &config_from_file, py::arg("path"),
        py::arg("overrides") = std::vector<std::string>{});
  m.def(
      "run_from_config",
      [](const std::string& path, const std::vector<std::string>& overrides,
         const std::string& out_dir, bool dump_partitions) {
        const LoadedConfig loaded = parse_config(path, overrides);
        py::gil_scoped_release release;
        run_and_emit(loaded, out_dir, dump_partitions);
      },
      py::arg("path"), py::arg("overrides") = std::vector<std::string>{}, py::arg("out_dir"),
      py::arg("dump_partitions") = false);

  m.attr("__version__") = "0.1.0";
}
