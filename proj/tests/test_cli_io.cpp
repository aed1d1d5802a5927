#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "feelsim/cli_io.hpp"

using namespace feelsim;

namespace {

std::filesystem::path temp_file(const std::string& name, const std::string& contents) {
  const auto path = std::filesystem::temp_directory_path() / name;
  std::ofstream out(path);
  out << contents;
  return path;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

RunConfig fast_config() {
  RunConfig cfg;
  cfg.device_count = 5;
  cfg.rounds = 3;
  cfg.trials = 2;
  cfg.participants_per_round = 2;
  cfg.subdatasets_per_device = 2;
  cfg.data.class_count = 2;
  cfg.data.feature_dim = 4;
  cfg.data.total_train_samples = 120;
  cfg.data.noniid_shards_per_device = 2;
  cfg.training.epochs = 1;
  return cfg;
}

}  // namespace

TEST_CASE("minimal config fills documented defaults") {
  const auto path = temp_file("feelsim-minimal.ini", "");
  const LoadedConfig loaded = parse_config(path.string(), {});
  CHECK(loaded.cfg.scheme == Scheme::proposed);
  CHECK_FALSE(loaded.all_schemes);
  CHECK(loaded.cfg.device_count == 20);
  CHECK(loaded.cfg.rounds == 100);
  CHECK(loaded.cfg.trials == 5);
  CHECK(loaded.cfg.training.learning_rate == doctest::Approx(0.001));
  CHECK(loaded.cfg.training.loss_kind == LossKind::mse_onehot);
  CHECK(loaded.cfg.similarity.binarize_threshold == doctest::Approx(0.5));
  CHECK(loaded.cfg.selection.participants_per_round == loaded.cfg.participants_per_round);
}

TEST_CASE("overrides apply last and are type-checked") {
  const auto path = temp_file("feelsim-override.ini",
                              "[training]\nlearning_rate = 0.5\n");
  const LoadedConfig loaded =
      parse_config(path.string(), {"training.learning_rate=0.001", "run.trials=2"});
  CHECK(loaded.cfg.training.learning_rate == doctest::Approx(0.001));
  CHECK(loaded.cfg.trials == 2);

  CHECK_THROWS_AS(parse_config(path.string(), {"training.learning_rate=banana"}), ConfigError);
  CHECK_THROWS_AS(parse_config(path.string(), {"nosection"}), ConfigError);
}

TEST_CASE("unknown keys are rejected with their location") {
  const auto path = temp_file("feelsim-unknown.ini", "[foo]\nbar = 1\n");
  CHECK_THROWS_WITH_AS(parse_config(path.string(), {}), doctest::Contains("foo.bar"), ConfigError);

  const auto path2 = temp_file("feelsim-unknown2.ini", "[run]\nrounds = 5\nbogus = 1\n");
  try {
    parse_config(path2.string(), {});
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string what = e.what();
    CHECK(what.find("run.bogus") != std::string::npos);
    CHECK(what.find(":3") != std::string::npos);  // line number
  }
}

TEST_CASE("inline comments are stripped from values") {
  const auto path = temp_file("feelsim-inline.ini",
                              "[run]\nrounds = 7  # desk default\ntrials = 2\t; tab comment\n");
  const LoadedConfig loaded = parse_config(path.string(), {});
  CHECK(loaded.cfg.rounds == 7);
  CHECK(loaded.cfg.trials == 2);
}

TEST_CASE("config syntax errors carry line numbers") {
  const auto path = temp_file("feelsim-syntax.ini", "[run\nrounds = 5\n");
  CHECK_THROWS_WITH_AS(parse_config(path.string(), {}), doctest::Contains(":1"), ConfigError);
  const auto path2 = temp_file("feelsim-syntax2.ini", "[run]\nrounds 5\n");
  CHECK_THROWS_WITH_AS(parse_config(path2.string(), {}), doctest::Contains(":2"), ConfigError);
  const auto path3 = temp_file("feelsim-orphan.ini", "rounds = 5\n");
  CHECK_THROWS_WITH_AS(parse_config(path3.string(), {}), doctest::Contains("section"), ConfigError);
}

TEST_CASE("invariant violations name the offending key") {
  const auto path = temp_file("feelsim-invariant.ini", "[data]\ntest_fraction = 1.5\n");
  CHECK_THROWS_WITH_AS(parse_config(path.string(), {}), doctest::Contains("test_fraction"),
                       ConfigError);
}

TEST_CASE("emit_results writes well-formed CSVs and a reproducible run_meta") {
  const RunConfig cfg = fast_config();
  RunConfig run_cfg = cfg;
  run_cfg.scheme = Scheme::vanilla_feel;
  const RunReport report = run(run_cfg);
  const auto out_dir = std::filesystem::temp_directory_path() / "feelsim-emit";
  std::filesystem::remove_all(out_dir);
  emit_results({{Scheme::vanilla_feel, report}}, run_cfg, out_dir.string());

  const auto metrics = lines_of(read_file(out_dir / "metrics.csv"));
  // header + trials * rounds rows per scheme
  CHECK(metrics.size() == 1 + std::size_t(cfg.trials) * std::size_t(cfg.rounds));
  CHECK(metrics[0] ==
        "scheme,trial,round,accuracy,loss,instant_energy_j,cumulative_energy_j,participants");
  const auto count_commas = [](const std::string& s) {
    return std::count(s.begin(), s.end(), ',');
  };
  for (const auto& line : metrics) {
    CHECK(count_commas(line) == 7);  // constant column count
    CHECK(line.find(';') == std::string::npos);
  }

  const auto summary = lines_of(read_file(out_dir / "summary.csv"));
  CHECK(summary.size() == 1 + std::size_t(cfg.rounds));

  // summary mean at round r equals the arithmetic mean of the trial rows
  {
    std::istringstream row(summary[1]);
    std::string field;
    std::getline(row, field, ',');  // scheme
    std::getline(row, field, ',');  // round
    std::getline(row, field, ',');  // accuracy_mean
    const double mean = std::stod(field);
    double expect = 0.0;
    for (const auto& t : report.trials) expect += t.rounds[0].accuracy;
    expect /= double(report.trials.size());
    CHECK(mean == doctest::Approx(expect).epsilon(1e-12));
  }

  SUBCASE("run_meta.json round-trips into an equivalent RunConfig") {
    const auto meta_path = out_dir / "run_meta.json";
    const LoadedConfig reloaded = parse_config(meta_path.string(), {});
    CHECK(reloaded.cfg.device_count == cfg.device_count);
    CHECK(reloaded.cfg.rounds == cfg.rounds);
    CHECK(reloaded.cfg.trials == cfg.trials);
    CHECK(reloaded.cfg.master_seed == cfg.master_seed);
    CHECK(reloaded.cfg.data.total_train_samples == cfg.data.total_train_samples);
    CHECK(reloaded.cfg.training.learning_rate == cfg.training.learning_rate);
    CHECK(reloaded.cfg.scheme == Scheme::vanilla_feel);

    // Re-running from the round-tripped config reproduces identical bytes.
    RunConfig again_cfg = reloaded.cfg;
    const RunReport again = run(again_cfg);
    const auto out2 = std::filesystem::temp_directory_path() / "feelsim-emit2";
    std::filesystem::remove_all(out2);
    emit_results({{Scheme::vanilla_feel, again}}, again_cfg, out2.string());
    CHECK(read_file(out2 / "metrics.csv") == read_file(out_dir / "metrics.csv"));
  }
}

TEST_CASE("proposed-scheme emission includes selection rows and optional partitions") {
  RunConfig cfg = fast_config();
  cfg.scheme = Scheme::proposed;
  const RunReport report = run(cfg);
  const auto out_dir = std::filesystem::temp_directory_path() / "feelsim-emit-prop";
  std::filesystem::remove_all(out_dir);
  emit_results({{Scheme::proposed, report}}, cfg, out_dir.string(), /*dump_partitions=*/true);

  const auto selection = lines_of(read_file(out_dir / "selection.csv"));
  CHECK(selection[0] == "trial,round,device_id,coefficient,selected");
  CHECK(selection.size() > 1);

  const auto partitions = lines_of(read_file(out_dir / "partitions.jsonl"));
  CHECK(partitions.size() == std::size_t(cfg.trials) * std::size_t(cfg.device_count));
  CHECK(partitions[0].find("\"device_id\"") != std::string::npos);
}

TEST_CASE("format_double uses '.' and round-trips") {
  CHECK(format_double(0.5) == "0.5");
  CHECK(format_double(-3.0) == "-3");
  CHECK(std::stod(format_double(1.0 / 3.0)) == doctest::Approx(1.0 / 3.0).epsilon(1e-16));
  CHECK(format_double(1e-12).find(',') == std::string::npos);
}

TEST_CASE("split_bench emits objectives with the exact column guarded by size") {
  RunConfig cfg = fast_config();
  cfg.bench.instances = 6;
  cfg.bench.sample_cap = 8;
  cfg.bench.subset_count = 2;
  cfg.bench.random_draws = 8;

  const auto out_dir = std::filesystem::temp_directory_path() / "feelsim-bench";
  std::filesystem::remove_all(out_dir);
  split_bench(cfg, out_dir.string());
  const auto lines = lines_of(read_file(out_dir / "split_bench.csv"));
  REQUIRE(lines.size() > 1);
  CHECK(lines[0] ==
        "instance,size,k,greedy_objective,random_mean_objective,random_max_objective,"
        "exact_objective,greedy_runtime_s,random_runtime_s,exact_runtime_s,note");

  for (std::size_t i = 1; i < lines.size(); ++i) {
    std::istringstream row(lines[i]);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(row, field, ',')) fields.push_back(field);
    REQUIRE(fields.size() >= 10);
    const double greedy = std::stod(fields[3]);
    const double random_max = std::stod(fields[5]);
    const double exact = std::stod(fields[6]);
    CHECK(exact <= greedy + 1e-12);
    CHECK(greedy <= random_max + 1e-12);
  }

  SUBCASE("oversized instances leave the exact column empty with a reason") {
    RunConfig big = cfg;
    big.bench.sample_cap = 15;  // beyond the exact-solver limit
    const auto out2 = std::filesystem::temp_directory_path() / "feelsim-bench2";
    std::filesystem::remove_all(out2);
    split_bench(big, out2.string());
    const auto lines2 = lines_of(read_file(out2 / "split_bench.csv"));
    bool saw_reason = false;
    for (std::size_t i = 1; i < lines2.size(); ++i) {
      if (lines2[i].find("instance too large") != std::string::npos) {
        saw_reason = true;
        std::istringstream row(lines2[i]);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(row, field, ',')) fields.push_back(field);
        CHECK(fields[6].empty());  // exact_objective column
      }
    }
    CHECK(saw_reason);
  }

  SUBCASE("bench output is deterministic under a fixed seed") {
    const auto out3 = std::filesystem::temp_directory_path() / "feelsim-bench3";
    std::filesystem::remove_all(out3);
    split_bench(cfg, out3.string());
    // Runtime columns are wall-clock; compare everything else.
    const auto a = lines_of(read_file(out_dir / "split_bench.csv"));
    const auto b = lines_of(read_file(out3 / "split_bench.csv"));
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      std::istringstream ra(a[i]), rb(b[i]);
      std::vector<std::string> fa, fb;
      std::string f;
      while (std::getline(ra, f, ',')) fa.push_back(f);
      while (std::getline(rb, f, ',')) fb.push_back(f);
      REQUIRE(fa.size() == fb.size());
      for (std::size_t c = 0; c < fa.size(); ++c) {
        if (c == 7 || c == 8 || c == 9) continue;  // runtime columns
        CHECK(fa[c] == fb[c]);
      }
    }
  }
}

TEST_CASE("json configs parse like ini configs") {
  const auto path = temp_file("feelsim-json-config.json",
                              R"({"run": {"rounds": 7, "trials": 1}, "training": {"loss": "cross_entropy"}})");
  const LoadedConfig loaded = parse_config(path.string(), {});
  CHECK(loaded.cfg.rounds == 7);
  CHECK(loaded.cfg.trials == 1);
  CHECK(loaded.cfg.training.loss_kind == LossKind::cross_entropy);

  const auto bad = temp_file("feelsim-json-bad.json", R"({"run": {"nonsense": 1}})");
  CHECK_THROWS_WITH_AS(parse_config(bad.string(), {}), doctest::Contains("run.nonsense"),
                       ConfigError);
}

TEST_CASE("scheme=all expands to the three schemes") {
  const auto path = temp_file("feelsim-all.ini", "[run]\nscheme = all\n");
  const LoadedConfig loaded = parse_config(path.string(), {});
  CHECK(loaded.all_schemes);
}

TEST_CASE("the shipped desk configuration parses and validates") {
  const auto config = std::filesystem::path(__FILE__).parent_path().parent_path() / "configs" /
                      "desk.ini";
  REQUIRE(std::filesystem::exists(config));
  const LoadedConfig loaded = parse_config(config.string(), {});
  CHECK(loaded.all_schemes);
  CHECK(loaded.cfg.device_count == 20);
  CHECK(loaded.cfg.rounds == 100);
  CHECK(loaded.cfg.trials == 5);
  CHECK(loaded.cfg.participants_per_round == 5);
  CHECK(loaded.cfg.subdatasets_per_device == 4);
  CHECK(loaded.cfg.data.class_count == 10);
  CHECK(loaded.cfg.data.feature_dim == 32);
  CHECK(loaded.cfg.training.learning_rate == doctest::Approx(0.001));
}
