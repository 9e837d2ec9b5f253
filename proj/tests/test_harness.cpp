#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "mmvm/error.hpp"
#include "mmvm/harness.hpp"
#include "mmvm/textio.hpp"

using namespace mmvm;
using namespace mmvm::harness;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig c;
  data::SyntheticConfig s;
  s.n_subjects = 80;
  s.label_count = 3;
  s.base_rates = {0.3, 0.4, 0.5};
  c.synthetic = s;
  c.seeds = {0, 1};
  c.model.latent_dim = 4;
  c.model.hidden_sizes = {16};
  c.train.epochs = 2;
  c.probe = {10, 4};
  c.supervised.hidden_sizes = {8};
  c.supervised.epochs = 3;
  c.sweep.fractions = {0.25, 0.5, 1.0};
  c.generation.count = 5;
  return c;
}

std::size_t defined_labels(const data::Dataset& test) {
  const Matrix y = test.labels();
  std::size_t n = 0;
  for (std::size_t l = 0; l < y.cols; ++l) {
    const auto col = y.column(l);
    const bool pos = std::count(col.begin(), col.end(), 1.0) > 0;
    const bool neg = std::count(col.begin(), col.end(), 0.0) > 0;
    n += pos && neg;
  }
  return n;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

ResultTable sample_table(bool with_size) {
  ResultTable t{"t", with_size, {}};
  const double vals[] = {0.6, 0.7, 0.8, 0.65, 0.71, 0.9};
  int k = 0;
  for (std::uint64_t seed : {0u, 1u}) {
    for (const char* label : {"Edema", "Lung, Opacity", "No \"Finding\""}) {
      t.rows.push_back({"mmvm", "z_f", label, seed, with_size ? 10u : 0u, vals[k++] + 1e-17});
    }
  }
  return t;
}

}  // namespace

TEST_CASE("config parsing") {
  auto c = parse_config("{}");
  REQUIRE(c.synthetic.has_value());
  CHECK(c.synthetic->n_subjects == data::SyntheticConfig{}.n_subjects);
  CHECK(c.methods == vae::all_methods());
  CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});

  auto full = parse_config(R"({"data": {"synthetic": {"n_subjects": 50}, "seed": 9},
                               "methods": ["mmvm", "poe"], "seeds": [4],
                               "model": {"latent_dim": 3, "beta": 0.5},
                               "train": {"epochs": 5}, "sweep": {"sizes": [5, 10]},
                               "out": "somewhere"})");
  CHECK(full.synthetic->n_subjects == 50);
  CHECK(full.data_seed == 9);
  CHECK(full.methods == std::vector<std::string>{"mmvm", "poe"});
  CHECK(full.model.latent_dim == 3);
  CHECK(full.model.beta == 0.5);
  CHECK(full.train.epochs == 5);
  CHECK(full.out == "somewhere");

  nlohmann::json j = full;
  auto back = parse_config(j.dump());
  CHECK(nlohmann::json(back) == j);

  for (const char* bad : {R"({"seed": 1})", R"({"model": {"latent": 3}})",
                          R"({"data": {"synthetic": {}, "manifest": "m.csv"}})",
                          R"({"seeds": []})", R"({"seeds": [1, 1]})",
                          R"({"methods": ["vae"]})", R"({"sweep": {"sizes": [10, 5]}})",
                          R"({"sweep": {"fractions": [0.5, 0.1]}})",
                          R"({"split": [0.5, 0.5, 0.5]})", R"({"train": {"epochs": "many"}})",
                          R"({"supervised": {"lr": 0.1, "extra": 1}})", "{not json"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_config(bad), ConfigError);
  }
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

TEST_CASE("model spec from config") {
  auto c = tiny_config();
  auto data = load_data(c);
  auto spec = model_spec(c, "mopoe", data.train);
  CHECK(spec.kind == vae::ModelKind::aggregated);
  CHECK(spec.aggregation == agg::AggregationKind::mopoe);
  CHECK(spec.modality_dims == std::vector<std::size_t>{32, 24});
  CHECK(spec.likelihood.kind == vae::LikelihoodKind::gaussian);
  CHECK(spec.latent_dim == 4);

  auto img = data.train;
  img.image_side = 4;
  CHECK(model_spec(c, "mmvm", img).likelihood.kind == vae::LikelihoodKind::bernoulli);
}

TEST_CASE("result tables") {
  SUBCASE("csv round trip") {
    for (bool with_size : {false, true}) {
      auto t = sample_table(with_size);
      auto csv = table_csv(t);
      CHECK(parse_table_csv(csv, "t") == t);
      CHECK(table_csv(parse_table_csv(csv, "t")) == csv);
    }
    CHECK_THROWS_AS(parse_table_csv("a,b\n", "x"), ParseError);
    CHECK_THROWS_AS(parse_table_csv("method,representation,label,seed,auroc\nm,z,l,x,0.5\n", "x"),
                    ParseError);
  }

  SUBCASE("summary statistics") {
    auto t = sample_table(false);
    auto summary = summarize(t);
    REQUIRE(summary.size() == 4);
    CHECK(summary[0].label == "Edema");
    CHECK(summary[0].mean == doctest::Approx((0.6 + 0.65) / 2.0));
    REQUIRE(summary[0].std.has_value());
    CHECK(*summary[0].std == doctest::Approx(std::sqrt(2.0 * 0.025 * 0.025)));
    const auto& macro = summary[3];
    CHECK(macro.label == "macro");
    CHECK(macro.seeds == 2);
    const double seed0 = (0.6 + 0.7 + 0.8) / 3.0, seed1 = (0.65 + 0.71 + 0.9) / 3.0;
    CHECK(macro.mean == doctest::Approx((seed0 + seed1) / 2.0).epsilon(1e-14));

    ResultTable one{"one", false, {t.rows.begin(), t.rows.begin() + 3}};
    for (const auto& s : summarize(one)) CHECK_FALSE(s.std.has_value());
    const auto csv = summary_csv(one);
    CHECK(csv.find(",,1\n") != std::string::npos);
  }

  SUBCASE("curve data") {
    ResultTable t{"s", true, {}};
    for (std::uint64_t seed : {0u, 1u}) {
      for (std::size_t size : {10u, 20u}) {
        t.rows.push_back({"mmvm", "z_f", "a", seed, size, 0.6 + 0.1 * seed});
        t.rows.push_back({"mmvm", "z_l", "a", seed, size, 0.8});
        t.rows.push_back({"late_fusion", "x_fl", "a", seed, size, 0.5 + size / 100.0});
      }
    }
    auto curve = sweep_curve(t);
    REQUIRE(curve.size() == 4);
    CHECK(curve[0].method == "mmvm");
    CHECK(curve[0].mean == doctest::Approx(0.725));
    auto dat = curve_data(t);
    CHECK(dat.rfind("# size mmvm mmvm_std late_fusion late_fusion_std\n", 0) == 0);
    CHECK(std::count(dat.begin(), dat.end(), '\n') == 3);
  }

  SUBCASE("report files") {
    TempDir dir("mmvm_test_report");
    auto latent = sample_table(false);
    latent.name = "latent";
    auto sweep = sample_table(true);
    sweep.name = "sweep";
    write_report({latent, sweep}, dir.path / "out");
    for (const char* f : {"latent.csv", "latent_summary.csv", "sweep.csv", "sweep_summary.csv",
                          "sweep_curve.dat"}) {
      CHECK(fs::exists(dir.path / "out" / f));
    }
    CHECK_FALSE(fs::exists(dir.path / "out" / "latent_curve.dat"));
    auto back = read_table(dir.path / "out" / "sweep.csv");
    CHECK(back == sweep);

    const std::string first = slurp(dir.path / "out" / "sweep_summary.csv");
    write_report({latent, sweep}, dir.path / "out");
    CHECK(slurp(dir.path / "out" / "sweep_summary.csv") == first);

    std::ofstream(dir.path / "file") << "x";
    CHECK_THROWS_AS(write_report({latent}, dir.path / "file" / "sub"), IoError);
    CHECK_THROWS_AS(write_report({}, dir.path / "out"), ContractError);
  }
}

TEST_CASE("parallel_for") {
  std::vector<int> hits(20, 0);
  parallel_for(20, 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
  try {
    parallel_for(10, 3, [](std::size_t i) {
      if (i == 7 || i == 4) throw ContractError("job " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const ContractError& e) {
    CHECK(std::string(e.what()) == "job 4");
  }
  parallel_for(0, 4, [](std::size_t) { throw std::logic_error("never"); });
}

TEST_CASE("probe_label") {
  Matrix x(6, 1);
  x.values = {0, 1, 2, 3, 4, 5};
  std::vector<double> y{0, 0, 0, 1, 1, 1};
  auto r = probe_label(x, y, x, y, {10, 3}, 1);
  CHECK(r.defined);
  CHECK(r.auroc == 1.0);
  std::vector<double> zeros(6, 0.0);
  r = probe_label(x, zeros, x, y, {10, 3}, 1);
  CHECK(r.defined);
  CHECK(r.auroc == 0.5);
  CHECK_FALSE(probe_label(x, y, x, zeros, {10, 3}, 1).defined);
}

TEST_CASE("latent experiment") {
  auto c = tiny_config();
  const auto data = load_data(c);
  const std::size_t L = defined_labels(data.test);
  REQUIRE(L > 0);

  auto result = run_latent_experiment(c, data, 1);
  const auto& rows = result.table.rows;
  CHECK(rows.size() == (6 * 2 + 4) * c.seeds.size() * L);

  std::map<std::string, std::set<std::string>> reps;
  for (const auto& r : rows) {
    reps[r.method].insert(r.representation);
    CHECK(r.value >= 0.0);
    CHECK(r.value <= 1.0);
  }
  CHECK(reps["mmvm"] == std::set<std::string>{"z_f", "z_l"});
  CHECK(reps["independent"] == std::set<std::string>{"z_f", "z_l"});
  for (const char* m : {"avg", "poe", "moe", "mopoe"}) {
    CHECK(reps[m] == std::set<std::string>{"z_f", "z_l", "z_j"});
  }

  for (const auto& per_seed : result.stream_hashes) {
    for (auto h : per_seed) CHECK(h == per_seed.front());
  }
  CHECK(result.stream_hashes[0][0] != result.stream_hashes[1][0]);

  SUBCASE("deterministic and thread independent") {
    auto again = run_latent_experiment(c, data, 3);
    CHECK(table_csv(again.table) == table_csv(result.table));
  }

  SUBCASE("macro average is the mean of label values") {
    for (const auto& s : summarize(result.table)) {
      if (s.label != "macro" || s.method != "poe" || s.representation != "z_j") continue;
      double total = 0.0;
      for (std::uint64_t seed : c.seeds) {
        double sum = 0.0;
        std::size_t n = 0;
        for (const auto& r : rows) {
          if (r.method == "poe" && r.representation == "z_j" && r.seed == seed) {
            sum += r.value;
            ++n;
          }
        }
        total += sum / n;
      }
      CHECK(s.mean == doctest::Approx(total / c.seeds.size()).epsilon(1e-14));
    }
  }

  SUBCASE("adding a method leaves the others unchanged") {
    auto one = c;
    one.methods = {"poe"};
    auto only = run_latent_experiment(one, data, 1);
    std::vector<ResultRow> poe;
    std::copy_if(rows.begin(), rows.end(), std::back_inserter(poe),
                 [](const ResultRow& r) { return r.method == "poe"; });
    CHECK(only.table.rows == poe);
  }
}

TEST_CASE("training failures carry method and seed") {
  auto c = tiny_config();
  c.methods = {"mmvm"};
  c.seeds = {3};
  auto data = load_data(c);
  for (auto& s : data.train.samples) {
    for (auto& v : s.x_f) v *= 1e200;
  }
  try {
    run_latent_experiment(c, data, 1);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("mmvm, seed 3") != std::string::npos);
  }
}

TEST_CASE("label sweep") {
  auto c = tiny_config();
  c.seeds = {5};
  const auto data = load_data(c);
  const std::size_t n = data.train.size();

  CHECK(sweep_sizes({{0.5, 1.0}, {}}, 10) == std::vector<std::size_t>{5, 10});
  CHECK(sweep_sizes({{0.01, 1.0}, {}}, 10) == std::vector<std::size_t>{1, 10});
  CHECK_THROWS_AS(sweep_sizes({{}, {5, 11}}, 10), ContractError);
  CHECK_THROWS_AS(sweep_sizes({{0.01, 0.02}, {}}, 10), ContractError);

  auto table = run_label_sweep(c, data, 1);
  CHECK(table.has_size);
  const auto sizes = sweep_sizes(c.sweep, n);
  std::set<std::pair<std::string, std::string>> method_reps;
  std::set<std::size_t> seen_sizes;
  for (const auto& r : table.rows) {
    method_reps.insert({r.method, r.representation});
    seen_sizes.insert(r.size);
  }
  CHECK(seen_sizes == std::set<std::size_t>(sizes.begin(), sizes.end()));
  CHECK(method_reps == std::set<std::pair<std::string, std::string>>{
                           {"mmvm", "z_f"}, {"mmvm", "z_l"}, {"unimodal", "x_f"},
                           {"unimodal", "x_l"}, {"ensemble", "x_fl"}, {"late_fusion", "x_fl"}});

  SUBCASE("full labels reproduce the latent experiment") {
    auto latent_cfg = c;
    latent_cfg.methods = {"mmvm"};
    auto latent = run_latent_experiment(latent_cfg, data, 1);
    std::vector<ResultRow> full;
    for (auto r : table.rows) {
      if (r.method != "mmvm" || r.size != n) continue;
      r.size = 0;
      full.push_back(r);
    }
    CHECK(full == latent.table.rows);
  }

  SUBCASE("deterministic") {
    CHECK(table_csv(run_label_sweep(c, data, 2)) == table_csv(table));
  }

  SUBCASE("oversized sweep") {
    auto big = c;
    big.sweep.sizes = {n + 1};
    CHECK_THROWS_AS(run_label_sweep(big, data, 1), ContractError);
  }
}

TEST_CASE("generation") {
  auto c = tiny_config();
  c.methods = {"independent", "mmvm", "poe"};
  c.seeds = {0};
  const auto data = load_data(c);

  auto demo = run_generation_demo(c, data, 1);
  REQUIRE(demo.rows.size() == 2);
  CHECK(demo.rows[0].method == "mmvm");
  CHECK(demo.rows[1].method == "poe");
  for (std::size_t i = 0; i < demo.rows.size(); ++i) {
    const auto& set = demo.sets[i];
    CHECK(demo.rows[i].count == 5);
    CHECK(set.generated.rows == set.target.rows);
    CHECK(set.generated.cols == set.target.cols);
    CHECK(set.prior.cols == set.target.cols);
    CHECK(set.source.cols == data.test.dim_l);
    CHECK(demo.rows[i].mse_generated == mean_squared_error(set.generated, set.target));
  }
  auto csv = generation_csv(demo.rows);
  CHECK(csv.rfind("method,seed,count,mse_generated,mse_prior\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);

  TempDir dir("mmvm_test_generation");
  write_generation(demo, data.test, dir.path);
  CHECK(fs::exists(dir.path / "generation.csv"));

  SUBCASE("empty request") {
    auto none = c;
    none.generation.count = 0;
    none.methods = {"mmvm"};
    auto empty = run_generation_demo(none, data, 1);
    REQUIRE(empty.rows.size() == 1);
    CHECK(empty.rows[0].count == 0);
    CHECK(empty.sets[0].generated.rows == 0);
    CHECK(generation_csv({}) == "method,seed,count,mse_generated,mse_prior\n");
  }

  SUBCASE("untrained model") {
    auto spec = model_spec(c, "mmvm", data.train);
    vae::TrainedModel untrained{vae::Model(spec, 0), {}, 0};
    CHECK_THROWS_AS(generate_pairs(untrained, data.test, c.generation, 0), ContractError);
  }

  CHECK_THROWS_AS(mean_squared_error(Matrix(2, 2), Matrix(2, 3)), ConformanceError);
}
