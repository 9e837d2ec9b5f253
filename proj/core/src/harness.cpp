#include "mmvm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include "mmvm/error.hpp"
#include "mmvm/rng.hpp"
#include "mmvm/textio.hpp"

namespace mmvm::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& what) {
  if (!j.is_object()) throw ConfigError(what + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (!allowed.contains(key)) throw ConfigError(what + ": unknown key '" + key + "'");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

const char* kRepNames[] = {"z_f", "z_l", "z_j"};

// Rethrows library errors with a prefix, keeping the error type.
template <class F>
auto with_context(const std::string& ctx, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const NumericError& e) {
    throw NumericError(ctx + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(ctx + ": " + e.what());
  } catch (const ParseError& e) {
    throw ParseError(ctx + ": " + e.what());
  } catch (const IoError& e) {
    throw IoError(ctx + ": " + e.what());
  } catch (const ContractError& e) {
    throw ContractError(ctx + ": " + e.what());
  } catch (const ConformanceError& e) {
    throw ConformanceError(ctx + ": " + e.what());
  } catch (const DomainError& e) {
    throw DomainError(ctx + ": " + e.what());
  } catch (const DegenerateMetricError& e) {
    throw DegenerateMetricError(ctx + ": " + e.what());
  }
}

std::string job_name(const std::string& method, std::uint64_t seed) {
  return method + ", seed " + std::to_string(seed);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

void ExperimentConfig::validate() const {
  if (synthetic.has_value() == !manifest.empty()) {
    throw ConfigError("data needs exactly one of 'synthetic' or 'manifest'");
  }
  if (synthetic) {
    try {
      synthetic->validate();
    } catch (const ContractError& e) {
      throw ConfigError(std::string("synthetic data: ") + e.what());
    }
  }
  double total = 0.0;
  for (double r : split) {
    if (!(r > 0.0)) throw ConfigError("split ratios must be positive");
    total += r;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");
  if (methods.empty()) throw ConfigError("methods must not be empty");
  std::set<std::string> seen_methods;
  for (const auto& m : methods) {
    const auto& known = vae::all_methods();
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw ConfigError("unknown method '" + m + "'");
    }
    if (!seen_methods.insert(m).second) throw ConfigError("method '" + m + "' listed twice");
  }
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    throw ConfigError("seeds must be distinct");
  }
  if (model.likelihood != "auto" && model.likelihood != "gaussian" &&
      model.likelihood != "bernoulli") {
    throw ConfigError("likelihood must be auto, gaussian or bernoulli");
  }
  if (model.latent_dim == 0 || model.samples == 0) {
    throw ConfigError("latent_dim and samples must be positive");
  }
  if (!(model.sigma > 0.0) || !(model.beta >= 0.0)) {
    throw ConfigError("sigma must be positive and beta non-negative");
  }
  if (train.epochs == 0 || train.batch_size == 0 || !(train.lr > 0.0)) {
    throw ConfigError("train epochs, batch_size and lr must be positive");
  }
  if (probe.n_estimators == 0 || probe.max_depth == 0) {
    throw ConfigError("probe n_estimators and max_depth must be positive");
  }
  if (supervised.epochs == 0 || supervised.batch_size == 0 || !(supervised.lr > 0.0)) {
    throw ConfigError("supervised epochs, batch_size and lr must be positive");
  }
  if (sweep.sizes.empty()) {
    if (sweep.fractions.empty()) throw ConfigError("sweep needs fractions or sizes");
    for (std::size_t i = 0; i < sweep.fractions.size(); ++i) {
      const double f = sweep.fractions[i];
      if (!(f > 0.0 && f <= 1.0)) throw ConfigError("sweep fractions must lie in (0, 1]");
      if (i > 0 && !(f > sweep.fractions[i - 1])) {
        throw ConfigError("sweep fractions must be strictly increasing");
      }
    }
  } else {
    for (std::size_t i = 0; i < sweep.sizes.size(); ++i) {
      if (sweep.sizes[i] == 0) throw ConfigError("sweep sizes must be positive");
      if (i > 0 && sweep.sizes[i] <= sweep.sizes[i - 1]) {
        throw ConfigError("sweep sizes must be strictly increasing");
      }
    }
  }
  if (generation.source > 1 || generation.target > 1 || generation.source == generation.target) {
    throw ConfigError("generation source and target must be the two modalities 0 and 1");
  }
}

void to_json(json& j, const ExperimentConfig& c) {
  json data;
  if (c.synthetic) {
    data["synthetic"] = *c.synthetic;
  } else {
    data["manifest"] = c.manifest.string();
    data["center_crop"] = c.load.center_crop;
    data["size"] = c.load.size;
    data["raw_labels"] = c.load.raw_labels;
  }
  data["seed"] = c.data_seed;
  j = json{
      {"data", data},
      {"split", c.split},
      {"methods", c.methods},
      {"seeds", c.seeds},
      {"model",
       {{"latent_dim", c.model.latent_dim},
        {"hidden_sizes", c.model.hidden_sizes},
        {"likelihood", c.model.likelihood},
        {"sigma", c.model.sigma},
        {"beta", c.model.beta},
        {"samples", c.model.samples},
        {"stratified", c.model.stratified},
        {"prior_expert", c.model.prior_expert},
        {"detach_mixture_prior", c.model.detach_mixture_prior}}},
      {"train",
       {{"epochs", c.train.epochs}, {"batch_size", c.train.batch_size}, {"lr", c.train.lr}}},
      {"probe", {{"n_estimators", c.probe.n_estimators}, {"max_depth", c.probe.max_depth}}},
      {"sweep", {{"fractions", c.sweep.fractions}, {"sizes", c.sweep.sizes}}},
      {"supervised", c.supervised},
      {"generation",
       {{"count", c.generation.count},
        {"source", c.generation.source},
        {"target", c.generation.target},
        {"sample", c.generation.sample}}},
      {"out", c.out.string()}};
}

void from_json(const json& j, ExperimentConfig& c) {
  check_keys(j, {"data", "split", "methods", "seeds", "model", "train", "probe", "sweep",
                 "supervised", "generation", "out"},
             "config");
  c = ExperimentConfig{};
  try {
    if (j.contains("data")) {
      const json& d = j.at("data");
      check_keys(d, {"synthetic", "manifest", "center_crop", "size", "raw_labels", "seed"},
                 "data");
      if (d.contains("synthetic")) c.synthetic = d.at("synthetic").get<data::SyntheticConfig>();
      if (d.contains("manifest")) c.manifest = d.at("manifest").get<std::string>();
      c.load.center_crop = d.value("center_crop", c.load.center_crop);
      c.load.size = d.value("size", c.load.size);
      c.load.raw_labels = d.value("raw_labels", c.load.raw_labels);
      c.data_seed = d.value("seed", c.data_seed);
    } else {
      c.synthetic = data::SyntheticConfig{};
    }
    c.split = j.value("split", c.split);
    c.methods = j.value("methods", c.methods);
    c.seeds = j.value("seeds", c.seeds);
    if (j.contains("model")) {
      const json& m = j.at("model");
      check_keys(m, {"latent_dim", "hidden_sizes", "likelihood", "sigma", "beta", "samples",
                     "stratified", "prior_expert", "detach_mixture_prior"},
                 "model");
      c.model.latent_dim = m.value("latent_dim", c.model.latent_dim);
      c.model.hidden_sizes = m.value("hidden_sizes", c.model.hidden_sizes);
      c.model.likelihood = m.value("likelihood", c.model.likelihood);
      c.model.sigma = m.value("sigma", c.model.sigma);
      c.model.beta = m.value("beta", c.model.beta);
      c.model.samples = m.value("samples", c.model.samples);
      c.model.stratified = m.value("stratified", c.model.stratified);
      c.model.prior_expert = m.value("prior_expert", c.model.prior_expert);
      c.model.detach_mixture_prior = m.value("detach_mixture_prior", c.model.detach_mixture_prior);
    }
    if (j.contains("train")) {
      const json& t = j.at("train");
      check_keys(t, {"epochs", "batch_size", "lr"}, "train");
      c.train.epochs = t.value("epochs", c.train.epochs);
      c.train.batch_size = t.value("batch_size", c.train.batch_size);
      c.train.lr = t.value("lr", c.train.lr);
    }
    if (j.contains("probe")) {
      const json& p = j.at("probe");
      check_keys(p, {"n_estimators", "max_depth"}, "probe");
      c.probe.n_estimators = p.value("n_estimators", c.probe.n_estimators);
      c.probe.max_depth = p.value("max_depth", c.probe.max_depth);
    }
    if (j.contains("sweep")) {
      const json& s = j.at("sweep");
      check_keys(s, {"fractions", "sizes"}, "sweep");
      c.sweep.fractions = s.value("fractions", c.sweep.fractions);
      c.sweep.sizes = s.value("sizes", c.sweep.sizes);
    }
    if (j.contains("supervised")) c.supervised = j.at("supervised").get<sup::SupervisedConfig>();
    if (j.contains("generation")) {
      const json& g = j.at("generation");
      check_keys(g, {"count", "source", "target", "sample"}, "generation");
      c.generation.count = g.value("count", c.generation.count);
      c.generation.source = g.value("source", c.generation.source);
      c.generation.target = g.value("target", c.generation.target);
      c.generation.sample = g.value("sample", c.generation.sample);
    }
    c.out = j.value("out", c.out.string());
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig c = j.get<ExperimentConfig>();
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::string text;
  try {
    text = slurp(path);
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  return with_context(path.string(), [&] { return parse_config(text); });
}

SplitData load_data(const ExperimentConfig& config) {
  data::Dataset all = config.synthetic ? data::generate_synthetic(*config.synthetic, config.data_seed)
                                       : data::load_dataset(config.manifest, config.load);
  auto parts = data::subject_split(all, config.split, derive_seed(config.data_seed, "split"));
  return {std::move(parts[0]), std::move(parts[1]), std::move(parts[2])};
}

vae::ModelSpec model_spec(const ExperimentConfig& config, const std::string& method,
                          const data::Dataset& dataset) {
  auto spec = vae::ModelSpec::for_method(method, {dataset.dim_f, dataset.dim_l});
  const auto& o = config.model;
  spec.latent_dim = o.latent_dim;
  spec.hidden_sizes = o.hidden_sizes;
  const bool bernoulli = o.likelihood == "bernoulli" ||
                         (o.likelihood == "auto" && dataset.image_side > 0);
  spec.likelihood.kind = bernoulli ? vae::LikelihoodKind::bernoulli : vae::LikelihoodKind::gaussian;
  spec.likelihood.sigma = o.sigma;
  spec.beta = o.beta;
  spec.samples = o.samples;
  spec.stratified = o.stratified;
  spec.prior_expert = o.prior_expert;
  spec.detach_mixture_prior = o.detach_mixture_prior;
  return spec;
}

namespace {

vae::TrainedModel train_for(const ExperimentConfig& config, const SplitData& data,
                            const std::string& method, std::uint64_t seed) {
  vae::TrainConfig t = config.train;
  t.seed = seed;
  return vae::train_model(model_spec(config, method, data.train), data.train.modalities(), t);
}

}  // namespace

// ---------------------------------------------------------------------------
// Results

namespace {

using GroupKey = std::tuple<std::string, std::string, std::size_t>;  // method, rep, size

struct Stats {
  double mean = 0.0;
  std::optional<double> std;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() >= 2) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

// Values grouped by key in first-appearance order.
template <class Key>
struct Ordered {
  std::vector<Key> keys;
  std::map<Key, std::vector<double>> values;

  std::vector<double>& at(const Key& k) {
    auto [it, inserted] = values.try_emplace(k);
    if (inserted) keys.push_back(k);
    return it->second;
  }
};

}  // namespace

std::vector<SummaryRow> summarize(const ResultTable& table) {
  Ordered<GroupKey> groups;
  std::map<GroupKey, Ordered<std::string>> per_label;
  std::map<GroupKey, Ordered<std::uint64_t>> per_seed;
  for (const auto& r : table.rows) {
    GroupKey g{r.method, r.representation, r.size};
    groups.at(g);
    per_label[g].at(r.label).push_back(r.value);
    per_seed[g].at(r.seed).push_back(r.value);
  }
  std::vector<SummaryRow> out;
  for (const auto& g : groups.keys) {
    const auto& [method, rep, size] = g;
    auto& labels = per_label[g];
    for (const auto& label : labels.keys) {
      const auto& v = labels.values[label];
      Stats s = stats(v);
      out.push_back({method, rep, label, size, s.mean, s.std, v.size()});
    }
    auto& seeds = per_seed[g];
    std::vector<double> macros;
    for (auto seed : seeds.keys) macros.push_back(stats(seeds.values[seed]).mean);
    Stats s = stats(macros);
    out.push_back({method, rep, "macro", size, s.mean, s.std, macros.size()});
  }
  return out;
}

std::vector<CurvePoint> sweep_curve(const ResultTable& table) {
  Ordered<std::string> methods;
  std::map<std::pair<std::string, std::size_t>, Ordered<std::uint64_t>> values;
  for (const auto& r : table.rows) {
    methods.at(r.method);
    values[{r.method, r.size}].at(r.seed).push_back(r.value);
  }
  std::vector<CurvePoint> out;
  for (const auto& m : methods.keys) {
    for (auto& [key, seeds] : values) {
      if (key.first != m) continue;
      std::vector<double> per_seed;
      for (auto seed : seeds.keys) per_seed.push_back(stats(seeds.values[seed]).mean);
      Stats s = stats(per_seed);
      out.push_back({m, key.second, s.mean, s.std});
    }
  }
  return out;
}

std::string table_csv(const ResultTable& table) {
  std::string out = table.has_size ? "method,representation,label,seed,size,auroc\n"
                                   : "method,representation,label,seed,auroc\n";
  for (const auto& r : table.rows) {
    out += csv_cell(r.method) + ',' + csv_cell(r.representation) + ',' + csv_cell(r.label) + ',' +
           std::to_string(r.seed) + ',';
    if (table.has_size) out += std::to_string(r.size) + ',';
    out += fmt(r.value) + '\n';
  }
  return out;
}

ResultTable parse_table_csv(const std::string& text, const std::string& name) {
  ResultTable table;
  table.name = name;
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name + ": empty result table");
  const auto header = split_csv_line(line);
  if (header == std::vector<std::string>{"method", "representation", "label", "seed", "size",
                                         "auroc"}) {
    table.has_size = true;
  } else if (header != std::vector<std::string>{"method", "representation", "label", "seed",
                                                "auroc"}) {
    throw ParseError(name + ": unexpected header '" + line + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells");
    }
    ResultRow r;
    r.method = cells[0];
    r.representation = cells[1];
    r.label = cells[2];
    try {
      r.seed = std::stoull(cells[3]);
      if (table.has_size) r.size = std::stoull(cells[4]);
      r.value = std::stod(cells.back());
    } catch (const std::exception&) {
      throw ParseError(name + ":" + std::to_string(line_no) + ": bad number");
    }
    table.rows.push_back(std::move(r));
  }
  return table;
}

std::string summary_csv(const ResultTable& table) {
  std::string out = table.has_size ? "method,representation,label,size,mean,std,seeds\n"
                                   : "method,representation,label,mean,std,seeds\n";
  for (const auto& s : summarize(table)) {
    out += csv_cell(s.method) + ',' + csv_cell(s.representation) + ',' + csv_cell(s.label) + ',';
    if (table.has_size) out += std::to_string(s.size) + ',';
    out += fmt(s.mean) + ',' + (s.std ? fmt(*s.std) : std::string()) + ',' +
           std::to_string(s.seeds) + '\n';
  }
  return out;
}

std::string curve_data(const ResultTable& table) {
  const auto points = sweep_curve(table);
  std::vector<std::string> methods;
  std::set<std::size_t> sizes;
  bool with_std = true;
  for (const auto& p : points) {
    if (std::find(methods.begin(), methods.end(), p.method) == methods.end()) {
      methods.push_back(p.method);
    }
    sizes.insert(p.size);
    with_std = with_std && p.std.has_value();
  }
  std::string out = "# size";
  for (const auto& m : methods) out += " " + m + (with_std ? " " + m + "_std" : "");
  out += '\n';
  for (auto size : sizes) {
    out += std::to_string(size);
    for (const auto& m : methods) {
      auto it = std::find_if(points.begin(), points.end(),
                             [&](const CurvePoint& p) { return p.method == m && p.size == size; });
      if (it == points.end()) {
        out += with_std ? " NaN NaN" : " NaN";
        continue;
      }
      out += " " + fmt(it->mean);
      if (with_std) out += " " + fmt(*it->std);
    }
    out += '\n';
  }
  return out;
}

void write_report(const std::vector<ResultTable>& tables, const fs::path& dir) {
  if (tables.empty()) throw ContractError("write_report: no tables");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (const auto& t : tables) {
    spit(dir / (t.name + ".csv"), table_csv(t));
    spit(dir / (t.name + "_summary.csv"), summary_csv(t));
    if (t.has_size) spit(dir / (t.name + "_curve.dat"), curve_data(t));
  }
}

ResultTable read_table(const fs::path& csv) {
  return parse_table_csv(slurp(csv), csv.stem().string());
}

// ---------------------------------------------------------------------------
// Experiments

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t workers = std::min(std::max<std::size_t>(threads, 1), count);
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

ProbeResult probe_label(const Matrix& train_x, const std::vector<double>& train_y,
                        const Matrix& test_x, const std::vector<double>& test_y,
                        const ProbeOptions& options, std::uint64_t seed) {
  const bool train_pos = std::find(train_y.begin(), train_y.end(), 1.0) != train_y.end();
  const bool train_neg = std::find(train_y.begin(), train_y.end(), 0.0) != train_y.end();
  std::vector<double> scores(test_x.rows, 0.5);
  if (train_pos && train_neg) {
    eval::ForestConfig fc;
    fc.n_estimators = options.n_estimators;
    fc.max_depth = options.max_depth;
    fc.seed = seed;
    scores = eval::rf_predict(eval::rf_train(train_x, train_y, fc), test_x);
  }
  try {
    return {eval::auroc(scores, test_y).value, true};
  } catch (const DegenerateMetricError&) {
    return {0.0, false};
  }
}

namespace {

std::uint64_t probe_seed(std::uint64_t seed, std::size_t rep, std::size_t label,
                         std::size_t label_count) {
  return derive_seed(seed, "probe", rep * label_count + label);
}

void probe_all_labels(const Matrix& train_x, const Matrix& train_labels, const Matrix& test_x,
                      const Matrix& test_labels, const std::vector<std::string>& label_names,
                      const ProbeOptions& options, std::uint64_t seed, std::size_t rep,
                      ResultRow base, std::vector<ResultRow>& out) {
  for (std::size_t l = 0; l < label_names.size(); ++l) {
    auto r = probe_label(train_x, train_labels.column(l), test_x, test_labels.column(l), options,
                         probe_seed(seed, rep, l, label_names.size()));
    if (!r.defined) continue;
    base.label = label_names[l];
    base.value = r.auroc;
    out.push_back(base);
  }
}

void score_rows(const Matrix& scores, const Matrix& test_labels,
                const std::vector<std::string>& label_names, ResultRow base,
                std::vector<ResultRow>& out) {
  for (std::size_t l = 0; l < label_names.size(); ++l) {
    try {
      base.value = eval::auroc(scores.column(l), test_labels.column(l)).value;
    } catch (const DegenerateMetricError&) {
      continue;
    }
    base.label = label_names[l];
    out.push_back(base);
  }
}

}  // namespace

LatentExperiment run_latent_experiment(const ExperimentConfig& config, const SplitData& data,
                                       std::size_t threads) {
  const std::size_t n_methods = config.methods.size(), n_seeds = config.seeds.size();
  std::vector<std::vector<ResultRow>> job_rows(n_methods * n_seeds);
  LatentExperiment result;
  result.stream_hashes.assign(n_seeds, std::vector<std::uint64_t>(n_methods, 0));

  const auto train_x = data.train.modalities();
  const auto test_x = data.test.modalities();
  const Matrix train_labels = data.train.labels();
  const Matrix test_labels = data.test.labels();

  parallel_for(n_methods * n_seeds, threads, [&](std::size_t job) {
    const std::size_t mi = job / n_seeds, si = job % n_seeds;
    const auto& method = config.methods[mi];
    const std::uint64_t seed = config.seeds[si];
    with_context(job_name(method, seed), [&] {
      auto trained = train_for(config, data, method, seed);
      result.stream_hashes[si][mi] = trained.stream_hash;
      std::vector<vae::Representation> reps{vae::Representation::of_modality(0),
                                            vae::Representation::of_modality(1)};
      if (vae::has_representation(trained.model.spec(), vae::Representation::joint())) {
        reps.push_back(vae::Representation::joint());
      }
      for (std::size_t r = 0; r < reps.size(); ++r) {
        Matrix z_train = vae::extract_representations(trained.model, train_x, reps[r]);
        Matrix z_test = vae::extract_representations(trained.model, test_x, reps[r]);
        probe_all_labels(z_train, train_labels, z_test, test_labels, data.train.label_names,
                         config.probe, seed, r, {method, kRepNames[r], "", seed, 0, 0.0},
                         job_rows[job]);
      }
    });
  });

  result.table.name = "latent";
  for (auto& rows : job_rows) {
    result.table.rows.insert(result.table.rows.end(), rows.begin(), rows.end());
  }
  return result;
}

std::vector<std::size_t> sweep_sizes(const SweepOptions& options, std::size_t n) {
  std::vector<std::size_t> sizes = options.sizes;
  if (sizes.empty()) {
    for (double f : options.fractions) {
      sizes.push_back(std::max<std::size_t>(1, static_cast<std::size_t>(
                                                   std::llround(f * static_cast<double>(n)))));
    }
  }
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] > n) {
      throw ContractError("sweep size " + std::to_string(sizes[i]) + " exceeds the " +
                          std::to_string(n) + " training samples");
    }
    if (i > 0 && sizes[i] <= sizes[i - 1]) {
      throw ContractError("sweep sizes are not strictly increasing for " + std::to_string(n) +
                          " training samples");
    }
  }
  return sizes;
}

ResultTable run_label_sweep(const ExperimentConfig& config, const SplitData& data,
                            std::size_t threads) {
  const std::size_t n = data.train.size();
  const auto sizes = sweep_sizes(config.sweep, n);
  const std::size_t n_seeds = config.seeds.size();
  const auto train_x = data.train.modalities();
  const auto test_x = data.test.modalities();
  const auto val_x = data.validation.modalities();
  const Matrix train_labels = data.train.labels();
  const Matrix test_labels = data.test.labels();
  const Matrix val_labels = data.validation.labels();
  const auto& names = data.train.label_names;

  // Representations of the unsupervised MMVM model trained on every sample.
  std::vector<std::array<Matrix, 2>> z_train(n_seeds), z_test(n_seeds);
  parallel_for(n_seeds, threads, [&](std::size_t si) {
    const std::uint64_t seed = config.seeds[si];
    with_context(job_name("mmvm", seed), [&] {
      auto trained = train_for(config, data, "mmvm", seed);
      for (std::size_t m = 0; m < 2; ++m) {
        z_train[si][m] = vae::extract_representations(trained.model, train_x,
                                                      vae::Representation::of_modality(m));
        z_test[si][m] = vae::extract_representations(trained.model, test_x,
                                                     vae::Representation::of_modality(m));
      }
    });
  });

  std::vector<std::vector<ResultRow>> job_rows(n_seeds * sizes.size());
  parallel_for(job_rows.size(), threads, [&](std::size_t job) {
    const std::size_t si = job / sizes.size(), zi = job % sizes.size();
    const std::uint64_t seed = config.seeds[si];
    const std::size_t size = sizes[zi];
    with_context("label sweep, seed " + std::to_string(seed) + ", size " + std::to_string(size),
                 [&] {
      const auto idx = eval::label_subsample(n, size, derive_seed(seed, "labels"));
      const Matrix y = train_labels.select_rows(idx);
      auto& rows = job_rows[job];
      for (std::size_t m = 0; m < 2; ++m) {
        probe_all_labels(z_train[si][m].select_rows(idx), y, z_test[si][m], test_labels, names,
                         config.probe, seed, m, {"mmvm", kRepNames[m], "", seed, size, 0.0},
                         rows);
      }

      const sup::LabeledData val{val_x, val_labels};
      std::array<Matrix, 2> uni_scores;
      for (std::size_t m = 0; m < 2; ++m) {
        sup::LabeledData train{{train_x[m].select_rows(idx)}, y};
        sup::LabeledData val_m{{val_x[m]}, val_labels};
        auto clf = sup::train_supervised(config.supervised, train, val_m, sup::Fusion::none,
                                         derive_seed(seed, "unimodal", m));
        uni_scores[m] = sup::predict_scores(clf, {test_x[m]});
        score_rows(uni_scores[m], test_labels, names,
                   {"unimodal", m == 0 ? "x_f" : "x_l", "", seed, size, 0.0}, rows);
      }
      score_rows(sup::ensemble_scores({uni_scores[0], uni_scores[1]}), test_labels, names,
                 {"ensemble", "x_fl", "", seed, size, 0.0}, rows);

      sup::LabeledData train{{train_x[0].select_rows(idx), train_x[1].select_rows(idx)}, y};
      auto fused = sup::train_supervised(config.supervised, train, val, sup::Fusion::late_fusion,
                                         derive_seed(seed, "late-fusion"));
      score_rows(sup::predict_scores(fused, test_x), test_labels, names,
                 {"late_fusion", "x_fl", "", seed, size, 0.0}, rows);
    });
  });

  ResultTable table;
  table.name = "sweep";
  table.has_size = true;
  for (auto& rows : job_rows) table.rows.insert(table.rows.end(), rows.begin(), rows.end());
  return table;
}

double mean_squared_error(const Matrix& a, const Matrix& b) {
  if (a.rows != b.rows || a.cols != b.cols) throw ConformanceError("mse: shapes differ");
  if (a.values.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double d = a.values[i] - b.values[i];
    s += d * d;
  }
  return s / static_cast<double>(a.values.size());
}

GeneratedSet generate_pairs(const vae::TrainedModel& model, const data::Dataset& test,
                            const GenerationOptions& options, std::uint64_t seed) {
  if (model.epoch_objective.empty()) {
    throw ContractError("generate_pairs: model has not been trained");
  }
  const std::size_t count = std::min(options.count, test.size());
  std::vector<std::size_t> idx(count);
  for (std::size_t i = 0; i < count; ++i) idx[i] = i;
  const data::Dataset part = test.subset(idx);
  const std::size_t d = model.model.spec().latent_dim;

  GeneratedSet out;
  out.source = part.modality(options.source);
  out.target = part.modality(options.target);
  Matrix noise(count, d);
  Matrix prior(count, d);
  Rng rng(derive_seed(seed, "generation"));
  if (options.sample) noise.values = standard_normal(rng, count * d);
  prior.values = standard_normal(rng, count * d);
  if (count == 0) {
    out.generated = Matrix(0, out.target.cols);
    out.prior = Matrix(0, out.target.cols);
    return out;
  }
  out.generated =
      vae::conditional_generate(model.model, options.source, out.source, options.target, noise);
  {
    diff::NoGradGuard guard;
    out.prior = vae::decode_mean(model.model, options.target, vae::to_tensor(prior));
  }
  return out;
}

GenerationDemo run_generation_demo(const ExperimentConfig& config, const SplitData& data,
                                   std::size_t threads) {
  std::vector<std::string> methods;
  for (const auto& m : config.methods) {
    if (m != "independent") methods.push_back(m);
  }
  const std::size_t n_seeds = config.seeds.size();
  GenerationDemo demo;
  demo.rows.resize(methods.size() * n_seeds);
  demo.sets.resize(methods.size() * n_seeds);
  parallel_for(demo.rows.size(), threads, [&](std::size_t job) {
    const auto& method = methods[job / n_seeds];
    const std::uint64_t seed = config.seeds[job % n_seeds];
    with_context(job_name(method, seed), [&] {
      auto trained = train_for(config, data, method, seed);
      auto set = generate_pairs(trained, data.test, config.generation, seed);
      demo.rows[job] = {method, seed, set.target.rows, mean_squared_error(set.generated, set.target),
                        mean_squared_error(set.prior, set.target)};
      demo.sets[job] = std::move(set);
    });
  });
  return demo;
}

std::string generation_csv(const std::vector<GenerationRow>& rows) {
  std::string out = "method,seed,count,mse_generated,mse_prior\n";
  for (const auto& r : rows) {
    out += csv_cell(r.method) + ',' + std::to_string(r.seed) + ',' + std::to_string(r.count) + ',' +
           fmt(r.mse_generated) + ',' + fmt(r.mse_prior) + '\n';
  }
  return out;
}

namespace {

void write_row(const Matrix& m, std::size_t r, std::size_t side, const fs::path& stem) {
  std::vector<double> values(m.row(r).begin(), m.row(r).end());
  if (side == 0) {
    data::write_vector_file(values, stem.string() + ".vec");
    return;
  }
  data::GrayImage img{side, side, {}};
  for (double v : values) {
    img.pixels.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)));
  }
  data::write_pgm(img, stem.string() + ".pgm");
}

}  // namespace

void write_generation(const GenerationDemo& demo, const data::Dataset& test, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  spit(dir / "generation.csv", generation_csv(demo.rows));
  for (std::size_t i = 0; i < demo.rows.size(); ++i) {
    const auto& row = demo.rows[i];
    const auto& set = demo.sets[i];
    const fs::path sub = dir / (row.method + "_seed" + std::to_string(row.seed));
    fs::create_directories(sub, ec);
    if (ec) throw IoError("cannot create " + sub.string() + ": " + ec.message());
    for (std::size_t r = 0; r < set.target.rows; ++r) {
      const std::string k = std::to_string(r);
      write_row(set.source, r, test.image_side, sub / ("source_" + k));
      write_row(set.target, r, test.image_side, sub / ("target_" + k));
      write_row(set.generated, r, test.image_side, sub / ("generated_" + k));
    }
  }
}

}  // namespace mmvm::harness
