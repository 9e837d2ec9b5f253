#pragma once

// Experiment orchestration: latent-representation probing across model
// kinds, the label-availability sweep against supervised baselines,
// cross-modal generation, and CSV / plot-data reporting.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mmvm/data.hpp"
#include "mmvm/eval.hpp"
#include "mmvm/supervised.hpp"
#include "mmvm/vae.hpp"

#include "json.hpp"

namespace mmvm::harness {

struct ModelOptions {
  std::size_t latent_dim = 8;
  std::vector<std::size_t> hidden_sizes{64, 64};
  std::string likelihood = "auto";  // auto: bernoulli for images, gaussian otherwise
  double sigma = 1.0;
  double beta = 1.0;
  std::size_t samples = 1;
  bool stratified = true;
  bool prior_expert = true;
  bool detach_mixture_prior = false;
};

struct ProbeOptions {
  std::size_t n_estimators = 100;
  std::size_t max_depth = 10;
};

struct SweepOptions {
  std::vector<double> fractions{0.01, 0.05, 0.10, 0.25, 0.50, 1.00};
  std::vector<std::size_t> sizes;  // when non-empty, used instead of fractions
};

struct GenerationOptions {
  std::size_t count = 16;
  std::size_t source = 1;  // lateral
  std::size_t target = 0;  // frontal
  bool sample = false;     // false decodes the posterior mean
};

/// Everything an experiment needs. JSON keys mirror the field names; unknown
/// keys anywhere are rejected with ConfigError.
struct ExperimentConfig {
  std::optional<data::SyntheticConfig> synthetic;  // exactly one of synthetic / manifest
  std::filesystem::path manifest;
  data::LoadOptions load;
  std::uint64_t data_seed = 0;
  std::array<double, 3> split{0.8, 0.1, 0.1};
  std::vector<std::string> methods = vae::all_methods();
  std::vector<std::uint64_t> seeds{0, 1, 2};
  ModelOptions model;
  vae::TrainConfig train;  // seed field unused; seeds come from `seeds`
  ProbeOptions probe;
  SweepOptions sweep;
  sup::SupervisedConfig supervised;
  GenerationOptions generation;
  std::filesystem::path out = "results";

  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);
/// Parses and validates; ConfigError on any problem.
ExperimentConfig load_config(const std::filesystem::path& path);
ExperimentConfig parse_config(const std::string& text);

struct SplitData {
  data::Dataset train;
  data::Dataset validation;
  data::Dataset test;
};

SplitData load_data(const ExperimentConfig& config);

vae::ModelSpec model_spec(const ExperimentConfig& config, const std::string& method,
                          const data::Dataset& dataset);

// ---------------------------------------------------------------------------
// Results

struct ResultRow {
  std::string method;
  std::string representation;
  std::string label;
  std::uint64_t seed = 0;
  std::size_t size = 0;  // labeled-set size; sweep tables only
  double value = 0.0;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct ResultTable {
  std::string name;
  bool has_size = false;
  std::vector<ResultRow> rows;

  friend bool operator==(const ResultTable&, const ResultTable&) = default;
};

struct SummaryRow {
  std::string method;
  std::string representation;
  std::string label;  // a label name, or "macro" for the mean over labels
  std::size_t size = 0;
  double mean = 0.0;
  std::optional<double> std;  // only with two or more seeds
  std::size_t seeds = 0;
};

/// Mean and sample standard deviation over seeds per (method,
/// representation, size, label), plus per-seed macro averages over labels.
std::vector<SummaryRow> summarize(const ResultTable& table);

struct CurvePoint {
  std::string method;
  std::size_t size = 0;
  double mean = 0.0;
  std::optional<double> std;
};

/// Per (method, size): each seed's mean over every label and representation
/// of that method, then mean/std over seeds.
std::vector<CurvePoint> sweep_curve(const ResultTable& table);

std::string table_csv(const ResultTable& table);
ResultTable parse_table_csv(const std::string& text, const std::string& name);
std::string summary_csv(const ResultTable& table);
std::string curve_data(const ResultTable& table);

/// Writes <name>.csv, <name>_summary.csv and, for sweep tables,
/// <name>_curve.dat under dir. IoError if dir cannot be written.
void write_report(const std::vector<ResultTable>& tables, const std::filesystem::path& dir);
ResultTable read_table(const std::filesystem::path& csv);

// ---------------------------------------------------------------------------
// Experiments

/// Runs fn(0..count-1) on up to `threads` workers. The first exception (by
/// job index) is rethrown after all workers join.
void parallel_for(std::size_t count, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct ProbeResult {
  double auroc = 0.0;
  bool defined = false;  // false when the test labels have one class
};

/// Random-forest probe for one label: fit on train features, AUROC on test.
/// Single-class training labels give a constant score (AUROC 0.5).
ProbeResult probe_label(const Matrix& train_x, const std::vector<double>& train_y,
                        const Matrix& test_x, const std::vector<double>& test_y,
                        const ProbeOptions& options, std::uint64_t seed);

struct LatentExperiment {
  ResultTable table;
  /// stream_hashes[s][k]: batch/noise stream hash of methods[k] at seeds[s].
  std::vector<std::vector<std::uint64_t>> stream_hashes;
};

LatentExperiment run_latent_experiment(const ExperimentConfig& config, const SplitData& data,
                                       std::size_t threads = 1);

/// Labeled-set sizes for a training split of n samples.
std::vector<std::size_t> sweep_sizes(const SweepOptions& options, std::size_t n);

ResultTable run_label_sweep(const ExperimentConfig& config, const SplitData& data,
                            std::size_t threads = 1);

struct GenerationRow {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t count = 0;
  double mse_generated = 0.0;
  double mse_prior = 0.0;
};

struct GeneratedSet {
  Matrix source;
  Matrix target;
  Matrix generated;
  Matrix prior;  // decoded standard-normal draws
};

/// Cross-modal generation on the first `count` rows. ContractError for a
/// model that was never trained.
GeneratedSet generate_pairs(const vae::TrainedModel& model, const data::Dataset& test,
                            const GenerationOptions& options, std::uint64_t seed);

double mean_squared_error(const Matrix& a, const Matrix& b);

struct GenerationDemo {
  std::vector<GenerationRow> rows;
  std::vector<GeneratedSet> sets;  // parallel to rows
};

/// Every configured method that shares a latent space across modalities.
GenerationDemo run_generation_demo(const ExperimentConfig& config, const SplitData& data,
                                   std::size_t threads = 1);

std::string generation_csv(const std::vector<GenerationRow>& rows);
/// generation.csv plus per-(method, seed) source/target/generated files.
void write_generation(const GenerationDemo& demo, const data::Dataset& test,
                      const std::filesystem::path& dir);

}  // namespace mmvm::harness
