#pragma once

// Bimodal (frontal, lateral) datasets: a synthetic generator that mimics the
// study/subject structure of chest X-ray collections, pairing and label
// binarisation rules, subject-grouped splits, and on-disk manifests.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmvm/matrix.hpp"

#include "json.hpp"

namespace mmvm::data {

/// The 14 CheXpert-style labels, in manifest column order.
const std::vector<std::string>& default_label_names();

struct BimodalSample {
  std::string sample_id;
  std::string subject_id;
  std::string study_id;
  std::string frontal_ref;  // identifies the source frontal image
  std::string lateral_ref;
  std::vector<double> x_f;
  std::vector<double> x_l;
  std::vector<std::uint8_t> labels;
};

struct Dataset {
  std::vector<std::string> label_names;
  std::size_t dim_f = 0;
  std::size_t dim_l = 0;
  std::size_t image_side = 0;  // 0 for vector modalities
  std::vector<BimodalSample> samples;

  std::size_t size() const { return samples.size(); }
  std::size_t label_count() const { return label_names.size(); }
  /// {frontal rows, lateral rows}.
  std::vector<Matrix> modalities() const;
  Matrix modality(std::size_t m) const;
  /// n x L matrix of 0/1 labels.
  Matrix labels() const;
  Dataset subset(const std::vector<std::size_t>& indices) const;
  /// Distinct subject ids in first-appearance order.
  std::vector<std::string> subjects() const;
  /// Throws ContractError if labels are not binary, dimensions disagree or a
  /// (study, frontal, lateral) tuple repeats.
  void validate() const;
};

// ---------------------------------------------------------------------------
// Pairing and labels

struct Image {
  std::string ref;
  std::vector<double> values;
};

struct Study {
  std::string subject_id;
  std::string study_id;
  std::vector<std::uint8_t> labels;
  std::vector<Image> frontal;
  std::vector<Image> lateral;
};

/// Every frontal image paired with every lateral image of the same study.
/// Studies without at least one image of each view contribute nothing.
std::vector<BimodalSample> pair_studies(const std::vector<Study>& studies);

/// CheXpert CSV cell to a binary label: "1" is positive; "0", "-1" and blank
/// are negative. Anything else is a ParseError mentioning `context`.
std::uint8_t binarize_label(const std::string& cell, const std::string& context = {});

// ---------------------------------------------------------------------------
// Synthetic data

enum class OutputForm { vector, image };

struct SyntheticConfig {
  std::size_t n_subjects = 1500;
  std::array<std::size_t, 2> studies_per_subject{1, 2};
  std::array<std::size_t, 2> frontal_per_study{0, 2};
  std::array<std::size_t, 2> lateral_per_study{1, 2};
  std::size_t factor_dim = 4;
  std::size_t label_count = 14;
  std::vector<double> base_rates;  // empty: built-in spread of rates in [0.1, 0.4]
  double label_effect = 1.5;       // scale of the label-to-factor map
  double sigma_f = 0.3;
  double sigma_l = 0.45;
  std::size_t nuisance_f = 6;
  std::size_t nuisance_l = 6;
  double signal_scale = 1.0;
  double nuisance_scale = 1.0;
  OutputForm form = OutputForm::vector;
  std::size_t dim_f = 32;
  std::size_t dim_l = 24;
  std::size_t image_side = 16;

  void validate() const;
  std::vector<double> effective_base_rates() const;
};

void to_json(nlohmann::json& j, const SyntheticConfig& c);
/// Unknown keys are rejected with ConfigError.
void from_json(const nlohmann::json& j, SyntheticConfig& c);

/// Latent structure behind a synthetic dataset, exposed for oracle tests.
struct SyntheticTruth {
  std::vector<std::string> subject_ids;
  Matrix factors;  // n_subjects x factor_dim, noise-free-of-view shared factor u
  Matrix labels;   // n_subjects x L
};

Dataset generate_synthetic(const SyntheticConfig& config, std::uint64_t seed,
                           SyntheticTruth* truth = nullptr);

// ---------------------------------------------------------------------------
// Splits

/// Shuffles subjects by seed, seeds every split with one subject, then hands
/// each remaining subject to the split furthest below its target count.
std::array<Dataset, 3> subject_split(const Dataset& dataset, const std::array<double, 3>& ratios,
                                     std::uint64_t seed);

// ---------------------------------------------------------------------------
// Files

struct ManifestRow {
  std::string sample_id;
  std::string subject_id;
  std::string study_id;
  std::string path_frontal;
  std::string path_lateral;
  std::vector<std::uint8_t> labels;
};

struct Manifest {
  std::vector<std::string> label_names;
  std::vector<ManifestRow> rows;
};

Manifest read_manifest(const std::filesystem::path& path, bool raw_labels = false);
void write_manifest(const Manifest& manifest, const std::filesystem::path& path);

struct GrayImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // row-major
};

GrayImage read_pgm(const std::filesystem::path& path);
void write_pgm(const GrayImage& image, const std::filesystem::path& path);

std::vector<double> read_vector_file(const std::filesystem::path& path);
void write_vector_file(const std::vector<double>& values, const std::filesystem::path& path);

/// Largest centred square; pixel values in [0, 255].
Matrix center_crop(const Matrix& image);
/// Bilinear resampling with pixel-centre alignment.
Matrix resize_bilinear(const Matrix& image, std::size_t rows, std::size_t cols);

struct LoadOptions {
  bool center_crop = true;
  std::size_t size = 32;
  bool raw_labels = false;
};

/// Reads a manifest and every file it references (paths relative to the
/// manifest's directory).
Dataset load_dataset(const std::filesystem::path& manifest_path, const LoadOptions& options = {});

/// Writes manifest.csv plus one file per distinct image under dir and returns
/// the manifest path. Images are written as PGM, vectors in the vector format.
std::filesystem::path write_dataset(const Dataset& dataset, const std::filesystem::path& dir);

}  // namespace mmvm::data
