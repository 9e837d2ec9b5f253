#pragma once

// Fully supervised baselines: per-modality MLP classifiers, their
// score-averaging ensemble and a late-fusion classifier that averages trunk
// features before one shared linear head.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmvm/matrix.hpp"
#include "mmvm/mlp.hpp"
#include "mmvm/tensor.hpp"

#include "json.hpp"

namespace mmvm::sup {

enum class Fusion { none, late_fusion };

struct ClassifierSpec {
  std::vector<std::size_t> input_dims;  // one per modality the classifier reads
  std::vector<std::size_t> hidden_sizes{64, 64};
  std::size_t label_count = 14;
  Fusion fusion = Fusion::none;

  /// ContractError unless none has one input and late_fusion has two or more.
  void validate() const;
};

void to_json(nlohmann::json& j, const ClassifierSpec& s);
void from_json(const nlohmann::json& j, ClassifierSpec& s);

class Classifier {
 public:
  Classifier(ClassifierSpec spec, std::uint64_t seed);

  const ClassifierSpec& spec() const { return spec_; }
  const nn::Mlp& trunk(std::size_t m) const { return trunks_.at(m); }
  nn::Linear& head() { return head_; }
  const nn::Linear& head() const { return head_; }

  /// relu(trunk_m(x_m)) for each input.
  std::vector<diff::Tensor> features(const std::vector<diff::Tensor>& x) const;
  /// Head applied to the mean of the feature vectors.
  diff::Tensor logits_from_features(const std::vector<diff::Tensor>& features) const;
  diff::Tensor logits(const std::vector<diff::Tensor>& x) const;

  /// Trunks in input order, then head weight and bias.
  std::vector<diff::Tensor> parameters() const;
  Classifier clone() const;

 private:
  ClassifierSpec spec_;
  std::vector<nn::Mlp> trunks_;
  nn::Linear head_;
};

/// Mean per-entry binary cross-entropy of logits against 0/1 targets.
diff::Tensor bce_with_logits(const diff::Tensor& logits, const diff::Tensor& targets);

struct SupervisedConfig {
  std::vector<std::size_t> hidden_sizes{64, 64};
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  double lr = 1e-3;
  std::size_t patience = 10;
};

void to_json(nlohmann::json& j, const SupervisedConfig& c);
void from_json(const nlohmann::json& j, SupervisedConfig& c);

/// Inputs of a classifier: aligned modality rows plus the n x L label matrix.
struct LabeledData {
  std::vector<Matrix> inputs;
  Matrix labels;

  std::size_t size() const { return labels.rows; }
};

/// Adam on mean BCE. When `validation` is non-empty the parameters from the
/// epoch with the best validation macro-AUROC are kept and training stops
/// after `patience` epochs without improvement; otherwise the last epoch is
/// kept.
Classifier train_supervised(const SupervisedConfig& config, const LabeledData& train,
                            const LabeledData& validation, Fusion fusion, std::uint64_t seed);

/// Sigmoid of the logits, n x L.
Matrix predict_scores(const Classifier& classifier, const std::vector<Matrix>& inputs);

/// Elementwise mean of equally shaped score matrices.
Matrix ensemble_scores(const std::vector<Matrix>& scores);

void save_classifier(const Classifier& classifier, const std::filesystem::path& path);
Classifier load_classifier(const std::filesystem::path& path);

}  // namespace mmvm::sup
