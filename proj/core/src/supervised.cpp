#include "mmvm/supervised.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mmvm/adam.hpp"
#include "mmvm/checkpoint.hpp"
#include "mmvm/error.hpp"
#include "mmvm/eval.hpp"
#include "mmvm/rng.hpp"

namespace mmvm::sup {

using diff::Tensor;
using nlohmann::json;

namespace {

Tensor to_tensor(const Matrix& m) { return Tensor::from(m.rows, m.cols, m.values); }

std::string fusion_name(Fusion f) { return f == Fusion::none ? "none" : "late_fusion"; }

Fusion parse_fusion(const std::string& s) {
  if (s == "none") return Fusion::none;
  if (s == "late_fusion") return Fusion::late_fusion;
  throw ParseError("unknown fusion '" + s + "'");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const char* what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }) ==
        allowed.end()) {
      throw ConfigError(std::string(what) + ": unknown key '" + key + "'");
    }
  }
}

}  // namespace

void ClassifierSpec::validate() const {
  if (input_dims.empty()) throw ContractError("classifier needs at least one input");
  if (fusion == Fusion::none && input_dims.size() != 1) {
    throw ContractError("a classifier without fusion reads exactly one modality");
  }
  if (fusion == Fusion::late_fusion && input_dims.size() < 2) {
    throw ContractError("late fusion needs at least two modalities");
  }
  if (hidden_sizes.empty()) throw ContractError("classifier trunk needs a hidden layer");
  if (label_count == 0) throw ContractError("label_count must be positive");
  for (auto d : input_dims) {
    if (d == 0) throw ContractError("input dimension must be positive");
  }
  for (auto h : hidden_sizes) {
    if (h == 0) throw ContractError("hidden sizes must be positive");
  }
}

void to_json(json& j, const ClassifierSpec& s) {
  j = json{{"model", "classifier"},
           {"input_dims", s.input_dims},
           {"hidden_sizes", s.hidden_sizes},
           {"label_count", s.label_count},
           {"fusion", fusion_name(s.fusion)}};
}

void from_json(const json& j, ClassifierSpec& s) {
  check_keys(j, {"model", "input_dims", "hidden_sizes", "label_count", "fusion"}, "classifier spec");
  s.input_dims = j.at("input_dims").get<std::vector<std::size_t>>();
  s.hidden_sizes = j.at("hidden_sizes").get<std::vector<std::size_t>>();
  s.label_count = j.at("label_count").get<std::size_t>();
  s.fusion = parse_fusion(j.at("fusion").get<std::string>());
}

void to_json(json& j, const SupervisedConfig& c) {
  j = json{{"hidden_sizes", c.hidden_sizes},
           {"epochs", c.epochs},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"patience", c.patience}};
}

void from_json(const json& j, SupervisedConfig& c) {
  check_keys(j, {"hidden_sizes", "epochs", "batch_size", "lr", "patience"}, "supervised config");
  c.hidden_sizes = j.value("hidden_sizes", c.hidden_sizes);
  c.epochs = j.value("epochs", c.epochs);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.lr = j.value("lr", c.lr);
  c.patience = j.value("patience", c.patience);
}

Classifier::Classifier(ClassifierSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  Rng rng(seed);
  for (std::size_t d : spec_.input_dims) {
    std::vector<std::size_t> sizes{d};
    sizes.insert(sizes.end(), spec_.hidden_sizes.begin(), spec_.hidden_sizes.end());
    trunks_.emplace_back(sizes, rng);
  }
  // Head shares the Mlp initialisation rule through a one-layer network.
  nn::Mlp head_net({spec_.hidden_sizes.back(), spec_.label_count}, rng);
  head_ = head_net.layers().front();
}

std::vector<Tensor> Classifier::features(const std::vector<Tensor>& x) const {
  if (x.size() != trunks_.size()) {
    throw ConformanceError("classifier reads " + std::to_string(trunks_.size()) +
                           " modalities, got " + std::to_string(x.size()));
  }
  std::vector<Tensor> out;
  for (std::size_t m = 0; m < x.size(); ++m) {
    if (x[m].cols() != spec_.input_dims[m]) {
      throw ConformanceError("classifier input " + std::to_string(m) + " has dimension " +
                             std::to_string(x[m].cols()) + ", expected " +
                             std::to_string(spec_.input_dims[m]));
    }
    out.push_back(diff::relu(trunks_[m].forward(x[m])));
  }
  return out;
}

Tensor Classifier::logits_from_features(const std::vector<Tensor>& features) const {
  Tensor fused = features.front();
  for (std::size_t m = 1; m < features.size(); ++m) fused = fused + features[m];
  if (features.size() > 1) fused = diff::scale(fused, 1.0 / static_cast<double>(features.size()));
  return head_.forward(fused);
}

Tensor Classifier::logits(const std::vector<Tensor>& x) const {
  return logits_from_features(features(x));
}

std::vector<Tensor> Classifier::parameters() const {
  std::vector<Tensor> out;
  for (const auto& t : trunks_) {
    auto p = t.parameters();
    out.insert(out.end(), p.begin(), p.end());
  }
  out.push_back(head_.weight);
  out.push_back(head_.bias);
  return out;
}

Classifier Classifier::clone() const {
  Classifier c = *this;
  for (auto& t : c.trunks_) {
    for (auto& layer : t.layers()) {
      layer.weight = layer.weight.clone();
      layer.bias = layer.bias.clone();
    }
  }
  c.head_.weight = head_.weight.clone();
  c.head_.bias = head_.bias.clone();
  return c;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  if (logits.shape() != targets.shape()) {
    throw ConformanceError("bce: logits " + diff::to_string(logits.shape()) + " vs targets " +
                           diff::to_string(targets.shape()));
  }
  // -[y log s(l) + (1-y) log(1-s(l))] = softplus(l) - y l
  return diff::mean(diff::softplus(logits) - logits * targets);
}

namespace {

void check_data(const LabeledData& d, const char* what) {
  for (const auto& m : d.inputs) {
    if (m.rows != d.labels.rows) {
      throw ConformanceError(std::string(what) + ": inputs and labels have different row counts");
    }
  }
}

double validation_auroc(const Classifier& c, const LabeledData& val) {
  if (val.size() == 0) return std::nan("");
  try {
    return eval::macro_auroc(predict_scores(c, val.inputs), val.labels);
  } catch (const DegenerateMetricError&) {
    return std::nan("");
  }
}

}  // namespace

Classifier train_supervised(const SupervisedConfig& config, const LabeledData& train,
                            const LabeledData& validation, Fusion fusion, std::uint64_t seed) {
  if (train.size() == 0) throw ContractError("train_supervised: labeled subset is empty");
  if (config.batch_size == 0 || !(config.lr > 0.0)) {
    throw ContractError("train_supervised: batch_size and lr must be positive");
  }
  check_data(train, "train_supervised");
  check_data(validation, "train_supervised validation");

  ClassifierSpec spec;
  for (const auto& m : train.inputs) spec.input_dims.push_back(m.cols);
  spec.hidden_sizes = config.hidden_sizes;
  spec.label_count = train.labels.cols;
  spec.fusion = fusion;
  Classifier model(spec, derive_seed(seed, "init"));

  auto params = model.parameters();
  auto adam = diff::AdamState::for_params(params, {.lr = config.lr});
  const std::size_t n = train.size();
  std::vector<std::size_t> order(n);

  Classifier best = model.clone();
  double best_auc = -1.0;
  std::size_t since_best = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(seed, "batches", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      std::vector<Tensor> x;
      for (const auto& m : train.inputs) x.push_back(to_tensor(m.select_rows(idx)));
      Tensor y = to_tensor(train.labels.select_rows(idx));

      diff::TapeScope scope;
      Tensor loss = bce_with_logits(model.logits(x), y);
      if (!std::isfinite(loss.item())) {
        throw NumericError("non-finite classifier loss at epoch " + std::to_string(epoch));
      }
      diff::backward(loss);
      diff::adam_step(params, adam);
    }

    const double auc = validation_auroc(model, validation);
    if (std::isnan(auc)) continue;
    if (auc > best_auc) {
      best_auc = auc;
      best = model.clone();
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  return best_auc >= 0.0 ? best : model;
}

Matrix predict_scores(const Classifier& classifier, const std::vector<Matrix>& inputs) {
  if (inputs.empty()) throw ConformanceError("predict_scores: no inputs");
  std::vector<Tensor> x;
  for (const auto& m : inputs) {
    if (m.rows != inputs.front().rows) {
      throw ConformanceError("predict_scores: inputs have different row counts");
    }
    x.push_back(to_tensor(m));
  }
  diff::NoGradGuard guard;
  Tensor l = classifier.logits(x);
  Matrix out(l.rows(), l.cols());
  for (std::size_t i = 0; i < out.values.size(); ++i) {
    const double v = l.data()[i];
    out.values[i] = v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v));
  }
  return out;
}

Matrix ensemble_scores(const std::vector<Matrix>& scores) {
  if (scores.empty()) throw ContractError("ensemble_scores: no score matrices");
  Matrix out(scores.front().rows, scores.front().cols);
  for (const auto& s : scores) {
    if (s.rows != out.rows || s.cols != out.cols) {
      throw ConformanceError("ensemble_scores: score matrices differ in shape");
    }
    for (std::size_t i = 0; i < s.values.size(); ++i) out.values[i] += s.values[i];
  }
  const double k = static_cast<double>(scores.size());
  for (double& v : out.values) v /= k;
  return out;
}

void save_classifier(const Classifier& classifier, const std::filesystem::path& path) {
  json j = classifier.spec();
  auto params = classifier.parameters();
  write_checkpoint(path, j.dump(), params);
}

Classifier load_classifier(const std::filesystem::path& path) {
  Checkpoint ck = read_checkpoint(path);
  json j;
  try {
    j = json::parse(ck.spec);
  } catch (const json::exception& e) {
    throw ParseError("checkpoint spec is not valid JSON: " + std::string(e.what()));
  }
  if (j.value("model", std::string()) != "classifier") {
    throw ParseError("checkpoint " + path.string() + " does not hold a classifier");
  }
  Classifier c(j.get<ClassifierSpec>(), 0);
  auto params = c.parameters();
  restore_parameters(ck, params);
  return c;
}

}  // namespace mmvm::sup
