#pragma once

// Multimodal VAEs: independent per-modality VAEs, aggregation-based joint
// posterior VAEs (AVG, PoE, MoE, MoPoE) and the MMVM mixture-prior VAE.
//
// Objectives are returned as batch means, to be maximised. Every objective
// consumes a NoiseBlock whose slots are [batch, latent_dim] standard-normal
// draws; models that need fewer draws read a prefix of the slots, so two
// models fed the same block see the same randomness.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mmvm/aggregation.hpp"
#include "mmvm/gaussians.hpp"
#include "mmvm/matrix.hpp"
#include "mmvm/mlp.hpp"
#include "mmvm/tensor.hpp"

#include "json.hpp"

namespace mmvm::vae {

enum class LikelihoodKind { gaussian, bernoulli };

struct Likelihood {
  LikelihoodKind kind = LikelihoodKind::gaussian;
  double sigma = 1.0;  // gaussian only
};

enum class ModelKind { independent, aggregated, mmvm };

struct ModelSpec {
  std::vector<std::size_t> modality_dims;
  std::size_t latent_dim = 8;
  std::vector<std::size_t> hidden_sizes{64, 64};
  Likelihood likelihood;
  double beta = 1.0;
  ModelKind kind = ModelKind::mmvm;
  agg::AggregationKind aggregation = agg::AggregationKind::avg;  // aggregated only
  bool prior_expert = true;           // standard-normal expert in PoE/MoPoE products
  bool stratified = true;             // mixture expectation: one sample per component
  bool detach_mixture_prior = false;  // MMVM: stop gradients through h(z|X)
  std::size_t samples = 1;            // reparameterised samples per term
  bool zero_init_encoder_head = false;

  void validate() const;
  std::size_t modality_count() const { return modality_dims.size(); }
  /// "independent", "avg", "poe", "moe", "mopoe" or "mmvm".
  std::string method_name() const;
  /// Spec for a method name with everything else defaulted.
  static ModelSpec for_method(const std::string& method, std::vector<std::size_t> dims);
};

void to_json(nlohmann::json& j, const ModelSpec& s);
void from_json(const nlohmann::json& j, ModelSpec& s);

const std::vector<std::string>& all_methods();

class Model {
 public:
  Model(ModelSpec spec, std::uint64_t seed);

  const ModelSpec& spec() const { return spec_; }
  std::size_t modality_count() const { return spec_.modality_count(); }
  const nn::Mlp& encoder(std::size_t m) const;
  const nn::Mlp& decoder(std::size_t m) const;

  /// Declaration order: encoder 0, decoder 0, encoder 1, decoder 1, ...;
  /// within a network, layer by layer, weight before bias.
  std::vector<diff::Tensor> parameters() const;

  /// Deep copy with independent parameter storage.
  Model clone() const;

 private:
  ModelSpec spec_;
  std::vector<nn::Mlp> encoders_;
  std::vector<nn::Mlp> decoders_;
};

struct NoiseBlock {
  std::vector<diff::Tensor> slots;
  std::uint64_t selector_seed = 0;  // component draws when stratified == false
};

/// Number of noise slots an objective of this spec reads per step.
std::size_t noise_slots(const ModelSpec& spec);
NoiseBlock make_noise(std::size_t slots, std::size_t batch, std::size_t dim, std::uint64_t seed);

gauss::DiagGaussian encode(const Model& model, std::size_t m, const diff::Tensor& x);

/// Per-row log p(x_m | z).
diff::Tensor decode_loglik(const Model& model, std::size_t m, const diff::Tensor& z,
                           const diff::Tensor& x);
/// Decoder mean (gaussian) or probabilities (bernoulli); no gradients.
Matrix decode_mean(const Model& model, std::size_t m, const diff::Tensor& z);

diff::Tensor elbo_independent(const Model& model, const std::vector<diff::Tensor>& x,
                              const NoiseBlock& noise);
diff::Tensor elbo_aggregated(const Model& model, const std::vector<diff::Tensor>& x,
                             const NoiseBlock& noise);

struct MmvmRegularizer {
  diff::Tensor total;                     // [batch, 1]
  std::vector<diff::Tensor> per_modality;  // [batch, 1] each
};

/// One-sample estimate of sum_m KL(q_m || h_m) with h_m the uniform mixture of
/// all unimodal posteriors, each term computed as ln M - logsumexp_k(log q_k(z_m) - log q_m(z_m)).
MmvmRegularizer mmvm_regularizer(const std::vector<gauss::DiagGaussian>& posteriors,
                                 const std::vector<gauss::LatentSample>& samples,
                                 bool detach_mixture = false);

diff::Tensor mmvm_objective(const Model& model, const std::vector<diff::Tensor>& x,
                            const NoiseBlock& noise);

/// Dispatches on spec.kind.
diff::Tensor objective(const Model& model, const std::vector<diff::Tensor>& x,
                       const NoiseBlock& noise);

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 32;
  double lr = 1e-3;
  std::uint64_t seed = 0;
};

struct TrainedModel {
  Model model;
  std::vector<double> epoch_objective;  // mean objective per epoch
  /// Hash of batch orderings and slot-0 noise; equal for every kind trained
  /// with the same seed and data size.
  std::uint64_t stream_hash = 0;
};

/// Adam maximisation of objective() for `spec` on aligned per-modality rows.
TrainedModel train_model(const ModelSpec& spec, const std::vector<Matrix>& data,
                         const TrainConfig& config);

struct Representation {
  enum class Kind { modality, joint };
  Kind kind = Kind::modality;
  std::size_t modality = 0;

  static Representation of_modality(std::size_t m) { return {Kind::modality, m}; }
  static Representation joint() { return {Kind::joint, 0}; }
};

/// Whether the model defines a representation of this kind (joint only for
/// aggregation-based models).
bool has_representation(const ModelSpec& spec, const Representation& which);

/// Posterior means, one row per sample. Sampling-free.
Matrix extract_representations(const Model& model, const std::vector<Matrix>& data,
                               const Representation& which);

/// Decoder-mean reconstruction of modality `target` from modality `source`
/// alone. noise is [rows, latent_dim]; zero noise decodes the posterior mean.
Matrix conditional_generate(const Model& model, std::size_t source, const Matrix& x_source,
                            std::size_t target, const Matrix& noise);

void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

diff::Tensor to_tensor(const Matrix& m);

}  // namespace mmvm::vae
