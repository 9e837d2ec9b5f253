#include "mmvm/vae.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mmvm/adam.hpp"
#include "mmvm/checkpoint.hpp"
#include "mmvm/error.hpp"
#include "mmvm/rng.hpp"

namespace mmvm::vae {

using diff::Tensor;
using gauss::DiagGaussian;
using json = nlohmann::json;

namespace {

constexpr double kLog2Pi = 1.8378770664093453;

std::string likelihood_name(LikelihoodKind k) {
  return k == LikelihoodKind::gaussian ? "gaussian" : "bernoulli";
}

std::string kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::independent: return "independent";
    case ModelKind::aggregated: return "aggregated";
    case ModelKind::mmvm: return "mmvm";
  }
  return "?";
}

}  // namespace

// ---------------------------------------------------------------------------
// Spec

void ModelSpec::validate() const {
  if (modality_dims.empty()) throw ContractError("model spec needs at least one modality");
  for (std::size_t d : modality_dims) {
    if (d == 0) throw ContractError("modality dimensions must be positive");
  }
  if (latent_dim == 0) throw ContractError("latent_dim must be at least 1");
  for (std::size_t h : hidden_sizes) {
    if (h == 0) throw ContractError("hidden sizes must be positive");
  }
  if (likelihood.kind == LikelihoodKind::gaussian && !(likelihood.sigma > 0.0)) {
    throw ContractError("gaussian likelihood needs sigma > 0");
  }
  if (!(beta >= 0.0)) throw ContractError("beta must be non-negative");
  if (samples == 0) throw ContractError("samples must be at least 1");
}

std::string ModelSpec::method_name() const {
  switch (kind) {
    case ModelKind::independent: return "independent";
    case ModelKind::mmvm: return "mmvm";
    case ModelKind::aggregated: return agg::to_string(aggregation);
  }
  return "?";
}

ModelSpec ModelSpec::for_method(const std::string& method, std::vector<std::size_t> dims) {
  ModelSpec s;
  s.modality_dims = std::move(dims);
  if (method == "independent") {
    s.kind = ModelKind::independent;
  } else if (method == "mmvm") {
    s.kind = ModelKind::mmvm;
  } else {
    s.kind = ModelKind::aggregated;
    s.aggregation = agg::parse_aggregation_kind(method);
  }
  return s;
}

const std::vector<std::string>& all_methods() {
  static const std::vector<std::string> methods{"independent", "avg", "moe",
                                                "mopoe",       "poe", "mmvm"};
  return methods;
}

void to_json(json& j, const ModelSpec& s) {
  j = json{{"model", "vae"},
           {"modality_dims", s.modality_dims},
           {"latent_dim", s.latent_dim},
           {"hidden_sizes", s.hidden_sizes},
           {"likelihood", likelihood_name(s.likelihood.kind)},
           {"sigma", s.likelihood.sigma},
           {"beta", s.beta},
           {"kind", kind_name(s.kind)},
           {"aggregation", agg::to_string(s.aggregation)},
           {"prior_expert", s.prior_expert},
           {"stratified", s.stratified},
           {"detach_mixture_prior", s.detach_mixture_prior},
           {"samples", s.samples},
           {"zero_init_encoder_head", s.zero_init_encoder_head}};
}

void from_json(const json& j, ModelSpec& s) {
  s = ModelSpec{};
  j.at("modality_dims").get_to(s.modality_dims);
  s.latent_dim = j.value("latent_dim", s.latent_dim);
  s.hidden_sizes = j.value("hidden_sizes", s.hidden_sizes);
  const std::string lik = j.value("likelihood", std::string("gaussian"));
  if (lik == "gaussian") {
    s.likelihood.kind = LikelihoodKind::gaussian;
  } else if (lik == "bernoulli") {
    s.likelihood.kind = LikelihoodKind::bernoulli;
  } else {
    throw ParseError("unknown likelihood '" + lik + "'");
  }
  s.likelihood.sigma = j.value("sigma", s.likelihood.sigma);
  s.beta = j.value("beta", s.beta);
  const std::string kind = j.value("kind", std::string("mmvm"));
  if (kind == "independent") {
    s.kind = ModelKind::independent;
  } else if (kind == "aggregated") {
    s.kind = ModelKind::aggregated;
  } else if (kind == "mmvm") {
    s.kind = ModelKind::mmvm;
  } else {
    throw ParseError("unknown model kind '" + kind + "'");
  }
  s.aggregation = agg::parse_aggregation_kind(j.value("aggregation", std::string("avg")));
  s.prior_expert = j.value("prior_expert", s.prior_expert);
  s.stratified = j.value("stratified", s.stratified);
  s.detach_mixture_prior = j.value("detach_mixture_prior", s.detach_mixture_prior);
  s.samples = j.value("samples", s.samples);
  s.zero_init_encoder_head = j.value("zero_init_encoder_head", s.zero_init_encoder_head);
}

// ---------------------------------------------------------------------------
// Model

Model::Model(ModelSpec spec, std::uint64_t seed) : spec_(std::move(spec)) {
  spec_.validate();
  const std::size_t d = spec_.latent_dim;
  for (std::size_t m = 0; m < spec_.modality_count(); ++m) {
    std::vector<std::size_t> enc{spec_.modality_dims[m]};
    enc.insert(enc.end(), spec_.hidden_sizes.begin(), spec_.hidden_sizes.end());
    enc.push_back(2 * d);
    std::vector<std::size_t> dec{d};
    dec.insert(dec.end(), spec_.hidden_sizes.rbegin(), spec_.hidden_sizes.rend());
    dec.push_back(spec_.modality_dims[m]);

    Rng enc_rng(derive_seed(seed, "encoder", m));
    Rng dec_rng(derive_seed(seed, "decoder", m));
    encoders_.emplace_back(enc, enc_rng, spec_.zero_init_encoder_head);
    decoders_.emplace_back(dec, dec_rng);
  }
}

const nn::Mlp& Model::encoder(std::size_t m) const {
  if (m >= encoders_.size()) {
    throw ContractError("unknown modality " + std::to_string(m));
  }
  return encoders_[m];
}

const nn::Mlp& Model::decoder(std::size_t m) const {
  if (m >= decoders_.size()) {
    throw ContractError("unknown modality " + std::to_string(m));
  }
  return decoders_[m];
}

std::vector<Tensor> Model::parameters() const {
  std::vector<Tensor> out;
  for (std::size_t m = 0; m < encoders_.size(); ++m) {
    for (auto& p : encoders_[m].parameters()) out.push_back(p);
    for (auto& p : decoders_[m].parameters()) out.push_back(p);
  }
  return out;
}

Model Model::clone() const {
  Model copy = *this;
  auto deep = [](nn::Mlp& net) {
    for (auto& layer : net.layers()) {
      layer.weight = layer.weight.clone();
      layer.bias = layer.bias.clone();
    }
  };
  for (auto& e : copy.encoders_) deep(e);
  for (auto& d : copy.decoders_) deep(d);
  return copy;
}

// ---------------------------------------------------------------------------
// Noise

std::size_t noise_slots(const ModelSpec& spec) {
  const std::size_t m = spec.modality_count();
  std::size_t per = m;
  if (spec.kind == ModelKind::aggregated) {
    switch (spec.aggregation) {
      case agg::AggregationKind::avg:
      case agg::AggregationKind::poe: per = 1; break;
      case agg::AggregationKind::moe: per = m; break;
      case agg::AggregationKind::mopoe: per = (std::size_t{1} << m) - 1; break;
    }
  }
  return per * spec.samples;
}

NoiseBlock make_noise(std::size_t slots, std::size_t batch, std::size_t dim, std::uint64_t seed) {
  NoiseBlock nb;
  Rng rng(seed);
  for (std::size_t k = 0; k < slots; ++k) {
    nb.slots.push_back(Tensor::from(batch, dim, standard_normal(rng, batch * dim)));
  }
  nb.selector_seed = derive_seed(seed, "selector");
  return nb;
}

// ---------------------------------------------------------------------------
// Encoders / decoders

DiagGaussian encode(const Model& model, std::size_t m, const Tensor& x) {
  const nn::Mlp& enc = model.encoder(m);
  if (x.cols() != enc.input_dim()) {
    throw ConformanceError("modality " + std::to_string(m) + " expects dimension " +
                           std::to_string(enc.input_dim()) + ", got " + std::to_string(x.cols()));
  }
  const std::size_t d = model.spec().latent_dim;
  Tensor out = enc.forward(x);
  return DiagGaussian::make(diff::slice_cols(out, 0, d), diff::slice_cols(out, d, 2 * d));
}

Tensor decode_loglik(const Model& model, std::size_t m, const Tensor& z, const Tensor& x) {
  const nn::Mlp& dec = model.decoder(m);
  if (z.cols() != model.spec().latent_dim) {
    throw ConformanceError("latent sample has dimension " + std::to_string(z.cols()) +
                           ", model latent_dim is " + std::to_string(model.spec().latent_dim));
  }
  if (x.cols() != dec.output_dim() || x.rows() != z.rows()) {
    throw ConformanceError("decode_loglik: target " + diff::to_string(x.shape()) +
                           " does not conform");
  }
  Tensor out = dec.forward(z);
  const auto& lik = model.spec().likelihood;
  if (lik.kind == LikelihoodKind::gaussian) {
    const double s2 = lik.sigma * lik.sigma;
    Tensor sq = diff::square(diff::sub(x, out));
    Tensor per_dim = diff::shift(diff::scale(sq, -0.5 / s2), -0.5 * (kLog2Pi + std::log(s2)));
    return diff::sum_axis(per_dim, 1);
  }
  for (double v : x.data()) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw DomainError("bernoulli likelihood needs targets in [0,1], got " + std::to_string(v));
    }
  }
  // x*l - softplus(l) == x ln sigmoid(l) + (1-x) ln(1 - sigmoid(l))
  return diff::sum_axis(diff::sub(diff::mul(x, out), diff::softplus(out)), 1);
}

Matrix decode_mean(const Model& model, std::size_t m, const Tensor& z) {
  diff::NoGradGuard guard;
  Tensor out = model.decoder(m).forward(z);
  Matrix result(out.rows(), out.cols());
  auto v = out.data();
  const bool bern = model.spec().likelihood.kind == LikelihoodKind::bernoulli;
  for (std::size_t i = 0; i < v.size(); ++i) {
    result.values[i] = bern ? 1.0 / (1.0 + std::exp(-v[i])) : v[i];
  }
  return result;
}

// ---------------------------------------------------------------------------
// Objectives

namespace {

void check_inputs(const Model& model, const std::vector<Tensor>& x, const NoiseBlock& noise) {
  if (x.size() != model.modality_count()) {
    throw ContractError("expected " + std::to_string(model.modality_count()) +
                        " modalities, got " + std::to_string(x.size()));
  }
  for (const auto& t : x) {
    if (t.rows() != x.front().rows()) throw ConformanceError("modalities have different batch sizes");
  }
  if (noise.slots.size() < noise_slots(model.spec())) {
    throw ContractError("objective needs " + std::to_string(noise_slots(model.spec())) +
                        " noise slots, got " + std::to_string(noise.slots.size()));
  }
}

Tensor sum_terms(const std::vector<Tensor>& terms) {
  Tensor acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = diff::add(acc, terms[i]);
  return acc;
}

Tensor reconstruct_all(const Model& model, const Tensor& z, const std::vector<Tensor>& x) {
  std::vector<Tensor> terms;
  for (std::size_t m = 0; m < x.size(); ++m) terms.push_back(decode_loglik(model, m, z, x[m]));
  return sum_terms(terms);
}

std::vector<DiagGaussian> encode_all(const Model& model, const std::vector<Tensor>& x) {
  std::vector<DiagGaussian> q;
  for (std::size_t m = 0; m < x.size(); ++m) q.push_back(encode(model, m, x[m]));
  return q;
}

// Per-row reconstruction minus beta * KL(q || N(0, I)), the shared shape of the
// single-Gaussian objectives.
Tensor gaussian_elbo_rows(const Tensor& recon, const DiagGaussian& q, double beta) {
  DiagGaussian prior = DiagGaussian::standard(q.batch(), q.dim());
  return diff::sub(recon, diff::scale(gauss::kl_diag(q, prior), beta));
}

Tensor average(const std::vector<Tensor>& rows) {
  Tensor acc = sum_terms(rows);
  if (rows.size() > 1) acc = diff::scale(acc, 1.0 / static_cast<double>(rows.size()));
  return acc;
}

}  // namespace

Tensor elbo_independent(const Model& model, const std::vector<Tensor>& x, const NoiseBlock& noise) {
  if (model.spec().kind != ModelKind::independent) {
    throw ContractError("elbo_independent called on a " + model.spec().method_name() + " model");
  }
  check_inputs(model, x, noise);
  const std::size_t m_count = x.size();
  const auto q = encode_all(model, x);
  std::vector<Tensor> repeats;
  for (std::size_t s = 0; s < model.spec().samples; ++s) {
    std::vector<Tensor> terms;
    for (std::size_t m = 0; m < m_count; ++m) {
      Tensor z = gauss::sample_reparam(q[m], noise.slots[s * m_count + m]).z;
      terms.push_back(gaussian_elbo_rows(decode_loglik(model, m, z, x[m]), q[m], model.spec().beta));
    }
    repeats.push_back(sum_terms(terms));
  }
  return diff::mean(average(repeats));
}

Tensor elbo_aggregated(const Model& model, const std::vector<Tensor>& x, const NoiseBlock& noise) {
  const auto& spec = model.spec();
  if (spec.kind != ModelKind::aggregated) {
    throw ContractError("elbo_aggregated called on a " + spec.method_name() + " model");
  }
  check_inputs(model, x, noise);
  const auto q = encode_all(model, x);
  const agg::JointPosterior jp = agg::aggregate(spec.aggregation, q, {spec.prior_expert});
  const std::size_t k_count = jp.component_count();
  const std::size_t b = x.front().rows(), d = spec.latent_dim;

  std::vector<Tensor> repeats;
  Rng selector(noise.selector_seed);
  for (std::size_t s = 0; s < spec.samples; ++s) {
    const std::size_t base = s * k_count;
    if (k_count == 1) {
      // Single Gaussian joint posterior: the KL to the prior is analytic.
      const DiagGaussian& g = jp.component(0);
      Tensor z = gauss::sample_reparam(g, noise.slots[base]).z;
      repeats.push_back(gaussian_elbo_rows(reconstruct_all(model, z, x), g, spec.beta));
      continue;
    }
    DiagGaussian prior = DiagGaussian::standard(b, d);
    auto term = [&](const Tensor& z) {
      Tensor log_ratio = diff::sub(gauss::log_prob_diag(prior, z), jp.log_prob(z));
      return diff::add(reconstruct_all(model, z, x), diff::scale(log_ratio, spec.beta));
    };
    if (spec.stratified) {
      std::vector<Tensor> strata;
      for (std::size_t k = 0; k < k_count; ++k) {
        strata.push_back(term(agg::joint_sample(jp, noise.slots[base + k], k).sample.z));
      }
      repeats.push_back(average(strata));
    } else {
      std::vector<Tensor> slots(noise.slots.begin() + static_cast<std::ptrdiff_t>(base),
                                noise.slots.begin() + static_cast<std::ptrdiff_t>(base + k_count));
      repeats.push_back(term(agg::categorical_sample(jp, slots, selector).z));
    }
  }
  return diff::mean(average(repeats));
}

MmvmRegularizer mmvm_regularizer(const std::vector<DiagGaussian>& posteriors,
                                 const std::vector<gauss::LatentSample>& samples,
                                 bool detach_mixture) {
  if (posteriors.empty() || posteriors.size() != samples.size()) {
    throw ContractError("mmvm_regularizer: " + std::to_string(posteriors.size()) +
                        " posteriors but " + std::to_string(samples.size()) + " samples");
  }
  const std::size_t m_count = posteriors.size();
  std::vector<DiagGaussian> mixture = posteriors;
  if (detach_mixture) {
    for (auto& g : mixture) g = DiagGaussian{g.mean.detach(), g.log_var.detach()};
  }
  const double log_m = std::log(static_cast<double>(m_count));

  MmvmRegularizer out;
  for (std::size_t m = 0; m < m_count; ++m) {
    const Tensor& z = samples[m].z;
    Tensor own = gauss::log_prob_diag(posteriors[m], z);
    std::vector<Tensor> diffs;
    for (std::size_t k = 0; k < m_count; ++k) {
      Tensor other = (k == m && !detach_mixture) ? own : gauss::log_prob_diag(mixture[k], z);
      diffs.push_back(diff::sub(other, own));
    }
    // log q_m - log h_m = ln M - logsumexp_k(log q_k - log q_m); the k == m
    // entry is exactly zero, so the term never exceeds ln M.
    Tensor lse = diff::logsumexp_cols(diff::concat_cols(diffs));
    Tensor term = diff::shift(diff::neg(lse), log_m);
    out.per_modality.push_back(term);
  }
  out.total = sum_terms(out.per_modality);
  return out;
}

Tensor mmvm_objective(const Model& model, const std::vector<Tensor>& x, const NoiseBlock& noise) {
  const auto& spec = model.spec();
  if (spec.kind != ModelKind::mmvm) {
    throw ContractError("mmvm_objective called on a " + spec.method_name() + " model");
  }
  check_inputs(model, x, noise);
  const std::size_t m_count = x.size();
  const auto q = encode_all(model, x);
  std::vector<Tensor> repeats;
  for (std::size_t s = 0; s < spec.samples; ++s) {
    std::vector<gauss::LatentSample> z;
    std::vector<Tensor> recon;
    for (std::size_t m = 0; m < m_count; ++m) {
      z.push_back(gauss::sample_reparam(q[m], noise.slots[s * m_count + m],
                                        "q" + std::to_string(m)));
      recon.push_back(decode_loglik(model, m, z[m].z, x[m]));
    }
    const MmvmRegularizer reg = mmvm_regularizer(q, z, spec.detach_mixture_prior);
    repeats.push_back(diff::sub(sum_terms(recon), diff::scale(reg.total, spec.beta)));
  }
  return diff::mean(average(repeats));
}

Tensor objective(const Model& model, const std::vector<Tensor>& x, const NoiseBlock& noise) {
  switch (model.spec().kind) {
    case ModelKind::independent: return elbo_independent(model, x, noise);
    case ModelKind::aggregated: return elbo_aggregated(model, x, noise);
    case ModelKind::mmvm: return mmvm_objective(model, x, noise);
  }
  throw ContractError("unknown model kind");
}

// ---------------------------------------------------------------------------
// Training

Tensor to_tensor(const Matrix& m) { return Tensor::from(m.rows, m.cols, m.values); }

TrainedModel train_model(const ModelSpec& spec, const std::vector<Matrix>& data,
                         const TrainConfig& config) {
  spec.validate();
  if (data.size() != spec.modality_count()) {
    throw ContractError("training data has " + std::to_string(data.size()) +
                        " modalities, spec declares " + std::to_string(spec.modality_count()));
  }
  const std::size_t n = data.front().rows;
  if (n == 0) throw ContractError("training data is empty");
  for (std::size_t m = 0; m < data.size(); ++m) {
    if (data[m].rows != n) throw ConformanceError("modalities have different row counts");
    if (data[m].cols != spec.modality_dims[m]) {
      throw ConformanceError("modality " + std::to_string(m) + " has dimension " +
                             std::to_string(data[m].cols) + ", spec declares " +
                             std::to_string(spec.modality_dims[m]));
    }
  }
  if (config.batch_size == 0 || !(config.lr > 0.0)) {
    throw ContractError("batch_size and lr must be positive");
  }

  TrainedModel result{Model(spec, derive_seed(config.seed, "init")), {}, 0};
  auto params = result.model.parameters();
  auto adam = diff::AdamState::for_params(params, {.lr = config.lr});
  const std::size_t slots = noise_slots(spec);
  StreamHash stream;

  std::vector<std::size_t> order(n);
  std::uint64_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, "batches", epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double total = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size, ++step) {
      const std::size_t stop = std::min(n, start + config.batch_size);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      std::vector<Tensor> x;
      for (const auto& mat : data) x.push_back(to_tensor(mat.select_rows(idx)));
      NoiseBlock noise = make_noise(slots, idx.size(), spec.latent_dim,
                                    derive_seed(config.seed, "noise", step));
      for (std::size_t i : idx) stream.mix(static_cast<std::uint64_t>(i));
      for (double v : noise.slots.front().data()) stream.mix(v);

      diff::TapeScope scope;
      for (auto& p : params) p.zero_grad();
      const std::string where = spec.method_name() + " at epoch " + std::to_string(epoch) +
                                ", batch " + std::to_string(batches);
      Tensor obj;
      try {
        obj = objective(result.model, x, noise);
      } catch (const DomainError& e) {
        throw NumericError("numeric failure for " + where + ": " + e.what());
      }
      const double value = obj.item();
      if (!std::isfinite(value)) throw NumericError("non-finite objective for " + where);
      diff::backward(diff::neg(obj));
      diff::adam_step(params, adam);
      total += value;
      ++batches;
    }
    result.epoch_objective.push_back(total / static_cast<double>(batches));
  }
  result.stream_hash = stream.value();
  return result;
}

// ---------------------------------------------------------------------------
// Representations and generation

bool has_representation(const ModelSpec& spec, const Representation& which) {
  if (which.kind == Representation::Kind::joint) return spec.kind == ModelKind::aggregated;
  return which.modality < spec.modality_count();
}

Matrix extract_representations(const Model& model, const std::vector<Matrix>& data,
                               const Representation& which) {
  const auto& spec = model.spec();
  if (which.kind == Representation::Kind::joint && spec.kind != ModelKind::aggregated) {
    throw ContractError("joint representation is undefined for " + spec.method_name() +
                        " models");
  }
  if (which.kind == Representation::Kind::modality && which.modality >= data.size()) {
    throw ContractError("unknown modality " + std::to_string(which.modality));
  }
  diff::NoGradGuard guard;
  Tensor mean;
  if (which.kind == Representation::Kind::modality) {
    mean = encode(model, which.modality, to_tensor(data[which.modality])).mean;
  } else {
    std::vector<DiagGaussian> q;
    for (std::size_t m = 0; m < data.size(); ++m) q.push_back(encode(model, m, to_tensor(data[m])));
    mean = agg::aggregate(spec.aggregation, q, {spec.prior_expert}).mean();
  }
  Matrix out(mean.rows(), mean.cols());
  std::copy(mean.data().begin(), mean.data().end(), out.values.begin());
  return out;
}

Matrix conditional_generate(const Model& model, std::size_t source, const Matrix& x_source,
                            std::size_t target, const Matrix& noise) {
  const auto& spec = model.spec();
  if (source >= spec.modality_count() || target >= spec.modality_count()) {
    throw ContractError("conditional_generate: unknown modality");
  }
  if (noise.rows != x_source.rows || noise.cols != spec.latent_dim) {
    throw ConformanceError("conditional_generate: noise must be [rows, latent_dim]");
  }
  diff::NoGradGuard guard;
  DiagGaussian q = encode(model, source, to_tensor(x_source));
  if (spec.kind == ModelKind::aggregated &&
      (spec.aggregation == agg::AggregationKind::poe ||
       spec.aggregation == agg::AggregationKind::mopoe)) {
    // The single-modality subset product these models are trained with.
    q = gauss::poe_fuse({q}, spec.prior_expert);
  }
  Tensor z = gauss::sample_reparam(q, to_tensor(noise)).z;
  return decode_mean(model, target, z);
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_model(const Model& model, const std::filesystem::path& path) {
  json j = model.spec();
  auto params = model.parameters();
  write_checkpoint(path, j.dump(), params);
}

Model load_model(const std::filesystem::path& path) {
  Checkpoint ck = read_checkpoint(path);
  json j;
  try {
    j = json::parse(ck.spec);
  } catch (const json::exception& e) {
    throw ParseError("checkpoint spec is not valid JSON: " + std::string(e.what()));
  }
  if (j.value("model", std::string()) != "vae") {
    throw ParseError("checkpoint " + path.string() + " does not hold a VAE");
  }
  Model model(j.get<ModelSpec>(), 0);
  auto params = model.parameters();
  restore_parameters(ck, params);
  return model;
}

}  // namespace mmvm::vae
