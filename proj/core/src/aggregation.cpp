#include "mmvm/aggregation.hpp"

#include "mmvm/error.hpp"

namespace mmvm::agg {

using diff::Tensor;
using gauss::DiagGaussian;
using gauss::GaussianMixture;

AggregationKind parse_aggregation_kind(std::string_view text) {
  if (text == "avg") return AggregationKind::avg;
  if (text == "poe") return AggregationKind::poe;
  if (text == "moe") return AggregationKind::moe;
  if (text == "mopoe") return AggregationKind::mopoe;
  throw ParseError("unknown aggregation kind '" + std::string(text) +
                   "' (expected avg, poe, moe or mopoe)");
}

std::string to_string(AggregationKind kind) {
  switch (kind) {
    case AggregationKind::avg: return "avg";
    case AggregationKind::poe: return "poe";
    case AggregationKind::moe: return "moe";
    case AggregationKind::mopoe: return "mopoe";
  }
  return "?";
}

std::vector<Subset> enumerate_subsets(std::size_t modality_count) {
  if (modality_count == 0) throw ContractError("enumerate_subsets: need at least one modality");
  if (modality_count >= 8 * sizeof(std::size_t) - 1) {
    throw ContractError("enumerate_subsets: too many modalities");
  }
  std::vector<Subset> out;
  const std::size_t total = (std::size_t{1} << modality_count) - 1;
  out.reserve(total);
  for (std::size_t mask = 1; mask <= total; ++mask) {
    Subset s;
    for (std::size_t i = 0; i < modality_count; ++i) {
      if (mask & (std::size_t{1} << i)) s.push_back(i);
    }
    out.push_back(std::move(s));
  }
  return out;
}

JointPosterior::JointPosterior(Form form, AggregationKind kind, std::vector<Subset> subsets)
    : form_(std::move(form)), kind_(kind), subsets_(std::move(subsets)) {
  if (subsets_.size() != component_count()) {
    throw ContractError("joint posterior provenance does not match its component count");
  }
}

std::size_t JointPosterior::component_count() const {
  if (auto* m = std::get_if<GaussianMixture>(&form_)) return m->components.size();
  return 1;
}

const DiagGaussian& JointPosterior::component(std::size_t k) const {
  if (k >= component_count()) {
    throw ContractError("component index " + std::to_string(k) + " out of range (" +
                        std::to_string(component_count()) + " components)");
  }
  if (auto* m = std::get_if<GaussianMixture>(&form_)) return m->components[k];
  return std::get<DiagGaussian>(form_);
}

Tensor JointPosterior::log_prob(const Tensor& z) const {
  if (auto* m = std::get_if<GaussianMixture>(&form_)) return gauss::mixture_log_prob(*m, z);
  return gauss::log_prob_diag(std::get<DiagGaussian>(form_), z);
}

Tensor JointPosterior::mean() const {
  if (auto* m = std::get_if<GaussianMixture>(&form_)) {
    Tensor acc = diff::scale(m->components[0].mean, m->weights[0]);
    for (std::size_t k = 1; k < m->components.size(); ++k) {
      acc = diff::add(acc, diff::scale(m->components[k].mean, m->weights[k]));
    }
    return acc;
  }
  return std::get<DiagGaussian>(form_).mean;
}

JointPosterior aggregate(AggregationKind kind, const std::vector<DiagGaussian>& posteriors,
                         AggregateOptions options) {
  if (posteriors.empty()) throw ContractError("aggregate: empty posterior list");
  for (const auto& p : posteriors) {
    if (p.mean.shape() != posteriors.front().mean.shape()) {
      throw ConformanceError("aggregate: posteriors do not share a shape");
    }
  }
  const std::size_t m = posteriors.size();
  const bool mixture = kind == AggregationKind::moe || kind == AggregationKind::mopoe;
  if (m == 1) {
    if (mixture) return {GaussianMixture::uniform({posteriors[0]}), kind, {{0}}};
    return {posteriors[0], kind, {{0}}};
  }

  Subset all;
  for (std::size_t i = 0; i < m; ++i) all.push_back(i);

  switch (kind) {
    case AggregationKind::avg:
      return {gauss::moment_average(posteriors), kind, {all}};
    case AggregationKind::poe:
      return {gauss::poe_fuse(posteriors, options.prior_expert), kind, {all}};
    case AggregationKind::moe: {
      std::vector<Subset> subsets;
      for (std::size_t i = 0; i < m; ++i) subsets.push_back({i});
      return {GaussianMixture::uniform(posteriors), kind, std::move(subsets)};
    }
    case AggregationKind::mopoe: {
      auto subsets = enumerate_subsets(m);
      std::vector<DiagGaussian> comps;
      comps.reserve(subsets.size());
      for (const auto& s : subsets) {
        std::vector<DiagGaussian> experts;
        for (std::size_t i : s) experts.push_back(posteriors[i]);
        comps.push_back(gauss::poe_fuse(experts, options.prior_expert));
      }
      return {GaussianMixture::uniform(std::move(comps)), kind, std::move(subsets)};
    }
  }
  throw ContractError("aggregate: unhandled kind");
}

JointSample joint_sample(const JointPosterior& jp, const Tensor& noise, std::size_t component) {
  const DiagGaussian& c = jp.component(component);
  return {gauss::sample_reparam(c, noise, to_string(jp.kind()) + "[" + std::to_string(component) + "]"),
          component};
}

std::vector<JointSample> stratified_samples(const JointPosterior& jp,
                                            const std::vector<Tensor>& noise) {
  const std::size_t k = jp.component_count();
  if (noise.size() < k) {
    throw ContractError("stratified_samples: " + std::to_string(k) +
                        " components need as many noise draws, got " +
                        std::to_string(noise.size()));
  }
  std::vector<JointSample> out;
  out.reserve(k);
  for (std::size_t i = 0; i < k; ++i) out.push_back(joint_sample(jp, noise[i], i));
  return out;
}

CategoricalSample categorical_sample(const JointPosterior& jp, const std::vector<Tensor>& noise,
                                     Rng& rng) {
  const std::size_t k = jp.component_count();
  if (noise.size() < k) throw ContractError("categorical_sample: not enough noise draws");
  const std::size_t b = jp.batch(), d = jp.dim();
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  CategoricalSample out;
  out.components.resize(b);
  for (auto& c : out.components) c = pick(rng);

  Tensor z;
  for (std::size_t i = 0; i < k; ++i) {
    std::vector<double> mask(b * d, 0.0);
    bool any = false;
    for (std::size_t r = 0; r < b; ++r) {
      if (out.components[r] != i) continue;
      any = true;
      for (std::size_t j = 0; j < d; ++j) mask[r * d + j] = 1.0;
    }
    if (!any) continue;
    Tensor part = diff::mul(joint_sample(jp, noise[i], i).sample.z,
                            Tensor::from(b, d, std::move(mask)));
    z = z.defined() ? diff::add(z, part) : part;
  }
  out.z = z;
  return out;
}

}  // namespace mmvm::agg
