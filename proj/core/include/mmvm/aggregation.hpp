#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mmvm/gaussians.hpp"
#include "mmvm/rng.hpp"

namespace mmvm::agg {

enum class AggregationKind { avg, poe, moe, mopoe };

/// Accepts exactly "avg", "poe", "moe" or "mopoe".
AggregationKind parse_aggregation_kind(std::string_view text);
std::string to_string(AggregationKind kind);

using Subset = std::vector<std::size_t>;

/// All 2^M - 1 non-empty subsets of {0..M-1}, ordered by binary counting
/// (bit i of the counter selects modality i).
std::vector<Subset> enumerate_subsets(std::size_t modality_count);

struct AggregateOptions {
  /// Include a standard-normal expert in every product (PoE and MoPoE).
  bool prior_expert = true;
};

class JointPosterior {
 public:
  using Form = std::variant<gauss::DiagGaussian, gauss::GaussianMixture>;

  JointPosterior(Form form, AggregationKind kind, std::vector<Subset> subsets);

  bool is_mixture() const { return std::holds_alternative<gauss::GaussianMixture>(form_); }
  std::size_t component_count() const;
  const gauss::DiagGaussian& component(std::size_t k) const;
  const Form& form() const { return form_; }
  AggregationKind kind() const { return kind_; }
  /// Modality subsets that produced each component, in component order.
  const std::vector<Subset>& subsets() const { return subsets_; }
  std::size_t dim() const { return component(0).dim(); }
  std::size_t batch() const { return component(0).batch(); }

  diff::Tensor log_prob(const diff::Tensor& z) const;
  /// Mean of the distribution; for mixtures the weighted mean of component means.
  diff::Tensor mean() const;

 private:
  Form form_;
  AggregationKind kind_;
  std::vector<Subset> subsets_;
};

/// Builds q(z|X) from per-modality posteriors. A single posterior is returned
/// unchanged for every kind (as a one-component mixture for MoE/MoPoE).
JointPosterior aggregate(AggregationKind kind, const std::vector<gauss::DiagGaussian>& posteriors,
                         AggregateOptions options = {});

struct JointSample {
  gauss::LatentSample sample;
  std::size_t component = 0;
};

/// Reparameterised sample from component `component` (0 for single Gaussians).
JointSample joint_sample(const JointPosterior& jp, const diff::Tensor& noise,
                         std::size_t component);

/// One sample per component, noise[k] feeding component k.
std::vector<JointSample> stratified_samples(const JointPosterior& jp,
                                            const std::vector<diff::Tensor>& noise);

struct CategoricalSample {
  diff::Tensor z;
  std::vector<std::size_t> components;  // chosen component per batch row
};

/// Draws a component per batch row uniformly, then samples it. noise[k] is the
/// noise used for rows that picked component k.
CategoricalSample categorical_sample(const JointPosterior& jp,
                                     const std::vector<diff::Tensor>& noise, Rng& rng);

}  // namespace mmvm::agg
