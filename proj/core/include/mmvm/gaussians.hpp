#pragma once

// Diagonal-Gaussian algebra over batches.
//
// A DiagGaussian holds one distribution per batch row: mean and log_var are
// [batch, d] tensors. Densities and divergences come back as [batch, 1]
// columns so callers decide how to reduce over the batch.

#include <cstddef>
#include <string>
#include <vector>

#include "mmvm/tensor.hpp"

namespace mmvm::gauss {

inline constexpr double kLogVarMin = -20.0;
inline constexpr double kLogVarMax = 20.0;

struct DiagGaussian {
  diff::Tensor mean;
  diff::Tensor log_var;

  /// Validates shapes and finiteness and clamps log_var into [-20, 20].
  static DiagGaussian make(diff::Tensor mean, diff::Tensor log_var);
  /// Single-row Gaussian from plain vectors.
  static DiagGaussian from_values(std::vector<double> mean, std::vector<double> log_var);
  static DiagGaussian standard(std::size_t batch, std::size_t dim);

  std::size_t batch() const { return mean.rows(); }
  std::size_t dim() const { return mean.cols(); }
};

struct GaussianMixture {
  std::vector<DiagGaussian> components;
  std::vector<double> weights;

  static GaussianMixture uniform(std::vector<DiagGaussian> components);
  /// Checks non-emptiness, shared shapes and a normalised weight vector.
  void validate() const;
  std::size_t dim() const { return components.front().dim(); }
};

struct LatentSample {
  diff::Tensor z;
  std::string source;
};

/// z = mean + exp(0.5 log_var) * noise.
LatentSample sample_reparam(const DiagGaussian& g, const diff::Tensor& noise,
                            std::string source = "q");

/// Per-row log N(z; mean, diag(exp(log_var))).
diff::Tensor log_prob_diag(const DiagGaussian& g, const diff::Tensor& z);

/// Per-row KL(q || p) in closed form.
diff::Tensor kl_diag(const DiagGaussian& q, const DiagGaussian& p);

/// Precision-weighted product of experts, optionally with a standard-normal
/// prior expert contributing unit precision and zero mean.
DiagGaussian poe_fuse(const std::vector<DiagGaussian>& experts, bool include_standard_prior = true);

/// Arithmetic mean of means and of variances.
DiagGaussian moment_average(const std::vector<DiagGaussian>& experts);

/// Per-row log sum_k w_k N(z; comp_k), via log-sum-exp.
diff::Tensor mixture_log_prob(const GaussianMixture& m, const diff::Tensor& z);

}  // namespace mmvm::gauss
