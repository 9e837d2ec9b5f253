#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mmvm/tensor.hpp"

namespace mmvm::diff {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment estimates for a fixed list of parameters.
struct AdamState {
  std::uint64_t step = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  AdamConfig config;

  static AdamState for_params(std::span<const Tensor> params, AdamConfig config = {});
};

/// One bias-corrected Adam step that descends along each parameter's grad
/// buffer. Parameters are updated in place.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Same update with explicit gradients (one buffer per parameter).
void adam_step(std::span<Tensor> params, std::span<const std::vector<double>> grads,
               AdamState& state);

}  // namespace mmvm::diff
