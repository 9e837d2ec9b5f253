#pragma once

#include <cstddef>
#include <vector>

#include "mmvm/rng.hpp"
#include "mmvm/tensor.hpp"

namespace mmvm::nn {

struct Linear {
  diff::Tensor weight;  // [in, out]
  diff::Tensor bias;    // [1, out]

  diff::Tensor forward(const diff::Tensor& x) const;
};

/// Fully connected network with relu between layers and a linear output.
class Mlp {
 public:
  Mlp() = default;
  /// sizes = {input, hidden..., output}. He-uniform initialisation drawn from
  /// rng; zero_last zeroes the final layer's weights and bias.
  Mlp(const std::vector<std::size_t>& sizes, Rng& rng, bool zero_last = false);

  diff::Tensor forward(const diff::Tensor& x) const;
  /// Output of the last hidden activation (everything but the final layer).
  diff::Tensor features(const diff::Tensor& x) const;

  std::size_t input_dim() const { return sizes_.front(); }
  std::size_t output_dim() const { return sizes_.back(); }
  const std::vector<std::size_t>& sizes() const { return sizes_; }

  std::vector<diff::Tensor> parameters() const;
  std::vector<Linear>& layers() { return layers_; }
  const std::vector<Linear>& layers() const { return layers_; }

 private:
  std::vector<std::size_t> sizes_;
  std::vector<Linear> layers_;
};

}  // namespace mmvm::nn
