#include "mmvm/mlp.hpp"

#include <cmath>
#include <random>
#include <string>

#include "mmvm/error.hpp"

namespace mmvm::nn {

using diff::Tensor;

Tensor Linear::forward(const Tensor& x) const {
  if (x.cols() != weight.rows()) {
    throw ConformanceError("linear layer expects " + std::to_string(weight.rows()) +
                           " inputs, got " + std::to_string(x.cols()));
  }
  Tensor y = diff::matmul(x, weight);
  return diff::add(y, diff::broadcast_to(bias, y.rows(), y.cols()));
}

Mlp::Mlp(const std::vector<std::size_t>& sizes, Rng& rng, bool zero_last) : sizes_(sizes) {
  if (sizes.size() < 2) throw ContractError("an MLP needs at least input and output sizes");
  for (std::size_t s : sizes) {
    if (s == 0) throw ContractError("MLP layer sizes must be positive");
  }
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    const bool last = l + 2 == sizes.size();
    std::vector<double> w(in * out, 0.0);
    if (!(last && zero_last)) {
      const double bound = std::sqrt(6.0 / static_cast<double>(in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (auto& v : w) v = dist(rng);
      if (last) {
        for (auto& v : w) v *= 0.1;
      }
    }
    layers_.push_back({Tensor::from(in, out, std::move(w), true), Tensor::zeros(1, out, true)});
  }
}

Tensor Mlp::features(const Tensor& x) const {
  Tensor h = x;
  for (std::size_t l = 0; l + 1 < layers_.size(); ++l) h = diff::relu(layers_[l].forward(h));
  return h;
}

Tensor Mlp::forward(const Tensor& x) const { return layers_.back().forward(features(x)); }

std::vector<Tensor> Mlp::parameters() const {
  std::vector<Tensor> out;
  for (const auto& l : layers_) {
    out.push_back(l.weight);
    out.push_back(l.bias);
  }
  return out;
}

}  // namespace mmvm::nn
