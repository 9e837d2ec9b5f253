#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace mmvm {

using Rng = std::mt19937_64;

/// Child seed for (root, component, index). Adding a new component name never
/// changes the seeds handed to existing ones.
std::uint64_t derive_seed(std::uint64_t root, std::string_view component, std::uint64_t index = 0);

/// Order-sensitive 64-bit hash accumulator (FNV-1a over bytes).
class StreamHash {
 public:
  void mix(const void* bytes, std::size_t n);
  void mix(double v) { mix(&v, sizeof v); }
  void mix(std::uint64_t v) { mix(&v, sizeof v); }
  std::uint64_t value() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

std::vector<double> standard_normal(Rng& rng, std::size_t n);

}  // namespace mmvm
