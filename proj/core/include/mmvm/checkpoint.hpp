#pragma once

// Flat versioned parameter files shared by VAEs and classifiers:
//
//   "MMVM" | u32 version | u32 spec length | spec (UTF-8 JSON) | f64 values...
//
// All integers and floats little-endian. Values are the concatenated
// parameter arrays in declaration order; shapes come from the spec.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mmvm/tensor.hpp"

namespace mmvm {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::string spec;
  std::vector<double> values;
};

void write_checkpoint(const std::filesystem::path& path, const std::string& spec,
                      std::span<const diff::Tensor> params);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies checkpoint values into params; sizes must add up exactly.
void restore_parameters(const Checkpoint& ckpt, std::span<diff::Tensor> params);

namespace binio {
void put_u32(std::string& out, std::uint32_t v);
void put_f64(std::string& out, double v);
std::uint32_t get_u32(const unsigned char* p);
double get_f64(const unsigned char* p);
}  // namespace binio

}  // namespace mmvm
