#include "mmvm/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mmvm/error.hpp"

namespace mmvm {

namespace binio {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& out, double v) {
  const auto bits = std::bit_cast<std::uint64_t>(v);
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

double get_f64(const unsigned char* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

}  // namespace binio

void write_checkpoint(const std::filesystem::path& path, const std::string& spec,
                      std::span<const diff::Tensor> params) {
  std::string buf = "MMVM";
  binio::put_u32(buf, kCheckpointVersion);
  binio::put_u32(buf, static_cast<std::uint32_t>(spec.size()));
  buf += spec;
  for (const auto& p : params) {
    for (double v : p.data()) binio::put_f64(buf, v);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open checkpoint for writing: " + path.string());
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path.string());
  std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
  if (buf.size() < 12 || buf.compare(0, 4, "MMVM") != 0) {
    throw ParseError("bad checkpoint magic in " + path.string());
  }
  Checkpoint ck;
  ck.version = binio::get_u32(p + 4);
  if (ck.version != kCheckpointVersion) {
    throw ParseError("unsupported checkpoint version " + std::to_string(ck.version) + " in " +
                     path.string());
  }
  const std::uint32_t len = binio::get_u32(p + 8);
  if (buf.size() < 12 + static_cast<std::size_t>(len)) {
    throw ParseError("truncated checkpoint spec in " + path.string());
  }
  ck.spec = buf.substr(12, len);
  const std::size_t rest = buf.size() - 12 - len;
  if (rest % 8 != 0) throw ParseError("checkpoint payload not a whole number of doubles");
  ck.values.resize(rest / 8);
  for (std::size_t i = 0; i < ck.values.size(); ++i) {
    ck.values[i] = binio::get_f64(p + 12 + len + 8 * i);
  }
  return ck;
}

void restore_parameters(const Checkpoint& ckpt, std::span<diff::Tensor> params) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.size();
  if (total != ckpt.values.size()) {
    throw ParseError("checkpoint holds " + std::to_string(ckpt.values.size()) +
                     " values but the spec declares " + std::to_string(total));
  }
  std::size_t off = 0;
  for (auto& p : params) {
    auto dst = p.mutable_data();
    std::memcpy(dst.data(), ckpt.values.data() + off, dst.size() * sizeof(double));
    off += dst.size();
  }
}

}  // namespace mmvm
