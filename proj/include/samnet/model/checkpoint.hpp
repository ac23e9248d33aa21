#pragma once

// Checkpoint layout (all integers and floats little-endian):
//
//   offset  size  field
//   0       4     magic "SAMN"
//   4       4     u32 version (= 1)
//   8       8     u64 d1   feature_dim
//   16      8     u64 d2   embed_dim
//   24      8     u64 K    memory_slots
//   32      8     u64 C    categories
//   40      8     u64 N    branches
//   48      ...   f64 parameter blocks
//
// Blocks are written branch by branch; within a branch in the order
// embed_weight (d2 x d1, row-major), embed_bias (d2), memory (d2 x K,
// row-major), classifier (C x d2, row-major). Nothing follows the last block.

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "samnet/core/errors.hpp"
#include "samnet/model/model.hpp"

namespace samnet {

inline constexpr std::array<char, 4> kCheckpointMagic{'S', 'A', 'M', 'N'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 48;

namespace detail {

template <typename U>
void put_le(std::vector<unsigned char>& out, U value) {
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    out.push_back(static_cast<unsigned char>((value >> (8 * i)) & 0xFF));
  }
}

template <typename U>
U get_le(const unsigned char* p) {
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(p[i]) << (8 * i);
  return v;
}

}  // namespace detail

inline std::vector<unsigned char> encode_checkpoint(const ModelParams& params) {
  validate(params);
  std::vector<unsigned char> out;
  out.reserve(kCheckpointHeaderBytes + 8 * parameter_count(params));
  out.insert(out.end(), kCheckpointMagic.begin(), kCheckpointMagic.end());
  detail::put_le<std::uint32_t>(out, kCheckpointVersion);
  const Dims& d = params.dims;
  for (std::size_t v : {d.feature_dim, d.embed_dim, d.memory_slots, d.categories, d.branches}) {
    detail::put_le<std::uint64_t>(out, static_cast<std::uint64_t>(v));
  }
  for_each_block(params, [&](std::size_t, BlockKind, std::span<const double> s) {
    for (double x : s) detail::put_le<std::uint64_t>(out, std::bit_cast<std::uint64_t>(x));
  });
  return out;
}

/// Reads only the header; throws FormatError / VersionError.
inline Dims decode_checkpoint_dims(std::span<const unsigned char> bytes) {
  if (bytes.size() < kCheckpointHeaderBytes) throw FormatError("checkpoint truncated: header incomplete");
  if (std::memcmp(bytes.data(), kCheckpointMagic.data(), kCheckpointMagic.size()) != 0) {
    throw FormatError("not a checkpoint: bad magic");
  }
  const auto version = detail::get_le<std::uint32_t>(bytes.data() + 4);
  if (version != kCheckpointVersion) {
    throw VersionError("checkpoint version " + std::to_string(version) + " unsupported (expected " +
                       std::to_string(kCheckpointVersion) + ")");
  }
  Dims d;
  const unsigned char* p = bytes.data() + 8;
  d.feature_dim = detail::get_le<std::uint64_t>(p);
  d.embed_dim = detail::get_le<std::uint64_t>(p + 8);
  d.memory_slots = detail::get_le<std::uint64_t>(p + 16);
  d.categories = detail::get_le<std::uint64_t>(p + 24);
  d.branches = detail::get_le<std::uint64_t>(p + 32);
  try {
    d.validate();
  } catch (const InvalidArgument& e) {
    throw SchemaError(std::string("checkpoint header: ") + e.what());
  }
  return d;
}

/// Decodes a checkpoint. When `expected` is given, the header dims must match.
inline ModelParams decode_checkpoint(std::span<const unsigned char> bytes,
                                     const std::optional<Dims>& expected = std::nullopt) {
  const Dims d = decode_checkpoint_dims(bytes);
  if (expected && *expected != d) {
    throw SchemaError("checkpoint dims " + d.to_string() + " do not match expected " +
                      expected->to_string());
  }
  const std::size_t per_branch = d.embed_dim * d.feature_dim + d.embed_dim +
                                 d.embed_dim * d.memory_slots + d.categories * d.embed_dim;
  const std::size_t want = kCheckpointHeaderBytes + 8 * per_branch * d.branches;
  if (bytes.size() != want) {
    throw SchemaError("checkpoint size " + std::to_string(bytes.size()) + " bytes does not match header dims " +
                      d.to_string() + " (expected " + std::to_string(want) + ")");
  }
  ModelParams p = zeros_like(d);
  const unsigned char* cursor = bytes.data() + kCheckpointHeaderBytes;
  for_each_block(p, [&](std::size_t, BlockKind, std::span<double> s) {
    for (double& x : s) {
      x = std::bit_cast<double>(detail::get_le<std::uint64_t>(cursor));
      cursor += 8;
    }
  });
  return p;
}

inline void save_checkpoint(const ModelParams& params, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: '" + path.string() + "'");
}

inline ModelParams load_checkpoint(const std::filesystem::path& path,
                                   const std::optional<Dims>& expected = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes, expected);
}

}  // namespace samnet
