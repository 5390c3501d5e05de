#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "seqlcd/common.hpp"
#include "seqlcd/imaging.hpp"

namespace seqlcd {

using Descriptor = std::vector<float>;

enum class DescriptorKind { Sad, Latent };

inline const char* to_string(DescriptorKind k) { return k == DescriptorKind::Sad ? "sad" : "latent"; }

/// Immutable N x d matrix of per-frame descriptors, stored row-major.
class DescriptorSet {
 public:
  DescriptorSet() = default;
  DescriptorSet(std::size_t count, std::size_t dim, std::vector<float> values, DescriptorKind kind)
      : count_(count), dim_(dim), values_(std::move(values)), kind_(kind) {
    if (count_ == 0 || dim_ == 0) throw Error("descriptor set: count and dim must be positive");
    if (values_.size() != count_ * dim_) throw Error("descriptor set: value count does not match count x dim");
    for (float v : values_)
      if (!std::isfinite(v)) throw Error("descriptor set: non-finite value");
  }

  static DescriptorSet from_rows(const std::vector<Descriptor>& rows, DescriptorKind kind) {
    if (rows.empty()) throw Error("descriptor set: no rows");
    std::vector<float> flat;
    flat.reserve(rows.size() * rows.front().size());
    for (const auto& r : rows) {
      if (r.size() != rows.front().size()) throw Error("descriptor set: rows differ in dimension");
      flat.insert(flat.end(), r.begin(), r.end());
    }
    return DescriptorSet(rows.size(), rows.front().size(), std::move(flat), kind);
  }

  std::size_t count() const { return count_; }
  std::size_t dim() const { return dim_; }
  DescriptorKind kind() const { return kind_; }
  const std::vector<float>& values() const { return values_; }
  std::span<const float> row(std::size_t i) const { return {values_.data() + i * dim_, dim_}; }

  bool operator==(const DescriptorSet&) const = default;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<float> values_;
  DescriptorKind kind_ = DescriptorKind::Sad;
};

struct SadConfig {
  std::size_t out_w = 64;
  std::size_t out_h = 32;
  std::size_t patch = 8;
  double epsilon = 1e-6;

  void validate() const {
    if (out_w == 0 || out_h == 0 || patch == 0) throw Error("sad config: out_w, out_h and patch must be positive");
    if (!(epsilon > 0)) throw Error("sad config: epsilon must be positive");
  }
};

/// Grayscale, downsample, patch-normalize, then flatten row-major.
inline Descriptor sad_descriptor(const ImageBuffer& img, const SadConfig& cfg = {}) {
  cfg.validate();
  RealImage norm = patch_normalize(downsample(to_grayscale(img), cfg.out_w, cfg.out_h), cfg.patch, cfg.epsilon);
  return Descriptor(norm.values.begin(), norm.values.end());
}

namespace detail {

inline void check_dims(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size())
    throw Error("descriptor dimension mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
}

// Eight interleaved partial sums in a fixed order: vectorizable, and the
// result does not depend on how callers are scheduled.
template <typename Term>
double lane_sum(std::span<const float> a, std::span<const float> b, Term term) {
  constexpr std::size_t kLanes = 8;
  double acc[kLanes] = {};
  const std::size_t n = a.size();
  const std::size_t body = n - n % kLanes;
  for (std::size_t i = 0; i < body; i += kLanes)
    for (std::size_t l = 0; l < kLanes; ++l) acc[l] += term(static_cast<double>(a[i + l]) - b[i + l]);
  for (std::size_t i = body; i < n; ++i) acc[i - body] += term(static_cast<double>(a[i]) - b[i]);
  return ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
}

}  // namespace detail

/// Sum of absolute differences.
inline double sad_distance(std::span<const float> a, std::span<const float> b) {
  detail::check_dims(a, b);
  return detail::lane_sum(a, b, [](double d) { return std::abs(d); });
}

/// Squared Euclidean distance. Ranking-equivalent to the Euclidean norm,
/// so the square root is never taken.
inline double euclidean_sq_distance(std::span<const float> a, std::span<const float> b) {
  detail::check_dims(a, b);
  return detail::lane_sum(a, b, [](double d) { return d * d; });
}

// Latent interchange file, little-endian:
//   "CMALLAT1" | u32 version | u32 count | u32 dim | count*dim float32
inline constexpr char kLatentMagic[8] = {'C', 'M', 'A', 'L', 'L', 'A', 'T', '1'};
inline constexpr std::uint32_t kLatentVersion = 1;
inline constexpr std::size_t kLatentHeaderBytes = 20;

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint32_t get_u32(const std::string& in, std::size_t pos) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<std::uint8_t>(in[pos + i])) << (8 * i);
  return v;
}

}  // namespace detail

inline std::string encode_latents(const DescriptorSet& set) {
  if (set.count() > UINT32_MAX || set.dim() > UINT32_MAX) throw Error("latents: set too large for format");
  std::string out(kLatentMagic, sizeof(kLatentMagic));
  detail::put_u32(out, kLatentVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(set.count()));
  detail::put_u32(out, static_cast<std::uint32_t>(set.dim()));
  out.reserve(kLatentHeaderBytes + set.values().size() * 4);
  for (float f : set.values()) detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  return out;
}

inline DescriptorSet decode_latents(const std::string& bytes, DescriptorKind kind = DescriptorKind::Latent) {
  if (bytes.size() < kLatentHeaderBytes) throw Error("latents: truncated header");
  if (std::memcmp(bytes.data(), kLatentMagic, sizeof(kLatentMagic)) != 0) throw Error("latents: bad magic");
  const std::uint32_t version = detail::get_u32(bytes, 8);
  if (version != kLatentVersion) throw Error("latents: unsupported version " + std::to_string(version));
  const std::uint64_t count = detail::get_u32(bytes, 12);
  const std::uint64_t dim = detail::get_u32(bytes, 16);
  if (count == 0 || dim == 0) throw Error("latents: count and dim must be positive");
  const std::uint64_t payload = count * dim * 4;
  if (bytes.size() - kLatentHeaderBytes < payload) throw Error("latents: truncated payload");
  if (bytes.size() - kLatentHeaderBytes > payload) throw Error("latents: trailing bytes after payload");
  std::vector<float> values(count * dim);
  for (std::size_t i = 0; i < values.size(); ++i)
    values[i] = std::bit_cast<float>(detail::get_u32(bytes, kLatentHeaderBytes + 4 * i));
  return DescriptorSet(count, dim, std::move(values), kind);
}

inline void write_latents(const DescriptorSet& set, const std::string& path) { write_file(path, encode_latents(set)); }

inline DescriptorSet read_latents(const std::string& path, DescriptorKind kind = DescriptorKind::Latent) {
  try {
    return decode_latents(read_file(path), kind);
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

}  // namespace seqlcd
