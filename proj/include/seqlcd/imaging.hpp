#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "seqlcd/common.hpp"

namespace seqlcd {

/// 8-bit image, row-major, channels interleaved.
struct ImageBuffer {
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 1;
  std::vector<std::uint8_t> data;

  ImageBuffer() = default;
  ImageBuffer(std::size_t w, std::size_t h, std::size_t c, std::uint8_t fill = 0)
      : width(w), height(h), channels(c), data(w * h * c, fill) {}

  std::uint8_t& at(std::size_t x, std::size_t y, std::size_t c = 0) { return data[(y * width + x) * channels + c]; }
  std::uint8_t at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return data[(y * width + x) * channels + c];
  }

  bool operator==(const ImageBuffer&) const = default;
};

/// Real-valued single-channel image.
struct RealImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<double> values;

  double at(std::size_t x, std::size_t y) const { return values[y * width + x]; }
};

inline void check_image(const ImageBuffer& img) {
  if (img.channels != 1 && img.channels != 3) throw Error("image: channels must be 1 or 3");
  if (img.width == 0 || img.height == 0) throw Error("image: zero dimension");
  if (img.data.size() != img.width * img.height * img.channels) throw Error("image: data length mismatch");
}

namespace detail {

inline bool pnm_space(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

// Reads one unsigned header field, skipping whitespace and '#' comments.
inline std::size_t pnm_field(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  for (;;) {
    while (pos < bytes.size() && pnm_space(static_cast<char>(bytes[pos]))) ++pos;
    if (pos < bytes.size() && bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      continue;
    }
    break;
  }
  if (pos >= bytes.size() || bytes[pos] < '0' || bytes[pos] > '9') throw Error("pnm: malformed header");
  std::size_t v = 0;
  while (pos < bytes.size() && bytes[pos] >= '0' && bytes[pos] <= '9') {
    v = v * 10 + (bytes[pos] - '0');
    if (v > (1u << 30)) throw Error("pnm: header value too large");
    ++pos;
  }
  return v;
}

}  // namespace detail

/// Decodes a binary PGM (P5) or PPM (P6) with maxval 255.
inline ImageBuffer decode_image_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw Error("pnm: unsupported magic (expected P5 or P6)");
  const std::size_t channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  const std::size_t w = detail::pnm_field(bytes, pos);
  const std::size_t h = detail::pnm_field(bytes, pos);
  const std::size_t maxval = detail::pnm_field(bytes, pos);
  if (maxval != 255) throw Error("pnm: maxval must be 255, got " + std::to_string(maxval));
  if (w == 0 || h == 0) throw Error("pnm: zero dimension");
  if (pos >= bytes.size() || !detail::pnm_space(static_cast<char>(bytes[pos]))) throw Error("pnm: truncated header");
  ++pos;
  const std::size_t need = w * h * channels;
  if (bytes.size() - pos < need) throw Error("pnm: truncated payload");
  ImageBuffer img(w, h, channels);
  std::copy(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
            bytes.begin() + static_cast<std::ptrdiff_t>(pos + need), img.data.begin());
  return img;
}

inline ImageBuffer decode_image(const std::string& path) {
  std::string raw = read_file(path);
  try {
    return decode_image_bytes({reinterpret_cast<const std::uint8_t*>(raw.data()), raw.size()});
  } catch (const Error& e) {
    throw Error(path + ": " + e.what());
  }
}

inline std::string encode_image_bytes(const ImageBuffer& img) {
  check_image(img);
  std::string out = (img.channels == 1 ? "P5\n" : "P6\n") + std::to_string(img.width) + " " +
                    std::to_string(img.height) + "\n255\n";
  out.append(reinterpret_cast<const char*>(img.data.data()), img.data.size());
  return out;
}

inline void encode_image(const ImageBuffer& img, const std::string& path) { write_file(path, encode_image_bytes(img)); }

/// Rec.601 luma, rounded half-up.
inline ImageBuffer to_grayscale(const ImageBuffer& img) {
  check_image(img);
  if (img.channels == 1) return img;
  ImageBuffer out(img.width, img.height, 1);
  for (std::size_t i = 0; i < img.width * img.height; ++i) {
    const double luma = 0.299 * img.data[3 * i] + 0.587 * img.data[3 * i + 1] + 0.114 * img.data[3 * i + 2];
    out.data[i] = static_cast<std::uint8_t>(std::clamp(round_half_up(luma), 0.0, 255.0));
  }
  return out;
}

/// Area-weighted box downsampling.
///
/// Each output pixel averages the exact source rectangle it covers,
/// including fractional edge pixels. Arithmetic is integral, so results are
/// exact before the final half-up rounding.
inline ImageBuffer downsample(const ImageBuffer& img, std::size_t out_w, std::size_t out_h) {
  check_image(img);
  if (out_w == 0 || out_h == 0) throw Error("downsample: zero output dimension");
  if (out_w > img.width || out_h > img.height) throw Error("downsample: output larger than input");
  if (out_w == img.width && out_h == img.height) return img;

  // In scaled units a source pixel spans out_* units and an output pixel
  // spans the source extent.
  struct Tap {
    std::size_t src;
    std::uint64_t weight;
  };
  auto taps = [](std::size_t src_n, std::size_t dst_n) {
    std::vector<std::vector<Tap>> all(dst_n);
    for (std::size_t o = 0; o < dst_n; ++o) {
      const std::uint64_t lo = o * src_n, hi = (o + 1) * src_n;
      for (std::size_t s = lo / dst_n; s < src_n && s * dst_n < hi; ++s) {
        const std::uint64_t a = std::max<std::uint64_t>(lo, s * dst_n);
        const std::uint64_t b = std::min<std::uint64_t>(hi, (s + 1) * dst_n);
        if (b > a) all[o].push_back({s, b - a});
      }
    }
    return all;
  };
  const auto xt = taps(img.width, out_w);
  const auto yt = taps(img.height, out_h);
  const std::uint64_t area = static_cast<std::uint64_t>(img.width) * img.height;
  ImageBuffer out(out_w, out_h, img.channels);
  for (std::size_t oy = 0; oy < out_h; ++oy)
    for (std::size_t ox = 0; ox < out_w; ++ox)
      for (std::size_t c = 0; c < img.channels; ++c) {
        std::uint64_t sum = 0;
        for (const Tap& ty : yt[oy])
          for (const Tap& tx : xt[ox]) sum += ty.weight * tx.weight * img.at(tx.src, ty.src, c);
        out.at(ox, oy, c) = static_cast<std::uint8_t>((2 * sum + area) / (2 * area));
      }
  return out;
}

/// Zero-mean, unit-deviation normalization over non-overlapping square
/// patches. Deviation is the population value, floored at epsilon.
/// Dimensions not divisible by the patch size are padded by edge
/// replication for the statistics and cropped afterwards.
inline RealImage patch_normalize(const ImageBuffer& img, std::size_t patch, double epsilon = 1e-6) {
  check_image(img);
  if (patch == 0) throw Error("patch_normalize: patch size must be positive");
  if (img.channels != 1) throw Error("patch_normalize: expects a single-channel image");
  const std::size_t pw = (img.width + patch - 1) / patch * patch;
  const std::size_t ph = (img.height + patch - 1) / patch * patch;
  auto sample = [&](std::size_t x, std::size_t y) -> double {
    return img.at(std::min(x, img.width - 1), std::min(y, img.height - 1));
  };
  RealImage out{img.width, img.height, std::vector<double>(img.width * img.height)};
  const double n = static_cast<double>(patch * patch);
  for (std::size_t by = 0; by < ph; by += patch)
    for (std::size_t bx = 0; bx < pw; bx += patch) {
      double sum = 0.0;
      for (std::size_t y = by; y < by + patch; ++y)
        for (std::size_t x = bx; x < bx + patch; ++x) sum += sample(x, y);
      const double mean = sum / n;
      double ss = 0.0;
      for (std::size_t y = by; y < by + patch; ++y)
        for (std::size_t x = bx; x < bx + patch; ++x) ss += (sample(x, y) - mean) * (sample(x, y) - mean);
      const double sigma = std::max(std::sqrt(ss / n), epsilon);
      for (std::size_t y = by; y < std::min(by + patch, img.height); ++y)
        for (std::size_t x = bx; x < std::min(bx + patch, img.width); ++x)
          out.values[y * img.width + x] = (sample(x, y) - mean) / sigma;
    }
  return out;
}

}  // namespace seqlcd
