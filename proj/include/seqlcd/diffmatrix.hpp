#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "seqlcd/common.hpp"
#include "seqlcd/descriptor.hpp"

namespace seqlcd {

enum class Metric { Sad, EuclideanSq };

inline const char* to_string(Metric m) { return m == Metric::Sad ? "sad" : "euclid_sq"; }

/// Natural metric for a descriptor family.
inline Metric default_metric(DescriptorKind k) { return k == DescriptorKind::Sad ? Metric::Sad : Metric::EuclideanSq; }

/// Reference x test dissimilarities. Row i is reference frame i, column j
/// is test frame j.
struct DifferenceMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  bool enhanced = false;

  DifferenceMatrix() = default;
  DifferenceMatrix(std::size_t r, std::size_t c, bool enh = false) : rows(r), cols(c), values(r * c, 0.0), enhanced(enh) {}

  double& at(std::size_t i, std::size_t j) { return values[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return values[i * cols + j]; }

  bool operator==(const DifferenceMatrix&) const = default;
};

struct EnhanceConfig {
  int window_radius = 10;
  double epsilon = 1e-6;

  void validate() const {
    if (window_radius < 1) throw Error("enhance config: window_radius must be >= 1");
    if (!(epsilon > 0)) throw Error("enhance config: epsilon must be positive");
  }
};

inline double distance(Metric m, std::span<const float> a, std::span<const float> b) {
  return m == Metric::Sad ? sad_distance(a, b) : euclidean_sq_distance(a, b);
}

inline DifferenceMatrix compute_difference_matrix(const DescriptorSet& ref, const DescriptorSet& test, Metric metric,
                                                  unsigned threads = 1) {
  if (ref.count() == 0 || test.count() == 0) throw Error("difference matrix: empty descriptor set");
  if (ref.dim() != test.dim())
    throw Error("difference matrix: dimension mismatch " + std::to_string(ref.dim()) + " vs " +
                std::to_string(test.dim()));
  DifferenceMatrix d(ref.count(), test.count());
  parallel_for(test.count(), threads, [&](std::size_t j) {
    const auto tj = test.row(j);
    for (std::size_t i = 0; i < ref.count(); ++i) d.at(i, j) = distance(metric, ref.row(i), tj);
  });
  return d;
}

/// Local contrast enhancement: z-scores every entry against a window of
/// reference rows [i - R, i + R] (truncated at the borders) in its own test
/// column.
inline DifferenceMatrix enhance_local(const DifferenceMatrix& raw, const EnhanceConfig& cfg = {}, unsigned threads = 1) {
  cfg.validate();
  if (raw.enhanced) throw Error("enhance_local: matrix is already enhanced");
  DifferenceMatrix out(raw.rows, raw.cols, true);
  const auto radius = static_cast<std::size_t>(cfg.window_radius);
  parallel_for(raw.cols, threads, [&](std::size_t j) {
    for (std::size_t i = 0; i < raw.rows; ++i) {
      const std::size_t lo = i >= radius ? i - radius : 0;
      const std::size_t hi = std::min(raw.rows - 1, i + radius);
      const double n = static_cast<double>(hi - lo + 1);
      double sum = 0.0;
      for (std::size_t k = lo; k <= hi; ++k) sum += raw.at(k, j);
      const double mean = sum / n;
      double ss = 0.0;
      for (std::size_t k = lo; k <= hi; ++k) ss += (raw.at(k, j) - mean) * (raw.at(k, j) - mean);
      const double sigma = std::max(std::sqrt(ss / n), cfg.epsilon);
      out.at(i, j) = (raw.at(i, j) - mean) / sigma;
    }
  });
  return out;
}

/// One line per reference frame, comma separated.
inline std::string matrix_to_csv(const DifferenceMatrix& d) {
  std::string out;
  for (std::size_t i = 0; i < d.rows; ++i) {
    for (std::size_t j = 0; j < d.cols; ++j) {
      if (j) out += ',';
      out += format_double(d.at(i, j));
    }
    out += '\n';
  }
  return out;
}

// Binary dump: u32 rows | u32 cols (little-endian) | rows*cols float32.
inline std::string matrix_to_binary(const DifferenceMatrix& d) {
  std::string out;
  out.reserve(8 + d.values.size() * 4);
  detail::put_u32(out, static_cast<std::uint32_t>(d.rows));
  detail::put_u32(out, static_cast<std::uint32_t>(d.cols));
  for (double v : d.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

inline DifferenceMatrix matrix_from_binary(const std::string& bytes, bool enhanced) {
  if (bytes.size() < 8) throw Error("matrix dump: truncated header");
  const std::uint64_t rows = detail::get_u32(bytes, 0);
  const std::uint64_t cols = detail::get_u32(bytes, 4);
  if (bytes.size() != 8 + rows * cols * 4) throw Error("matrix dump: payload size does not match dims");
  DifferenceMatrix d(rows, cols, enhanced);
  for (std::size_t k = 0; k < d.values.size(); ++k)
    d.values[k] = std::bit_cast<float>(detail::get_u32(bytes, 8 + 4 * k));
  return d;
}

}  // namespace seqlcd
