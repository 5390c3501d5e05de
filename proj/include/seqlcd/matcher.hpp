#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "seqlcd/common.hpp"
#include "seqlcd/diffmatrix.hpp"

namespace seqlcd {

/// Sequence search parameters. Defaults are the published settings for the
/// enhanced sequence matcher (d_s = 10, V in [0.8, 1.1] with step 0.1).
struct MatcherParams {
  int d_s = 10;
  double v_min = 0.8;
  double v_max = 1.1;
  double v_step = 0.1;
  double score_threshold = 0.0;

  void validate() const {
    if (d_s < 1) throw Error("matcher: d_s must be >= 1");
    if (!(v_min <= v_max)) throw Error("matcher: v_min must not exceed v_max");
    if (!(v_step > 0)) throw Error("matcher: v_step must be positive");
  }
};

/// Best route ending at test frame `test_index`.
struct MatchCandidate {
  std::size_t test_index = 0;
  std::size_t ref_index = 0;
  double velocity = 0.0;
  double score = 0.0;

  bool operator==(const MatchCandidate&) const = default;
};

/// v_min, v_min + v_step, ... up to and including v_max.
inline std::vector<double> enumerate_velocities(const MatcherParams& p) {
  p.validate();
  constexpr double kTol = 1e-9;
  const auto steps = static_cast<std::size_t>(std::floor((p.v_max - p.v_min) / p.v_step + kTol));
  std::vector<double> out;
  out.reserve(steps + 1);
  for (std::size_t i = 0; i <= steps; ++i) {
    double v = p.v_min + static_cast<double>(i) * p.v_step;
    if (std::abs(v - p.v_max) < kTol) v = p.v_max;
    out.push_back(v);
  }
  return out;
}

/// Reference row visited at offset u = t - (T - d_s) along a route starting
/// at row s with velocity V.
inline long long route_row(std::size_t s, double velocity, int offset) {
  return static_cast<long long>(round_half_up(static_cast<double>(s) + velocity * offset));
}

/// Sum of enhanced differences along the route through test columns
/// T - d_s .. T. Returns nullopt when the route leaves the reference range.
inline std::optional<double> score_route(const DifferenceMatrix& dhat, std::size_t T, std::size_t s, double velocity,
                                         int d_s) {
  if (d_s < 1 || T < static_cast<std::size_t>(d_s) || T >= dhat.cols) return std::nullopt;
  const std::size_t first = T - static_cast<std::size_t>(d_s);
  double sum = 0.0;
  for (int u = 0; u <= d_s; ++u) {
    const long long k = route_row(s, velocity, u);
    if (k < 0 || k >= static_cast<long long>(dhat.rows)) return std::nullopt;
    sum += dhat.at(static_cast<std::size_t>(k), first + static_cast<std::size_t>(u));
  }
  return sum;
}

/// Best-scoring route for every test frame T in [d_s, N - 1].
///
/// Minimizes the route score over all start rows and enumerated
/// velocities; ties go to the lower start row, then the lower velocity.
/// Frames where every route leaves the matrix produce no candidate.
inline std::vector<MatchCandidate> search_matches(const DifferenceMatrix& dhat, const MatcherParams& params,
                                                  unsigned threads = 1) {
  params.validate();
  if (!dhat.enhanced) throw Error("search_matches: expects an enhanced difference matrix");
  const auto d_s = static_cast<std::size_t>(params.d_s);
  if (dhat.cols <= d_s) return {};
  const std::vector<double> velocities = enumerate_velocities(params);
  const std::size_t n_frames = dhat.cols - d_s;
  std::vector<std::optional<MatchCandidate>> slots(n_frames);
  parallel_for(n_frames, threads, [&](std::size_t idx) {
    const std::size_t T = idx + d_s;
    std::optional<MatchCandidate> best;
    for (std::size_t s = 0; s < dhat.rows; ++s)
      for (double v : velocities) {
        auto score = score_route(dhat, T, s, v, params.d_s);
        if (!score) continue;
        if (!best || *score < best->score) {
          best = MatchCandidate{T, static_cast<std::size_t>(route_row(s, v, params.d_s)), v, *score};
        }
      }
    slots[idx] = best;
  });
  std::vector<MatchCandidate> out;
  for (auto& c : slots)
    if (c) out.push_back(*c);
  return out;
}

/// Accepted loop closures: candidates scoring strictly below theta.
inline std::map<std::size_t, std::size_t> apply_threshold(const std::vector<MatchCandidate>& candidates, double theta) {
  std::map<std::size_t, std::size_t> accepted;
  for (const auto& c : candidates)
    if (c.score < theta) accepted[c.test_index] = c.ref_index;
  return accepted;
}

inline std::string candidates_to_csv(const std::vector<MatchCandidate>& candidates) {
  std::string out = "T,ref_index,V,S\n";
  for (const auto& c : candidates)
    out += std::to_string(c.test_index) + "," + std::to_string(c.ref_index) + "," + format_double(c.velocity) + "," +
           format_double(c.score) + "\n";
  return out;
}

inline std::vector<MatchCandidate> candidates_from_csv(const std::string& text) {
  std::vector<MatchCandidate> out;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("T,", 0) == 0) continue;
    std::vector<std::string> cells;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw Error("candidates csv line " + std::to_string(line_no) + ": expected 4 columns");
    try {
      MatchCandidate c;
      const double t = parse_double(cells[0]);
      const double r = parse_double(cells[1]);
      if (t < 0 || r < 0 || t != std::floor(t) || r != std::floor(r)) throw Error("indices must be non-negative integers");
      c.test_index = static_cast<std::size_t>(t);
      c.ref_index = static_cast<std::size_t>(r);
      c.velocity = parse_double(cells[2]);
      c.score = parse_double(cells[3]);
      out.push_back(c);
    } catch (const Error& e) {
      throw Error("candidates csv line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace seqlcd
