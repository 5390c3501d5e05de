#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "seqlcd/common.hpp"
#include "seqlcd/imaging.hpp"
#include "seqlcd/model.hpp"

namespace seqlcd {

struct WorldConfig {
  std::uint64_t seed = 0;
  std::size_t n_landmarks = 400;
  std::size_t width = 256;
  std::size_t height = 128;
  double route_length = 500.0;
  double pixels_per_unit = 8.0;  // screen motion of the nearest layer per route unit
  std::vector<std::string> conditions = {"sunny", "foggy", "rainy"};

  void validate() const {
    if (n_landmarks < 1) throw Error("world: n_landmarks must be >= 1");
    if (width == 0 || height == 0) throw Error("world: image dimensions must be positive");
    if (!(route_length > 0)) throw Error("world: route_length must be positive");
    if (!(pixels_per_unit > 0)) throw Error("world: pixels_per_unit must be positive");
    ConditionSet check(conditions);
  }
};

enum class Shape { Rect, Ellipse, Triangle };

struct Landmark {
  int layer = 0;
  double x = 0.0;  // layer coordinate of the shape center
  double base_y = 0.0;
  double width = 0.0;
  double height = 0.0;
  double shade = 0.0;
  Shape shape = Shape::Rect;

  bool operator==(const Landmark&) const = default;
};

struct World {
  WorldConfig config;
  std::vector<Landmark> landmarks;
  std::array<double, 4> ridge_phase{};
  std::array<double, 4> ridge_amp{};
};

// Screen motion per route unit, relative to the nearest layer.
inline constexpr std::array<double, 3> kParallax = {0.3, 0.6, 1.0};
inline constexpr double kRidgeParallax = 0.15;
inline constexpr std::array<double, 4> kRidgeWavelength = {97.0, 41.0, 23.0, 11.0};

namespace detail {

inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace detail

inline World generate_world(const WorldConfig& cfg) {
  cfg.validate();
  World world{cfg, {}, {}, {}};
  std::mt19937_64 rng(cfg.seed);
  for (std::size_t k = 0; k < world.ridge_phase.size(); ++k) {
    world.ridge_phase[k] = 2 * M_PI * detail::unit(rng);
    world.ridge_amp[k] = cfg.height * (0.02 + 0.05 * detail::unit(rng));
  }
  const double half_view = cfg.width / (2 * cfg.pixels_per_unit);
  const std::array<double, 3> scale = {0.5, 0.75, 1.0};
  const std::array<double, 3> base = {0.58, 0.72, 0.92};
  for (std::size_t i = 0; i < cfg.n_landmarks; ++i) {
    Landmark lm;
    lm.layer = static_cast<int>(rng() % kParallax.size());
    const double f = kParallax[lm.layer];
    const double margin = 64.0 / cfg.pixels_per_unit;
    const double lo = -half_view - margin, hi = cfg.route_length * f + half_view + margin;
    lm.x = lo + (hi - lo) * detail::unit(rng);
    lm.width = (8 + 40 * detail::unit(rng)) * scale[lm.layer] * cfg.width / 256.0;
    lm.height = (10 + 60 * detail::unit(rng)) * scale[lm.layer] * cfg.height / 128.0;
    lm.base_y = cfg.height * (base[lm.layer] + 0.06 * (detail::unit(rng) - 0.5));
    lm.shade = 15 + 225 * detail::unit(rng);
    lm.shape = static_cast<Shape>(rng() % 3);
    world.landmarks.push_back(lm);
  }
  return world;
}

namespace detail {

inline bool inside(const Landmark& lm, double cx, double px, double py) {
  const double top = lm.base_y - lm.height;
  if (py < top || py >= lm.base_y) return false;
  const double dx = px - cx;
  switch (lm.shape) {
    case Shape::Rect:
      return std::abs(dx) < lm.width / 2;
    case Shape::Ellipse: {
      const double ex = dx / (lm.width / 2);
      const double ey = (py - (top + lm.height / 2)) / (lm.height / 2);
      return ex * ex + ey * ey < 1.0;
    }
    case Shape::Triangle: {
      const double frac = (py - top) / lm.height;
      return std::abs(dx) < frac * lm.width / 2;
    }
  }
  return false;
}

}  // namespace detail

/// Grayscale view of the world at a route position, before any condition
/// styling. Horizontal edges are antialiased with four subsamples per pixel,
/// so sub-unit camera motion changes the image smoothly.
inline ImageBuffer render_frame(const World& world, double position) {
  const WorldConfig& cfg = world.config;
  if (!(position >= 0.0 && position <= cfg.route_length))
    throw Error("render_frame: position " + format_double(position) + " outside route");
  constexpr int kSub = 4;
  const std::size_t w = cfg.width, h = cfg.height;
  const double horizon = 0.55 * h;
  std::vector<double> canvas(w * h);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      canvas[y * w + x] = y < horizon ? 205.0 - 45.0 * y / horizon : 95.0 - 35.0 * (y - horizon) / (h - horizon);

  // Distant ridge line.
  for (std::size_t x = 0; x < w; ++x) {
    std::array<double, kSub> top{};
    for (int sub = 0; sub < kSub; ++sub) {
      const double px = x + (sub + 0.5) / kSub;
      const double wx = (px - w / 2.0) / cfg.pixels_per_unit + position * kRidgeParallax;
      double ridge = 0.12 * h;
      for (std::size_t k = 0; k < world.ridge_amp.size(); ++k)
        ridge += world.ridge_amp[k] * std::sin(2 * M_PI * wx / kRidgeWavelength[k] + world.ridge_phase[k]);
      top[sub] = horizon - ridge;
    }
    for (std::size_t y = 0; y < h && y + 0.5 < horizon; ++y) {
      int hits = 0;
      for (double t : top) hits += (y + 0.5 >= t);
      double& c = canvas[y * w + x];
      c += (130.0 - c) * hits / kSub;
    }
  }

  for (int layer = 0; layer < static_cast<int>(kParallax.size()); ++layer) {
    for (const Landmark& lm : world.landmarks) {
      if (lm.layer != layer) continue;
      const double cx = (lm.x - position * kParallax[layer]) * cfg.pixels_per_unit + w / 2.0;
      const double x0 = cx - lm.width / 2, x1 = cx + lm.width / 2;
      if (x1 < 0 || x0 >= w) continue;
      const auto xs = static_cast<std::size_t>(std::max(0.0, std::floor(x0)));
      const auto xe = static_cast<std::size_t>(std::min<double>(w, std::ceil(x1)));
      const auto ys = static_cast<std::size_t>(std::max(0.0, std::floor(lm.base_y - lm.height)));
      const auto ye = static_cast<std::size_t>(std::min<double>(h, std::ceil(lm.base_y)));
      for (std::size_t y = ys; y < ye; ++y)
        for (std::size_t x = xs; x < xe; ++x) {
          int hits = 0;
          for (int sub = 0; sub < kSub; ++sub) hits += detail::inside(lm, cx, x + (sub + 0.5) / kSub, y + 0.5);
          if (hits) {
            double& c = canvas[y * w + x];
            c += (lm.shade - c) * hits / kSub;
          }
        }
    }
  }

  ImageBuffer img(w, h, 1);
  for (std::size_t i = 0; i < canvas.size(); ++i)
    img.data[i] = static_cast<std::uint8_t>(std::clamp(round_half_up(canvas[i]), 0.0, 255.0));
  return img;
}

/// Appearance transform for a weather condition.
///
/// sunny: gain 1.2, offset +20. foggy: blend toward gray 200 with weight
/// 0.55 at the top row falling linearly to 0.275 at the bottom. rainy: gain
/// 0.7 plus short bright vertical streaks over roughly 2% of the pixels,
/// placed by noise_seed.
inline ImageBuffer apply_condition(const ImageBuffer& img, const std::string& condition, std::uint64_t noise_seed) {
  check_image(img);
  if (img.channels != 1) throw Error("apply_condition: expects a grayscale image");
  auto clamp8 = [](double v) { return static_cast<std::uint8_t>(std::clamp(round_half_up(v), 0.0, 255.0)); };
  ImageBuffer out = img;
  if (condition == "sunny") {
    for (auto& p : out.data) p = clamp8(1.2 * p + 20.0);
  } else if (condition == "foggy") {
    for (std::size_t y = 0; y < img.height; ++y) {
      const double t = img.height > 1 ? static_cast<double>(y) / (img.height - 1) : 0.0;
      const double weight = 0.55 * (1.0 - 0.5 * t);
      for (std::size_t x = 0; x < img.width; ++x)
        out.at(x, y) = clamp8((1.0 - weight) * img.at(x, y) + weight * 200.0);
    }
  } else if (condition == "rainy") {
    for (auto& p : out.data) p = clamp8(0.7 * p);
    constexpr std::size_t kStreak = 5;
    const auto streaks = static_cast<std::size_t>(
        std::max(1.0, round_half_up(0.02 * img.width * img.height / kStreak)));
    std::mt19937_64 rng(noise_seed);
    for (std::size_t s = 0; s < streaks; ++s) {
      const std::size_t x = rng() % img.width;
      const std::size_t y0 = rng() % img.height;
      for (std::size_t k = 0; k < kStreak && y0 + k < img.height; ++k) out.at(x, y0 + k) = 235;
    }
  } else {
    throw Error("apply_condition: unknown condition '" + condition + "'");
  }
  return out;
}

/// One pass along the route. Frames are spaced (end - start)/(n_frames - 1)
/// times velocity_ratio, so a ratio below 1 yields proportionally more
/// frames over the same span.
struct SequenceSpec {
  std::string name = "route";
  std::size_t n_frames = 100;
  double start = 0.0;
  double end = 99.0;
  double velocity_ratio = 1.0;
  std::string condition = "sunny";
  std::uint64_t noise_seed = 0;

  void validate() const {
    if (n_frames < 1) throw Error("sequence '" + name + "': n_frames must be >= 1");
    if (!(velocity_ratio > 0)) throw Error("sequence '" + name + "': velocity_ratio must be positive");
    if (!(end >= start)) throw Error("sequence '" + name + "': end must not precede start");
  }

  double spacing() const {
    return n_frames > 1 ? (end - start) / static_cast<double>(n_frames - 1) * velocity_ratio : 0.0;
  }

  std::vector<double> positions() const {
    validate();
    const double step = spacing();
    const std::size_t count = step > 0 ? static_cast<std::size_t>(std::floor((end - start) / step + 1e-9)) + 1 : 1;
    std::vector<double> out(count);
    for (std::size_t i = 0; i < count; ++i) out[i] = start + static_cast<double>(i) * step;
    return out;
  }
};

/// True correspondence of one generated frame to the reference grid.
struct WarpEntry {
  std::size_t test_id = 0;
  double ref_coord = 0.0;  // position in reference-frame units
  std::optional<std::size_t> ref_id;

  bool operator==(const WarpEntry&) const = default;
};

struct GeneratedSequence {
  SequenceManifest manifest;
  std::vector<ImageBuffer> images;
  std::vector<WarpEntry> warp;
  std::string reference_name;
};

inline std::string frame_file_name(std::size_t id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "frames/%06zu.pgm", id);
  return buf;
}

/// Renders a sequence and its warp table against `reference` (itself when
/// absent). The nearest reference frame wins, ties to the lower id; frames
/// more than half a spacing outside the reference span have no entry.
inline GeneratedSequence generate_sequence(const World& world, const SequenceSpec& spec,
                                           const std::optional<SequenceSpec>& reference = std::nullopt,
                                           unsigned threads = 1) {
  spec.validate();
  const SequenceSpec& ref = reference ? *reference : spec;
  ref.validate();
  const ConditionSet conditions(world.config.conditions);
  const ConditionLabel label = make_condition(conditions, spec.condition);
  const std::vector<double> positions = spec.positions();
  const std::size_t ref_count = ref.positions().size();
  const double ref_step = ref.spacing();

  GeneratedSequence gen;
  gen.reference_name = ref.name;
  gen.manifest.route_id = spec.name;
  gen.manifest.condition = label;
  for (std::size_t i = 0; i < positions.size(); ++i) {
    gen.manifest.frames.push_back({i, frame_file_name(i), positions[i], label});
    WarpEntry e{i, 0.0, std::nullopt};
    if (ref_step > 0) {
      e.ref_coord = (positions[i] - ref.start) / ref_step;
      const double k = std::ceil(e.ref_coord - 0.5 - 1e-9);
      if (k >= 0 && k < static_cast<double>(ref_count)) e.ref_id = static_cast<std::size_t>(k);
    } else if (std::abs(positions[i] - ref.start) <= 1e-9) {
      e.ref_id = 0;
    }
    gen.warp.push_back(e);
  }
  gen.images.resize(positions.size());
  parallel_for(positions.size(), threads, [&](std::size_t i) {
    gen.images[i] = apply_condition(render_frame(world, positions[i]), spec.condition, mix_seed(spec.noise_seed, i));
  });
  validate_manifest(gen.manifest);
  return gen;
}

inline nlohmann::json warp_to_json(const GeneratedSequence& gen) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : gen.warp)
    entries.push_back({{"test_id", e.test_id},
                       {"ref_coord", e.ref_coord},
                       {"ref_id", e.ref_id ? nlohmann::json(*e.ref_id) : nlohmann::json(nullptr)}});
  return {{"reference", gen.reference_name}, {"sequence", gen.manifest.route_id}, {"entries", std::move(entries)}};
}

inline std::vector<WarpEntry> warp_from_json(const nlohmann::json& j) {
  std::vector<WarpEntry> out;
  for (const auto& e : j.at("entries")) {
    WarpEntry w{e.at("test_id").get<std::size_t>(), e.at("ref_coord").get<double>(), std::nullopt};
    if (!e.at("ref_id").is_null()) w.ref_id = e.at("ref_id").get<std::size_t>();
    out.push_back(w);
  }
  return out;
}

/// Writes manifest.json, warp.json and frames/*.pgm under `dir`.
inline void write_sequence(const GeneratedSequence& gen, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "frames");
  for (std::size_t i = 0; i < gen.images.size(); ++i)
    encode_image(gen.images[i], (fs::path(dir) / gen.manifest.frames[i].image_path).string());
  save_manifest(gen.manifest, (fs::path(dir) / "manifest.json").string());
  write_file((fs::path(dir) / "warp.json").string(), warp_to_json(gen).dump(2) + "\n");
}

}  // namespace seqlcd
