#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "seqlcd/descriptor.hpp"
#include "seqlcd/synthgen.hpp"

namespace seqlcd {
namespace {

WorldConfig small_world(std::uint64_t seed) {
  WorldConfig wc;
  wc.seed = seed;
  wc.route_length = 300;
  return wc;
}

double mean_abs_diff(const ImageBuffer& a, const ImageBuffer& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(int(a.data[i]) - int(b.data[i]));
  return s / static_cast<double>(a.data.size());
}

TEST(World, DeterministicPerSeed) {
  const auto a = generate_world(small_world(1)), b = generate_world(small_world(1));
  EXPECT_EQ(a.landmarks, b.landmarks);
  EXPECT_EQ(a.landmarks.size(), small_world(1).n_landmarks);
  EXPECT_NE(generate_world(small_world(2)).landmarks, a.landmarks);
}

TEST(World, ConfigValidation) {
  auto wc = small_world(1);
  wc.n_landmarks = 0;
  EXPECT_THROW(generate_world(wc), Error);
  wc = small_world(1);
  wc.width = 0;
  EXPECT_THROW(generate_world(wc), Error);
  wc = small_world(1);
  wc.conditions = {"sunny", "sunny"};
  EXPECT_THROW(generate_world(wc), Error);
}

TEST(Render, DeterministicAndDistinct) {
  const auto w = generate_world(small_world(3));
  const auto a = render_frame(w, 40.0);
  EXPECT_EQ(a, render_frame(w, 40.0));
  EXPECT_EQ(a.width, 256u);
  EXPECT_EQ(a.height, 128u);
  EXPECT_GT(mean_abs_diff(render_frame(w, 10.0), render_frame(w, 10.0 + 150.0)), 0.0);
  EXPECT_THROW(render_frame(w, -1.0), Error);
  EXPECT_THROW(render_frame(w, 301.0), Error);
}

TEST(Render, DescriptorDistanceGrowsWithOffset) {
  const auto w = generate_world(small_world(4));
  const std::vector<double> offsets{0.5, 1.0, 2.0, 4.0, 8.0};
  std::vector<double> mean_dist(offsets.size(), 0.0);
  for (double p = 20; p < 260; p += 12) {
    const auto base = sad_descriptor(render_frame(w, p));
    for (std::size_t k = 0; k < offsets.size(); ++k)
      mean_dist[k] += sad_distance(base, sad_descriptor(render_frame(w, p + offsets[k])));
  }
  for (std::size_t k = 1; k < offsets.size(); ++k) EXPECT_GT(mean_dist[k], mean_dist[k - 1]) << "offset " << offsets[k];
}

TEST(Condition, Sunny) {
  const auto out = apply_condition(ImageBuffer(4, 3, 1, 100), "sunny", 0);
  for (auto p : out.data) EXPECT_EQ(p, 140);
  EXPECT_EQ(apply_condition(ImageBuffer(1, 1, 1, 250), "sunny", 0).data[0], 255);
}

TEST(Condition, FoggyGradient) {
  const auto out = apply_condition(ImageBuffer(3, 5, 1, 0), "foggy", 0);
  for (std::size_t x = 0; x < 3; ++x) {
    EXPECT_EQ(out.at(x, 0), 110);  // 0.55 * 200
    EXPECT_EQ(out.at(x, 4), 55);   // 0.275 * 200
  }
}

TEST(Condition, RainyStreaksAreSeeded) {
  const ImageBuffer img(256, 128, 1, 100);
  const auto a = apply_condition(img, "rainy", 9), b = apply_condition(img, "rainy", 9);
  EXPECT_EQ(a, b);
  EXPECT_NE(a, apply_condition(img, "rainy", 10));
  std::size_t bright = 0;
  for (auto p : a.data) {
    EXPECT_TRUE(p == 70 || p == 235);
    bright += p == 235;
  }
  const double frac = static_cast<double>(bright) / a.data.size();
  EXPECT_GT(frac, 0.01);
  EXPECT_LE(frac, 0.021);
}

TEST(Condition, UnknownConditionFails) {
  EXPECT_THROW(apply_condition(ImageBuffer(2, 2, 1), "snowy", 0), Error);
}

TEST(Sequence, UnitRatioIdentityWarp) {
  const auto w = generate_world(small_world(5));
  SequenceSpec spec;
  spec.n_frames = 20;
  spec.start = 5;
  spec.end = 24;
  const auto gen = generate_sequence(w, spec, spec);
  ASSERT_EQ(gen.warp.size(), 20u);
  for (const auto& e : gen.warp) EXPECT_EQ(e.ref_id, e.test_id);
}

TEST(Sequence, SlowerRatioYieldsMoreFrames) {
  const auto w = generate_world(small_world(5));
  SequenceSpec ref;
  ref.n_frames = 100;
  ref.start = 0;
  ref.end = 99;
  SequenceSpec slow = ref;
  slow.velocity_ratio = 0.9;
  const auto gen = generate_sequence(w, slow, ref);
  EXPECT_EQ(gen.manifest.size(), 111u);  // floor(99 / 0.9) + 1
  EXPECT_NEAR(gen.manifest.frames.back().position, 99.0, 1e-9);
  EXPECT_NEAR(gen.warp[10].ref_coord, 9.0, 1e-9);
  EXPECT_EQ(gen.warp[10].ref_id, 9u);
  EXPECT_EQ(gen.warp[5].ref_id, 4u);  // 4.5 ties to the lower id
}

TEST(Sequence, ConditionsChangePixelsNotPositions) {
  const auto w = generate_world(small_world(6));
  SequenceSpec spec;
  spec.n_frames = 12;
  spec.start = 30;
  spec.end = 41;
  std::vector<GeneratedSequence> gens;
  for (const char* c : {"sunny", "foggy", "rainy"}) {
    spec.condition = c;
    gens.push_back(generate_sequence(w, spec));
  }
  for (std::size_t k = 1; k < gens.size(); ++k) {
    ASSERT_EQ(gens[k].manifest.size(), gens[0].manifest.size());
    EXPECT_NE(gens[k].manifest.condition, gens[0].manifest.condition);
    for (std::size_t i = 0; i < gens[0].manifest.size(); ++i) {
      EXPECT_EQ(gens[k].manifest.frames[i].position, gens[0].manifest.frames[i].position);
      EXPECT_EQ(gens[k].manifest.frames[i].image_path, gens[0].manifest.frames[i].image_path);
    }
    EXPECT_NE(gens[k].images[0], gens[0].images[0]);
  }
}

TEST(Sequence, RegenerationIsByteIdenticalAcrossThreadCounts) {
  const auto w = generate_world(small_world(7));
  SequenceSpec spec;
  spec.n_frames = 8;
  spec.start = 0;
  spec.end = 7;
  spec.condition = "rainy";
  spec.noise_seed = 42;
  const auto d1 = oracle::temp_dir("synth_a"), d2 = oracle::temp_dir("synth_b");
  write_sequence(generate_sequence(w, spec, std::nullopt, 1), d1);
  write_sequence(generate_sequence(w, spec, std::nullopt, 3), d2);
  for (const auto& entry : std::filesystem::recursive_directory_iterator(d1)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = std::filesystem::relative(entry.path(), d1);
    EXPECT_EQ(read_file(entry.path().string()), read_file((std::filesystem::path(d2) / rel).string())) << rel;
  }
  EXPECT_TRUE(std::filesystem::exists(d1 + "/frames/000007.pgm"));
  const auto warp = warp_from_json(nlohmann::json::parse(read_file(d1 + "/warp.json")));
  EXPECT_EQ(warp, generate_sequence(w, spec).warp);
}

TEST(Sequence, Validation) {
  const auto w = generate_world(small_world(8));
  SequenceSpec spec;
  spec.velocity_ratio = 0;
  EXPECT_THROW(generate_sequence(w, spec), Error);
  spec = {};
  spec.n_frames = 0;
  EXPECT_THROW(generate_sequence(w, spec), Error);
  spec = {};
  spec.condition = "snowy";
  EXPECT_THROW(generate_sequence(w, spec), Error);
  spec = {};
  spec.end = 400;
  EXPECT_THROW(generate_sequence(w, spec), Error);
}

}  // namespace
}  // namespace seqlcd
