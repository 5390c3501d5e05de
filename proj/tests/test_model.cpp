#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "seqlcd/model.hpp"
#include "seqlcd/synthgen.hpp"

namespace seqlcd {
namespace {

SequenceManifest make_route(const std::vector<double>& positions, const std::string& cond = "sunny") {
  SequenceManifest m;
  m.route_id = "r";
  m.condition = make_condition(ConditionSet{}, cond);
  for (std::size_t i = 0; i < positions.size(); ++i)
    m.frames.push_back({i, "frames/" + std::to_string(i) + ".pgm", positions[i], m.condition});
  return m;
}

nlohmann::json manifest_json(const std::vector<double>& positions) {
  nlohmann::json frames = nlohmann::json::array();
  for (std::size_t i = 0; i < positions.size(); ++i)
    frames.push_back({{"id", i}, {"file", "f" + std::to_string(i) + ".pgm"}, {"position", positions[i]}});
  return {{"route_id", "r"}, {"condition", "sunny"}, {"frames", frames}, {"descriptor_ref", nullptr}};
}

TEST(Manifest, MinimalSingleFrame) {
  const auto dir = oracle::temp_dir("manifest_min");
  write_file(dir + "/m.json", manifest_json({0.0}).dump());
  const auto m = load_manifest(dir + "/m.json");
  EXPECT_EQ(m.size(), 1u);
  EXPECT_EQ(m.condition.name, "sunny");
  EXPECT_EQ(m.condition.index, 0u);
  EXPECT_FALSE(m.descriptor_ref.has_value());
}

TEST(Manifest, RejectsNonMonotonePositions) {
  try {
    manifest_from_json(manifest_json({0, 1, 3, 2}));
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("non-monotone position"), std::string::npos);
  }
}

TEST(Manifest, RejectsDuplicateAndGappedIds) {
  auto j = manifest_json({0, 1, 2});
  j["frames"][2]["id"] = 1;
  EXPECT_THROW(manifest_from_json(j), Error);
  j["frames"][2]["id"] = 5;
  EXPECT_THROW(manifest_from_json(j), Error);
}

TEST(Manifest, RejectsUnknownConditionAndBadJson) {
  auto j = manifest_json({0});
  j["condition"] = "snowy";
  EXPECT_THROW(manifest_from_json(j), Error);
  EXPECT_NO_THROW(manifest_from_json(j, ConditionSet({"snowy", "sunny"})));

  const auto dir = oracle::temp_dir("manifest_bad");
  write_file(dir + "/bad.json", "{\"route_id\": ");
  EXPECT_THROW(load_manifest(dir + "/bad.json"), Error);
  EXPECT_THROW(load_manifest(dir + "/missing.json"), Error);
  EXPECT_THROW(manifest_from_json(manifest_json({})), Error);
}

TEST(Manifest, RequireImagesChecksFiles) {
  const auto dir = oracle::temp_dir("manifest_images");
  write_file(dir + "/m.json", manifest_json({0.0}).dump());
  EXPECT_THROW(load_manifest(dir + "/m.json", {}, true), Error);
  write_file(dir + "/f0.pgm", "P5\n1 1\n255\n\x01");
  EXPECT_NO_THROW(load_manifest(dir + "/m.json", {}, true));
}

TEST(Manifest, GeneratedRouteRoundTripsByteIdentically) {
  WorldConfig wc;
  wc.seed = 11;
  wc.width = 32;
  wc.height = 16;
  wc.n_landmarks = 40;
  wc.route_length = 600;
  SequenceSpec spec;
  spec.n_frames = 500;
  spec.start = 0.5;
  spec.end = 500.25;
  spec.condition = "rainy";
  const auto gen = generate_sequence(generate_world(wc), spec);
  ASSERT_EQ(gen.manifest.size(), 500u);

  const auto dir = oracle::temp_dir("manifest_roundtrip");
  save_manifest(gen.manifest, dir + "/m.json");
  const auto loaded = load_manifest(dir + "/m.json");
  EXPECT_EQ(loaded, gen.manifest);
  EXPECT_EQ(dump_manifest(loaded), read_file(dir + "/m.json"));

  SequenceManifest with_ref = loaded;
  with_ref.descriptor_ref = "codes.lat";
  EXPECT_EQ(manifest_from_json(nlohmann::json::parse(dump_manifest(with_ref))), with_ref);
}

TEST(Alignment, SelfIsIdentity) {
  const auto m = make_route({0, 1, 2, 3, 4, 5});
  const auto gt = align_ground_truth(m, m, 20);
  for (std::size_t i = 0; i < m.size(); ++i) EXPECT_EQ(gt.pairs[i], i);
  EXPECT_EQ(gt.d_thresh, 20);
}

TEST(Alignment, HalfwayTiesGoToLowerId) {
  const auto ref = make_route({0, 1, 2, 3, 4});
  const auto test = make_route({0.5, 1.5, 2.5, 3.5});
  const auto gt = align_ground_truth(ref, test, 20);
  for (std::size_t i = 0; i < test.size(); ++i) EXPECT_EQ(gt.pairs[i], i);
}

TEST(Alignment, FramesBeyondToleranceAreUnmatched) {
  const auto ref = make_route({0, 1, 2, 3, 4});
  const auto test = make_route({-3, 2, 6.5, 7.0});
  const auto gt = align_ground_truth(ref, test, 2);
  EXPECT_FALSE(gt.pairs[0]);
  EXPECT_EQ(gt.pairs[1], 2u);
  EXPECT_FALSE(gt.pairs[2]);  // 2.5 away; tolerance is 2 frames of spacing 1
  EXPECT_FALSE(gt.pairs[3]);
  EXPECT_FALSE(align_ground_truth(ref, make_route({6.01}), 2).pairs[0]);
  EXPECT_EQ(align_ground_truth(ref, make_route({6.0}), 2).pairs[0], 4u);
}

TEST(Alignment, RepeatedReferencePositionsUseLowestId) {
  const auto ref = make_route({0, 1, 1, 1, 2});
  const auto gt = align_ground_truth(ref, make_route({1.0, 1.2, 1.5}), 20);
  EXPECT_EQ(gt.pairs[0], 1u);
  EXPECT_EQ(gt.pairs[1], 1u);
  EXPECT_EQ(gt.pairs[2], 1u);
}

TEST(Alignment, Errors) {
  SequenceManifest empty;
  const auto m = make_route({0, 1});
  EXPECT_THROW(align_ground_truth(empty, m, 20), Error);
  EXPECT_THROW(align_ground_truth(m, m, 0), Error);
}

TEST(Alignment, DeterministicAndTranslationInvariant) {
  std::mt19937_64 rng(3);
  std::vector<double> rp, tp;
  double a = 0, b = 0;
  for (int i = 0; i < 200; ++i) rp.push_back(a += 0.5 + (rng() % 100) / 100.0);
  for (int i = 0; i < 150; ++i) tp.push_back(b += 0.3 + (rng() % 100) / 50.0);
  const auto gt1 = align_ground_truth(make_route(rp), make_route(tp), 5);
  const auto gt2 = align_ground_truth(make_route(rp), make_route(tp), 5);
  EXPECT_EQ(gt1.pairs, gt2.pairs);
  for (auto& p : rp) p += 1024.0;
  for (auto& p : tp) p += 1024.0;
  EXPECT_EQ(align_ground_truth(make_route(rp), make_route(tp), 5).pairs, gt1.pairs);
}

TEST(Alignment, MatchesGeneratorWarpTable) {
  WorldConfig wc;
  wc.seed = 5;
  wc.width = 32;
  wc.height = 16;
  wc.n_landmarks = 20;
  wc.route_length = 200;
  const World world = generate_world(wc);
  SequenceSpec ref;
  ref.name = "ref";
  ref.n_frames = 100;
  ref.start = 0;
  ref.end = 99;
  SequenceSpec test = ref;
  test.name = "test";
  test.velocity_ratio = 0.9;
  test.condition = "foggy";
  const auto r = generate_sequence(world, ref);
  const auto t = generate_sequence(world, test, ref);
  const auto gt = align_ground_truth(r.manifest, t.manifest, 20);
  ASSERT_EQ(gt.pairs.size(), t.warp.size());
  for (std::size_t i = 0; i < t.warp.size(); ++i) {
    ASSERT_TRUE(t.warp[i].ref_id.has_value());
    EXPECT_EQ(gt.pairs[i], t.warp[i].ref_id) << "test frame " << i;
  }
}

}  // namespace
}  // namespace seqlcd
