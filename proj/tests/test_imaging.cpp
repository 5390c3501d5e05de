#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "seqlcd/imaging.hpp"

namespace seqlcd {
namespace {

std::span<const std::uint8_t> as_bytes(const std::string& s) {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

ImageBuffer random_image(std::size_t w, std::size_t h, std::size_t c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  ImageBuffer img(w, h, c);
  for (auto& p : img.data) p = static_cast<std::uint8_t>(rng() & 0xFF);
  return img;
}

TEST(Pnm, DecodesP5Exactly) {
  const std::string raw = std::string("P5\n2 2\n255\n") + std::string("\x00\xff\x80\x40", 4);
  const auto img = decode_image_bytes(as_bytes(raw));
  EXPECT_EQ(img.width, 2u);
  EXPECT_EQ(img.height, 2u);
  EXPECT_EQ(img.channels, 1u);
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{0, 255, 128, 64}));
}

TEST(Pnm, DecodesP6WithComments) {
  const std::string raw = std::string("P6\n# made by hand\n1 1\n255\n") + std::string("\x01\x02\x03", 3);
  const auto img = decode_image_bytes(as_bytes(raw));
  EXPECT_EQ(img.channels, 3u);
  EXPECT_EQ(img.data, (std::vector<std::uint8_t>{1, 2, 3}));
}

TEST(Pnm, Errors) {
  EXPECT_THROW(decode_image_bytes(as_bytes("P2\n1 1\n255\n0")), Error);
  EXPECT_THROW(decode_image_bytes(as_bytes("P5\n2 2\n255\n\x01")), Error);
  EXPECT_THROW(decode_image_bytes(as_bytes(std::string("P5\n1 1\n65535\n") + std::string(2, '\0'))), Error);
  EXPECT_THROW(decode_image_bytes(as_bytes("P5\n1")), Error);
  EXPECT_THROW(decode_image("/nonexistent/file.pgm"), Error);
}

TEST(Pnm, RoundTripsRandomImages) {
  const auto dir = oracle::temp_dir("pnm");
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const std::size_t c = seed % 2 ? 3 : 1;
    const auto img = random_image(1 + seed % 7, 1 + seed % 5, c, seed);
    const auto path = dir + "/img" + std::to_string(seed) + (c == 1 ? ".pgm" : ".ppm");
    encode_image(img, path);
    EXPECT_EQ(decode_image(path), img);
    EXPECT_EQ(encode_image_bytes(decode_image(path)), read_file(path));
  }
}

TEST(Grayscale, Luma) {
  ImageBuffer gray(2, 1, 1);
  gray.data = {7, 200};
  EXPECT_EQ(to_grayscale(gray), gray);

  ImageBuffer rgb(3, 1, 3);
  rgb.data = {255, 255, 255, 255, 0, 0, 0, 0, 0};
  const auto out = to_grayscale(rgb);
  EXPECT_EQ(out.channels, 1u);
  EXPECT_EQ(out.data, (std::vector<std::uint8_t>{255, 76, 0}));
}

TEST(Downsample, IdentityAndConstant) {
  const auto img = random_image(5, 3, 1, 9);
  EXPECT_EQ(downsample(img, 5, 3), img);
  ImageBuffer c(4, 4, 1, 100);
  EXPECT_EQ(downsample(c, 2, 2), ImageBuffer(2, 2, 1, 100));
}

TEST(Downsample, CheckerboardRoundsHalfUp) {
  ImageBuffer cb(4, 2, 1);
  cb.data = {0, 255, 0, 255, 255, 0, 255, 0};
  EXPECT_EQ(downsample(cb, 2, 1).data, (std::vector<std::uint8_t>{128, 128}));
}

TEST(Downsample, FractionalBoxesMatchAreaAverage) {
  // 3 -> 2 columns: output 0 covers source [0, 1.5), output 1 covers [1.5, 3).
  ImageBuffer img(3, 1, 1);
  img.data = {10, 20, 40};
  // (10 + 0.5*20)/1.5 = 13.33 -> 13; (0.5*20 + 40)/1.5 = 33.33 -> 33
  EXPECT_EQ(downsample(img, 2, 1).data, (std::vector<std::uint8_t>{13, 33}));
}

TEST(Downsample, Errors) {
  const auto img = random_image(4, 4, 1, 1);
  EXPECT_THROW(downsample(img, 0, 2), Error);
  EXPECT_THROW(downsample(img, 5, 2), Error);
}

TEST(PatchNormalize, ConstantPatchIsZero) {
  const auto out = patch_normalize(ImageBuffer(8, 8, 1, 77), 4);
  for (double v : out.values) EXPECT_EQ(v, 0.0);
}

TEST(PatchNormalize, TwoPixelPatch) {
  ImageBuffer img(2, 1, 1);
  img.data = {0, 2};
  const auto out = patch_normalize(img, 2);
  EXPECT_NEAR(out.values[0], -1.0, 1e-12);
  EXPECT_NEAR(out.values[1], 1.0, 1e-12);
}

TEST(PatchNormalize, ZeroMeanPerPatch) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto out = patch_normalize(random_image(16, 8, 1, seed), 4);
    for (std::size_t by = 0; by < 8; by += 4)
      for (std::size_t bx = 0; bx < 16; bx += 4) {
        double sum = 0;
        for (std::size_t y = by; y < by + 4; ++y)
          for (std::size_t x = bx; x < bx + 4; ++x) sum += out.at(x, y);
        EXPECT_NEAR(sum / 16, 0.0, 1e-9);
      }
  }
}

TEST(PatchNormalize, AffineInvariant) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    ImageBuffer img(12, 8, 1);
    for (auto& p : img.data) p = static_cast<std::uint8_t>(rng() % 100);
    const int gain = 1 + static_cast<int>(rng() % 2), offset = static_cast<int>(rng() % 50);
    ImageBuffer scaled = img;
    for (auto& p : scaled.data) p = static_cast<std::uint8_t>(gain * p + offset);
    const auto a = patch_normalize(img, 4), b = patch_normalize(scaled, 4);
    for (std::size_t i = 0; i < a.values.size(); ++i) EXPECT_NEAR(a.values[i], b.values[i], 1e-6);
  }
}

TEST(PatchNormalize, PadsByReplicationThenCrops) {
  ImageBuffer img(3, 1, 1);
  img.data = {0, 2, 4};
  // Padded row [0 2 4 4] (and replicated vertically): patch 0 is [0 2], patch 1 is [4 4].
  const auto out = patch_normalize(img, 2);
  ASSERT_EQ(out.values.size(), 3u);
  EXPECT_NEAR(out.values[0], -1.0, 1e-12);
  EXPECT_NEAR(out.values[1], 1.0, 1e-12);
  EXPECT_NEAR(out.values[2], 0.0, 1e-12);
  EXPECT_THROW(patch_normalize(img, 0), Error);
  EXPECT_THROW(patch_normalize(ImageBuffer(2, 2, 3), 2), Error);
}

}  // namespace
}  // namespace seqlcd
