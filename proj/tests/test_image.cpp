#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "pfci/errors.hpp"
#include "pfci/image.hpp"
#include "tmpdir.hpp"

using namespace pfci;

TEST(FloatImage, RejectsNonFinite) {
  EXPECT_THROW(FloatImage(1, 1, std::vector<double>{std::nan("")}), RangeError);
  EXPECT_THROW(FloatImage(2, 1, std::vector<double>{0.0}), ShapeError);
  FloatImage img(1, 1);
  EXPECT_THROW(img.set(0, 0, INFINITY), RangeError);
}

TEST(Pfm, LayoutIsBottomRowFirstLittleEndian) {
  TempDir dir;
  const FloatImage img(2, 2, std::vector<double>{1, 2, 3, 4});
  save_pfm(img, dir / "a.pfm");
  const auto bytes = oracle::read_bytes(dir / "a.pfm");
  const std::string header = "Pf\n2 2\n-1.0\n";
  ASSERT_EQ(bytes.size(), header.size() + 16);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + static_cast<long>(header.size())), header);
  float px[4];
  std::memcpy(px, bytes.data() + header.size(), 16);
  EXPECT_EQ(px[0], 3.0f);
  EXPECT_EQ(px[1], 4.0f);
  EXPECT_EQ(px[2], 1.0f);
  EXPECT_EQ(px[3], 2.0f);
}

TEST(Pfm, RoundTripsFloatValues) {
  TempDir dir;
  std::mt19937_64 rng(1);
  FloatImage img = oracle::random_image(rng, 7, 5, -100, 100);
  std::vector<double> narrowed;
  for (double p : img.pixels()) narrowed.push_back(static_cast<float>(p));
  img = FloatImage(7, 5, narrowed);
  save_pfm(img, dir / "r.pfm");
  EXPECT_EQ(load_pfm(dir / "r.pfm"), img);
}

TEST(Pfm, RejectsMalformed) {
  TempDir dir;
  {
    std::ofstream f(dir / "bad.pfm", std::ios::binary);
    f << "PF\n1 1\n-1.0\n0000";
  }
  EXPECT_THROW(load_pfm(dir / "bad.pfm"), FormatError);
  {
    std::ofstream f(dir / "short.pfm", std::ios::binary);
    f << "Pf\n2 2\n-1.0\n0000";
  }
  EXPECT_THROW(load_pfm(dir / "short.pfm"), SizeMismatchError);
}

TEST(Pgm, BinaryPayloadIsZeroOr255) {
  TempDir dir;
  BinaryImage img(3, 2);
  img.set(1, 0, true);
  img.set(2, 1, true);
  save_pgm(img, dir / "m.pgm");
  const auto bytes = oracle::read_bytes(dir / "m.pgm");
  const std::string header = "P5\n3 2\n255\n";
  ASSERT_EQ(bytes.size(), header.size() + 6);
  const std::vector<unsigned char> payload(bytes.begin() + static_cast<long>(header.size()), bytes.end());
  EXPECT_EQ(payload, (std::vector<unsigned char>{0, 255, 0, 0, 0, 255}));
  EXPECT_EQ(load_pgm(dir / "m.pgm"), img);
}

TEST(Resize, IdentityAndConstantPreserved) {
  std::mt19937_64 rng(2);
  const FloatImage img = oracle::random_image(rng, 8, 8);
  EXPECT_EQ(resize_bilinear(img, 8, 8), img);
  const FloatImage c(5, 7, 0.25);
  for (const auto r = resize_bilinear(c, 16, 3); double p : r.pixels()) EXPECT_NEAR(p, 0.25, 1e-15);
}

TEST(Resize, DownsampleByTwoAveragesPairs) {
  const FloatImage img(4, 1, std::vector<double>{0, 2, 4, 6});
  const FloatImage r = resize_bilinear(img, 2, 1);
  EXPECT_NEAR(r.at(0, 0), 1.0, 1e-12);
  EXPECT_NEAR(r.at(1, 0), 5.0, 1e-12);
}

TEST(Resize, NearestKeepsBinaryBlocks) {
  BinaryImage m(2, 2);
  m.set(1, 1, true);
  const BinaryImage up = resize_nearest(m, 4, 4);
  for (int z = 0; z < 4; ++z)
    for (int x = 0; x < 4; ++x) EXPECT_EQ(up.at(x, z), x >= 2 && z >= 2);
}
