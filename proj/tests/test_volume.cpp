#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "pfci/errors.hpp"
#include "pfci/volume.hpp"
#include "tmpdir.hpp"

using namespace pfci;

namespace {

// Decodes a CTV1 file without the library: header by stream, payload byte by byte.
std::vector<int> decode_ctv_payload(const std::filesystem::path& p, Dims3& dims) {
  const auto bytes = oracle::read_bytes(p);
  const std::string text(bytes.begin(), bytes.end());
  std::istringstream in(text);
  std::string magic;
  std::getline(in, magic);
  EXPECT_EQ(magic, "CTV1");
  std::string header;
  std::getline(in, header);
  std::istringstream h(header);
  double sx, sy, sz;
  h >> dims.nx >> dims.ny >> dims.nz >> sx >> sy >> sz;
  const std::size_t off = magic.size() + 1 + header.size() + 1;
  std::vector<int> out;
  for (std::size_t i = off; i + 1 < bytes.size(); i += 2) {
    out.push_back(static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[i] | (bytes[i + 1] << 8))));
  }
  return out;
}

void write_text(const std::filesystem::path& p, const std::string& s) {
  std::ofstream f(p, std::ios::binary);
  f << s;
}

}  // namespace

TEST(Volume, RejectsBadDimsAndHu) {
  EXPECT_THROW(CtVolume(Dims3{0, 1, 1}, {}, {}), ParameterError);
  EXPECT_THROW(CtVolume(Dims3{2, 2, 2}, {}, std::vector<std::int16_t>(7)), SizeMismatchError);
  std::vector<std::int16_t> v(8, 0);
  v[3] = 4096;
  EXPECT_THROW(CtVolume(Dims3{2, 2, 2}, {}, v), RangeError);
  v[3] = -4097;
  EXPECT_THROW(CtVolume(Dims3{2, 2, 2}, {}, v), RangeError);
}

TEST(Volume, ZeroVolumeRoundTripsByteIdentical) {
  TempDir dir;
  const CtVolume v(Dims3{2, 2, 2}, {1.0, 1.0, 1.0}, std::vector<std::int16_t>(8, 0));
  save_ctv(v, dir / "a.ctv");
  const CtVolume back = load_ctv(dir / "a.ctv");
  EXPECT_EQ(back, v);
  save_ctv(back, dir / "b.ctv");
  EXPECT_EQ(oracle::read_bytes(dir / "a.ctv"), oracle::read_bytes(dir / "b.ctv"));
}

TEST(Volume, RandomVolumeMatchesByteLevelReader) {
  TempDir dir;
  std::mt19937_64 rng(3);
  const CtVolume v = oracle::random_volume(rng, Dims3{8, 8, 8}, -4096, 4095);
  save_ctv(v, dir / "r.ctv");
  Dims3 dims;
  const auto payload = decode_ctv_payload(dir / "r.ctv", dims);
  EXPECT_EQ(dims, v.dims());
  ASSERT_EQ(payload.size(), v.dims().count());
  for (int z = 0; z < 8; ++z)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) EXPECT_EQ(payload[dims.index(x, y, z)], v.at(x, y, z));
  EXPECT_EQ(load_ctv(dir / "r.ctv"), v);
}

TEST(Volume, HeaderFormatIsExact) {
  TempDir dir;
  const CtVolume v(Dims3{3, 2, 1}, {0.5, 1.25, 2.0}, std::vector<std::int16_t>(6, -5));
  save_ctv(v, dir / "h.ctv");
  const auto bytes = oracle::read_bytes(dir / "h.ctv");
  const std::string text(bytes.begin(), bytes.end());
  EXPECT_EQ(text.rfind("CTV1\n3 2 1 ", 0), 0u);
  EXPECT_EQ(load_ctv(dir / "h.ctv").spacing(), (Spacing3{0.5, 1.25, 2.0}));
}

TEST(Volume, TruncatedPayloadIsSizeMismatch) {
  TempDir dir;
  write_text(dir / "t.ctv", "CTV1\n4 4 4 1 1 1\n" + std::string(63 * 2, '\0'));
  EXPECT_THROW(load_ctv(dir / "t.ctv"), SizeMismatchError);
}

TEST(Volume, MalformedHeaderIsFormatError) {
  TempDir dir;
  write_text(dir / "m.ctv", "CTV2\n1 1 1 1 1 1\n\0\0");
  EXPECT_THROW(load_ctv(dir / "m.ctv"), FormatError);
  write_text(dir / "n.ctv", "CTV1\n1 1 one 1 1 1\n");
  EXPECT_THROW(load_ctv(dir / "n.ctv"), FormatError);
  EXPECT_THROW(load_ctv(dir / "missing.ctv"), IoError);
}

TEST(Volume, OutOfEnvelopeOnLoadIsRangeError) {
  TempDir dir;
  std::string payload = "CTV1\n1 1 1 1 1 1\n";
  payload += static_cast<char>(0x00);
  payload += static_cast<char>(0x10);  // 4096
  write_text(dir / "o.ctv", payload);
  EXPECT_THROW(load_ctv(dir / "o.ctv"), RangeError);
}

TEST(Volume, MaskRoundTrip) {
  TempDir dir;
  std::mt19937_64 rng(4);
  const Roi3D roi = oracle::random_mask<Roi3D>(rng, Dims3{5, 6, 7});
  save_ctm(roi, dir / "r.ctm");
  EXPECT_EQ(load_ctm(dir / "r.ctm"), roi);
  const auto bytes = oracle::read_bytes(dir / "r.ctm");
  ASSERT_EQ(bytes.size(), std::string("CTM1\n5 6 7 1 1 1\n").size() + 5 * 6 * 7);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 5), "CTM1\n");
}

TEST(FatMask, ZeroHuGivesEmptyMask) {
  const Dims3 d{4, 4, 4};
  const CtVolume v(d, {}, std::vector<std::int16_t>(d.count(), 0));
  Roi3D full(d);
  for (auto& b : full.bits()) b = 1;
  EXPECT_EQ(extract_fat_mask(v, full).popcount(), 0u);
}

TEST(FatMask, FatHuGivesFullMask) {
  const Dims3 d{4, 4, 4};
  const CtVolume v(d, {}, std::vector<std::int16_t>(d.count(), -100));
  Roi3D full(d);
  for (auto& b : full.bits()) b = 1;
  EXPECT_EQ(extract_fat_mask(v, full).popcount(), d.count());
}

TEST(FatMask, BoundsAreInclusive) {
  const Dims3 d{4, 1, 1};
  const CtVolume v(d, {}, std::vector<std::int16_t>{-191, -190, -30, -29});
  Roi3D full(d);
  for (auto& b : full.bits()) b = 1;
  const BinaryVolume m = extract_fat_mask(v, full);
  EXPECT_FALSE(m.at(0, 0, 0));
  EXPECT_TRUE(m.at(1, 0, 0));
  EXPECT_TRUE(m.at(2, 0, 0));
  EXPECT_FALSE(m.at(3, 0, 0));
}

TEST(FatMask, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const Dims3 d{16, 16, 16};
    const CtVolume v = oracle::random_volume(rng, d, -300, 100);
    const Roi3D roi = oracle::random_mask<Roi3D>(rng, d, 0.5);
    EXPECT_EQ(extract_fat_mask(v, roi), oracle::fat_mask(v, roi));
  }
}

TEST(FatMask, DimsMismatchIsShapeError) {
  const CtVolume v(Dims3{2, 2, 2}, {}, std::vector<std::int16_t>(8, 0));
  EXPECT_THROW(extract_fat_mask(v, Roi3D(Dims3{2, 2, 3})), ShapeError);
}

TEST(FatMaskProperty, MonotoneInWindowAndSubsetOfRoi) {
  std::mt19937_64 rng(6);
  const Dims3 d{12, 10, 8};
  Roi3D full(d);
  for (auto& b : full.bits()) b = 1;
  for (int trial = 0; trial < 20; ++trial) {
    const CtVolume v = oracle::random_volume(rng, d, -400, 200);
    const Roi3D roi = oracle::random_mask<Roi3D>(rng, d, 0.4);
    std::uniform_int_distribution<int> lo(-400, -100), width(0, 200), grow(0, 60);
    const HuRange narrow{lo(rng), 0};
    const HuRange n2{narrow.lo, narrow.lo + width(rng)};
    const HuRange wide{n2.lo - grow(rng), n2.hi + grow(rng)};
    const BinaryVolume a = extract_fat_mask(v, roi, n2);
    const BinaryVolume b = extract_fat_mask(v, roi, wide);
    const BinaryVolume unmasked = extract_fat_mask(v, full, n2);
    for (std::size_t i = 0; i < d.count(); ++i) {
      EXPECT_LE(a.bits()[i], b.bits()[i]);
      EXPECT_LE(a.bits()[i], roi.bits()[i]);
      EXPECT_EQ(a.bits()[i], unmasked.bits()[i] & roi.bits()[i]);
    }
  }
}
