#include <gtest/gtest.h>

#include <filesystem>

#include "oracles.hpp"
#include "pfci/errors.hpp"
#include "pfci/phantom.hpp"
#include "pfci/projection.hpp"
#include "tmpdir.hpp"

using namespace pfci;
namespace fs = std::filesystem;

namespace {

PhantomParams small(int n = 32) {
  PhantomParams p;
  p.dims = Dims3{n, n, n};
  return p;
}

}  // namespace

TEST(Phantom, DeterministicInSeedAndParams) {
  const Phantom a = generate_phantom(7, small());
  const Phantom b = generate_phantom(7, small());
  EXPECT_EQ(a.volume, b.volume);
  EXPECT_EQ(a.roi, b.roi);
  EXPECT_EQ(a.spec.fat_table, b.spec.fat_table);
  EXPECT_NE(generate_phantom(8, small()).volume, a.volume);
}

TEST(Phantom, ZeroThicknessShellHasNoFat) {
  PhantomParams p = small();
  p.fat_thickness = {0.0, 0.0};
  const Phantom ph = generate_phantom(3, p);
  for (const auto r = pfci_gt(extract_fat_mask(ph.volume, ph.roi)); double v : r.pixels()) EXPECT_EQ(v, 0.0);
}

TEST(Phantom, Seed7AnalyticTableMatchesExtractedMask) {
  const Phantom ph = generate_phantom(7, PhantomParams{});
  const FloatImage counted = pfci_gt(extract_fat_mask(ph.volume, ph.roi));
  EXPECT_EQ(counted, ph.spec.fat_image());
}

TEST(Phantom, AnalyticTableMatchesDenseRasterization) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Phantom ph = generate_phantom(seed, small(40));
    EXPECT_EQ(ph.spec.fat_table, oracle::rasterized_fat(ph.spec)) << "seed " << seed;
  }
}

TEST(PhantomProperty, FatInsideRoiAndBackgroundExcluded) {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    const Phantom ph = generate_phantom(seed, small());
    const BinaryVolume fat = extract_fat_mask(ph.volume, ph.roi);
    EXPECT_GT(fat.popcount(), 0u);
    for (std::size_t i = 0; i < fat.bits().size(); ++i) EXPECT_LE(fat.bits()[i], ph.roi.bits()[i]);
    // Dropping every background voxel to another excluded value leaves the ray sum unchanged.
    std::vector<std::int16_t> hu(ph.volume.voxels().begin(), ph.volume.voxels().end());
    for (auto& h : hu)
      if (h < -1000) h = -3000;
    EXPECT_EQ(cwrs(CtVolume(ph.volume.dims(), ph.volume.spacing(), hu)), cwrs(ph.volume));
    for (int c : ph.spec.fat_table) {
      EXPECT_GE(c, 0);
      EXPECT_LE(c, ph.volume.dims().ny);
    }
  }
}

TEST(Phantom, InvalidParamsRejected) {
  PhantomParams p = small();
  p.fat_hu = 0;
  EXPECT_THROW(generate_phantom(1, p), ParameterError);
  p = small();
  p.background_hu = -1000;
  EXPECT_THROW(generate_phantom(1, p), ParameterError);
  p = small();
  p.heart_x = {0.95, 0.99};
  p.fat_thickness = {4, 4};
  EXPECT_THROW(generate_phantom(1, p), ParameterError);
}

TEST(Corpus, WritesPairedSubsetAndManifest) {
  TempDir dir;
  const CorpusManifest m = generate_corpus(5, 3, 9, small(), dir.path());
  ASSERT_EQ(m.cases.size(), 5u);
  int cxr = 0;
  for (const auto& e : fs::directory_iterator(dir.path()))
    if (e.path().string().ends_with("_cxr.pfm")) ++cxr;
  EXPECT_EQ(cxr, 3);
  EXPECT_EQ(m.paired_ids(), (std::vector<int>{0, 1, 2}));
  EXPECT_EQ(m.ct_only_ids(), (std::vector<int>{3, 4}));
  EXPECT_TRUE(fs::exists(dir / "case_0004.ctv"));
  EXPECT_TRUE(fs::exists(dir / "case_0004.ctm"));
  const CorpusManifest back = load_manifest(dir / "manifest.json");
  EXPECT_EQ(back.cases.size(), 5u);
  EXPECT_EQ(back.find(2).cxr, "case_0002_cxr.pfm");
}

TEST(Corpus, EmptyCorpusHasNoCaseFiles) {
  TempDir dir;
  const CorpusManifest m = generate_corpus(0, 0, 1, small(), dir.path());
  EXPECT_TRUE(m.cases.empty());
  for (const auto& e : fs::directory_iterator(dir.path())) EXPECT_EQ(e.path().filename(), "manifest.json");
}

TEST(Corpus, RegenerationIsByteIdentical) {
  TempDir a, b;
  generate_corpus(4, 2, 11, small(), a.path());
  generate_corpus(4, 2, 11, small(), b.path(), {}, 3);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a.path())) {
    ++files;
    EXPECT_EQ(oracle::read_bytes(e.path()), oracle::read_bytes(b.path() / e.path().filename()))
        << e.path().filename();
  }
  EXPECT_EQ(files, 4u * 2 + 2 + 1);
}

TEST(Corpus, PairedAboveTotalRejected) {
  TempDir dir;
  EXPECT_THROW(generate_corpus(2, 3, 1, small(), dir.path()), ParameterError);
}

TEST(Corpus, ManifestWithMissingFileIsIoError) {
  TempDir dir;
  generate_corpus(2, 1, 1, small(), dir.path());
  fs::remove(dir / "case_0001.ctm");
  EXPECT_THROW(load_manifest(dir / "manifest.json"), IoError);
}
