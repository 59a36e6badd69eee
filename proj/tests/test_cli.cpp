#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "pfci/checkpoint.hpp"
#include "pfci/image.hpp"
#include "pfci/models.hpp"
#include "pfci/phantom.hpp"
#include "pfci/projection.hpp"
#include "pfci/volume.hpp"
#include "tmpdir.hpp"

using namespace pfci;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

// Runs the tool with stderr discarded and returns its exit code and stdout.
Outcome pfci_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + PFCI_EXE + "\" " + args + " 2>/dev/null";
  Outcome r;
  FILE* p = ::popen(cmd.c_str(), "r");
  if (!p) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

FloatImage to_f32(const FloatImage& img) {
  std::vector<double> px(img.pixels().begin(), img.pixels().end());
  for (auto& v : px) v = static_cast<float>(v);
  return FloatImage(img.width(), img.height(), std::move(px));
}

const std::string kTiny = q(fs::path(PFCI_TEST_DATA_DIR) / "tiny_run.json");

}  // namespace

TEST(Cli, UsageErrorsExitTwo) {
  TempDir d;
  EXPECT_EQ(pfci_cli("").code, 2);
  EXPECT_EQ(pfci_cli("frobnicate").code, 2);
  EXPECT_EQ(pfci_cli("phantom --out " + q(d.path())).code, 2);
  EXPECT_EQ(pfci_cli("phantom --n 5 --paired 9 --out " + q(d.path())).code, 2);
  EXPECT_EQ(pfci_cli("phantom --n 2 --out " + q(d.path()) + " --jobs 0").code, 2);
  EXPECT_EQ(pfci_cli("train --stage gan --manifest x.json --out " + q(d.path())).code, 2);
  EXPECT_EQ(pfci_cli("--help").code, 0);
}

TEST(Cli, PhantomIsReproducible) {
  TempDir a, b;
  const Outcome r = pfci_cli("--seed 4 phantom --n 3 --paired 2 --size 32 --out " + q(a.path()));
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("manifest.json"), std::string::npos);
  ASSERT_EQ(pfci_cli("--seed 4 --jobs 2 phantom --n 3 --paired 2 --size 32 --out " + q(b.path())).code, 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(a.path())) {
    EXPECT_EQ(slurp(e.path()), slurp(b.path() / e.path().filename())) << e.path();
    ++files;
  }
  EXPECT_EQ(files, 3u * 2 + 2 + 1);
  EXPECT_EQ(load_ctv(a.path() / "case_0001.ctv"), generate_phantom(case_seed(4, 1), [] {
              PhantomParams p;
              p.dims = {32, 32, 32};
              return p;
            }()).volume);
}

TEST(Cli, ProjectMatchesLibrary) {
  TempDir d;
  ASSERT_EQ(pfci_cli("--seed 2 phantom --n 1 --paired 1 --size 24 --out " + q(d.path())).code, 0);
  const fs::path out = d.path() / "proj";
  ASSERT_EQ(pfci_cli("project --volume " + q(d.path() / "case_0000.ctv") + " --roi " + q(d.path() / "case_0000.ctm") +
                     " --cwrs --pfci --roi-proj --cxr --out " + q(out))
                .code,
            0);
  const CtVolume vol = load_ctv(d.path() / "case_0000.ctv");
  const Roi3D roi = load_ctm(d.path() / "case_0000.ctm");
  EXPECT_EQ(load_pfm(out / "cwrs.pfm"), to_f32(cwrs(vol)));
  EXPECT_EQ(load_pfm(out / "pfci.pfm"), to_f32(pfci_gt(extract_fat_mask(vol, roi))));
  EXPECT_EQ(load_pgm(out / "roi.pgm"), roi_coronal_projection(roi));
  EXPECT_EQ(slurp(out / "cxr.pfm"), slurp(d.path() / "case_0000_cxr.pfm"));

  EXPECT_EQ(pfci_cli("project --volume " + q(d.path() / "case_0000.ctv") + " --pfci --out " + q(out)).code, 1);
  EXPECT_EQ(pfci_cli("project --volume " + q(d.path() / "missing.ctv") + " --out " + q(out)).code, 1);
}

TEST(Cli, TrainZeroEpochsWritesInitAndRerunsAreIdentical) {
  TempDir d;
  ASSERT_EQ(pfci_cli("--seed 1 phantom --n 4 --paired 3 --size 32 --out " + q(d.path() / "c")).code, 0);
  const std::string manifest = q(d.path() / "c" / "manifest.json");
  const std::string common = "--config " + kTiny + " --deterministic train --stage unet --manifest " + manifest;
  ASSERT_EQ(pfci_cli(common + " --epochs 0 --out " + q(d.path() / "z")).code, 0);
  const Checkpoint z = load_checkpoint((d.path() / "z" / "unet.nnck").string());
  EXPECT_EQ(z.epochs, 0);
  EXPECT_EQ(z.tensors, init_unet_checkpoint(z.net, z.train, z.weights).tensors);
  EXPECT_EQ(slurp(d.path() / "z" / "unet_loss.csv"), "epoch,term,value\n");

  ASSERT_EQ(pfci_cli(common + " --fold 1 --out " + q(d.path() / "r1")).code, 0);
  ASSERT_EQ(pfci_cli(common + " --fold 1 --out " + q(d.path() / "r2")).code, 0);
  EXPECT_EQ(slurp(d.path() / "r1" / "unet.nnck"), slurp(d.path() / "r2" / "unet.nnck"));
  EXPECT_EQ(slurp(d.path() / "r1" / "unet_loss.csv"), slurp(d.path() / "r2" / "unet_loss.csv"));
  EXPECT_EQ(load_checkpoint((d.path() / "r1" / "unet.nnck").string()).meta.at("fold"), 1);
}

TEST(Cli, RunAllEvalAndInfer) {
  TempDir d;
  const std::string out = q(d.path());
  const Outcome r = pfci_cli("--config " + kTiny + " --deterministic run-all --out " + out);
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("proposed better than control"), std::string::npos);
  const std::string summary = slurp(d.path() / "eval" / "summary.csv");
  EXPECT_EQ(std::count(summary.begin(), summary.end(), '\n'), 7);

  fs::remove(d.path() / "eval" / "summary.csv");
  ASSERT_EQ(pfci_cli("eval --run " + out).code, 0);
  EXPECT_EQ(slurp(d.path() / "eval" / "summary.csv"), summary);

  const fs::path cxr = d.path() / "corpus" / "case_0000_cxr.pfm";
  ASSERT_EQ(pfci_cli("infer --input " + q(cxr) + " --fold-dir " + q(d.path() / "fold_0") + " --output " +
                     q(d.path() / "p.pfm"))
                .code,
            0);
  const FloatImage p = load_pfm(d.path() / "p.pfm");
  EXPECT_EQ(p.width(), 16);
  for (double v : p.pixels()) EXPECT_TRUE(v >= 0.0 && v <= 1.0);
  EXPECT_EQ(pfci_cli("infer --input " + q(cxr) + " --output " + q(d.path() / "x.pfm")).code, 2);

  ASSERT_EQ(pfci_cli("--config " + kTiny + " --deterministic run-all --resume --out " + out).code, 0);
  EXPECT_EQ(slurp(d.path() / "eval" / "summary.csv"), summary);
  EXPECT_EQ(pfci_cli("--config " + kTiny + " --seed 77 run-all --resume --out " + out).code, 1);

  Checkpoint ck = load_checkpoint((d.path() / "fold_1" / "stage3.nnck").string());
  const auto test = nlohmann::json::parse(slurp(d.path() / "fold_1" / "leakage_audit.json")).at("test_case_ids");
  ck.meta["validation_case_ids"].push_back(test[0]);
  save_checkpoint((d.path() / "fold_1" / "stage3.nnck").string(), ck);
  EXPECT_EQ(pfci_cli("--config " + kTiny + " --deterministic run-all --resume --out " + out).code, 1);
}

TEST(Cli, EvalOnIncompleteRunFails) {
  TempDir d;
  EXPECT_EQ(pfci_cli("eval --run " + q(d.path())).code, 1);
}
