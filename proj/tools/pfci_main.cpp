// pfci: phantom generation, projection, training, inference and evaluation of the
// pericardial fat count image pipeline.

#include <cstdio>
#include <fstream>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <string>

#include <CLI11.hpp>

#include "pfci/checkpoint.hpp"
#include "pfci/errors.hpp"
#include "pfci/models.hpp"
#include "pfci/phantom.hpp"
#include "pfci/pipeline.hpp"
#include "pfci/projection.hpp"
#include "pfci/run.hpp"
#include "pfci/volume.hpp"

namespace fs = std::filesystem;
using namespace pfci;

namespace {

/// Usage problems detected after parsing; reported like parse errors (exit 2).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  int jobs = 1;
  std::string out;
};

void require_out(const Globals& g) {
  if (g.out.empty()) throw UsageError("--out is required");
}

/// Config file (or desk defaults) with the command-line overrides applied.
RunConfig resolve_config(const Globals& g) {
  RunConfig cfg = desk_run_config();
  bool has_seed = false;
  if (!g.config.empty()) {
    if (!fs::exists(g.config)) throw IoError("config file not found: " + g.config);
    std::ifstream f(g.config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(f);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError(g.config + ": " + e.what());
    }
    try {
      cfg = run_config_from_json(j);
    } catch (const ParameterError& e) {
      throw UsageError(g.config + ": " + e.what());
    }
    has_seed = j.contains("seed");
  }
  if (g.seed) {
    cfg.pipeline.seed = *g.seed;
    cfg.corpus.seed = *g.seed;
  } else if (!has_seed && !g.deterministic) {
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    cfg.pipeline.seed = s;
    cfg.corpus.seed = s;
    std::cerr << "seed " << s << " (pass --seed to reproduce)\n";
  }
  if (g.deterministic) cfg.deterministic = true;
  cfg.pipeline.jobs = g.jobs;
  try {
    cfg.validate();
  } catch (const ParameterError& e) {
    throw UsageError(e.what());
  }
  return cfg;
}

void print_report(const RunOutcome& r) {
  std::printf("%-9s %-5s %12s %12s\n", "model", "metric", "mean", "sd");
  for (const auto& [model, s] : r.report.models) {
    std::printf("%-9s %-5s %12.6g %12.6g\n", model.c_str(), "ssim", s.ssim.mean, s.ssim.sd);
    std::printf("%-9s %-5s %12.6g %12.6g\n", model.c_str(), "mse", s.mse.mean, s.mse.sd);
    std::printf("%-9s %-5s %12.6g %12.6g\n", model.c_str(), "mae", s.mae.mean, s.mae.sd);
  }
  const auto& better = r.comparison["proposed_better"];
  std::printf("proposed better than control: ssim %s, mse %s, mae %s\n", better["ssim"].get<bool>() ? "yes" : "no",
              better["mse"].get<bool>() ? "yes" : "no", better["mae"].get<bool>() ? "yes" : "no");
}

// ---------------------------------------------------------------------------------------

struct PhantomArgs {
  int n = 0;
  int paired = 0;
  int size = 64;
};

int cmd_phantom(const Globals& g, const PhantomArgs& a) {
  require_out(g);
  if (a.n < 1) throw UsageError("--n must be >= 1");
  if (a.paired < 0 || a.paired > a.n) {
    throw UsageError("--paired (" + std::to_string(a.paired) + ") must lie in [0, --n] (--n is " +
                     std::to_string(a.n) + ")");
  }
  if (a.size < 16) throw UsageError("--size must be >= 16");
  PhantomParams params;
  params.dims = Dims3{a.size, a.size, a.size};
  const std::uint64_t seed = g.seed.value_or(0);
  const CorpusManifest m = generate_corpus(a.n, a.paired, seed, params, g.out, {}, g.jobs);
  std::cout << (fs::path(g.out) / "manifest.json").string() << "\n";
  (void)m;
  return 0;
}

struct ProjectArgs {
  std::string volume;
  std::string roi;
  bool cwrs = false;
  bool pfci = false;
  bool roi_proj = false;
  bool cxr = false;
  double alpha = 0.0018;
  double mu_water = 0.02;
};

int cmd_project(const Globals& g, ProjectArgs a) {
  require_out(g);
  if (!a.cwrs && !a.pfci && !a.roi_proj && !a.cxr) a.cwrs = true;
  if ((a.pfci || a.roi_proj) && a.roi.empty()) throw IoError("--pfci and --roi-proj need an ROI volume (--roi)");
  const CtVolume vol = load_ctv(a.volume);
  std::optional<Roi3D> roi;
  if (!a.roi.empty()) roi = load_ctm(a.roi);
  fs::create_directories(g.out);
  const fs::path out(g.out);
  if (a.cwrs) {
    ProjectionParams p;
    p.alpha = a.alpha;
    p.jobs = g.jobs;
    save_pfm(cwrs(vol, p), out / "cwrs.pfm");
  }
  if (a.pfci) save_pfm(pfci_gt(extract_fat_mask(vol, *roi), g.jobs), out / "pfci.pfm");
  if (a.roi_proj) save_pgm(roi_coronal_projection(*roi), out / "roi.pgm");
  if (a.cxr) {
    AttenuationParams att;
    att.mu_water = a.mu_water;
    save_pfm(pseudo_cxr(vol, att, g.jobs), out / "cxr.pfm");
  }
  return 0;
}

struct TrainArgs {
  std::string stage;
  std::string manifest;
  int fold = -1;
  std::optional<int> epochs;
};

int cmd_train(const Globals& g, const TrainArgs& a) {
  require_out(g);
  RunConfig cfg = resolve_config(g);
  Stage stage;
  if (a.stage == "cyclegan") {
    stage = Stage::Translation;
  } else if (a.stage == "unet") {
    stage = Stage::Segmentation;
  } else if (a.stage == "pix2pix") {
    stage = Stage::CountImage;
  } else {
    stage = Stage::Control;
  }
  auto& p = cfg.pipeline;
  if (a.epochs) {
    if (*a.epochs < 0) throw UsageError("--epochs must be >= 0");
    for (StageConfig* s : {&p.cyclegan, &p.unet, &p.pix2pix, &p.control}) s->train.epochs = *a.epochs;
  }
  const CorpusManifest m = load_manifest(a.manifest);
  ProjectionParams proj = p.projection;
  const CaseTable cases = derive_all(m, proj, g.jobs);

  std::vector<int> train, val;
  nlohmann::json meta;
  const int stage_idx = static_cast<int>(stage);
  std::uint64_t seed = fold_train_seed(p, stage_idx, 0);
  if (a.fold >= 0) {
    const bool control = stage == Stage::Control;
    const int k = control ? p.cv.control_folds : p.cv.outer_folds;
    if (a.fold >= k) throw UsageError("--fold must be < " + std::to_string(k));
    const FoldAssignment fa = assign_folds(m.paired_ids(), m.ct_only_ids(), k, derive_seed(p.seed, control ? 12 : 11),
                                           control ? 0.0 : p.cv.inner_validation_fraction);
    const auto& f = fa.folds[static_cast<std::size_t>(a.fold)];
    train = control ? f.train : f.inner_train;
    if (!control) val = f.validation;
    meta = fold_meta(a.fold, f.train, train, val);
    seed = fold_train_seed(p, stage_idx, a.fold);
  } else {
    for (const auto& c : m.cases) train.push_back(c.case_id);
    meta = fold_meta(-1, train, train, {});
  }
  TrainResult r = train_stage(stage, cases, train, val, p, seed);
  r.checkpoint.meta.update(meta);
  fs::create_directories(g.out);
  const fs::path ck = fs::path(g.out) / (a.stage + ".nnck");
  save_checkpoint(ck.string(), r.checkpoint);
  r.log.write_csv(fs::path(g.out) / (a.stage + "_loss.csv"));
  std::cout << ck.string() << "\n";
  return 0;
}

struct InferArgs {
  std::string input;
  std::string output;
  std::string checkpoint;
  std::string fold_dir;
  std::string direction = "a2b";
};

int cmd_infer(const Globals&, const InferArgs& a) {
  if (a.checkpoint.empty() == a.fold_dir.empty()) throw UsageError("give exactly one of --checkpoint or --fold-dir");
  const FloatImage img = load_pfm(a.input);
  if (!a.fold_dir.empty()) {
    const fs::path d(a.fold_dir);
    PipelineCheckpoints ck{load_checkpoint((d / "stage1.nnck").string()), load_checkpoint((d / "stage2.nnck").string()),
                           load_checkpoint((d / "stage3.nnck").string())};
    save_pfm(run_proposed(img, ck), a.output);
    return 0;
  }
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  if (ck.stage == "cyclegan") {
    const CycleGanModel model(ck);
    const Direction dir = a.direction == "b2a" ? Direction::BtoA : Direction::AtoB;
    save_pfm(pm1_to_unit(model.translate(prepare_image(img, model.input_size()), dir)), a.output);
  } else if (ck.stage == "unet") {
    const UNetModel model(ck);
    save_pgm(model.segment(prepare_image(img, model.input_size())), a.output);
  } else if (ck.stage == "pix2pix") {
    const Pix2PixModel model(ck);
    save_pfm(pm1_to_unit(model.translate(prepare_image(img, model.input_size()))), a.output);
  } else {
    throw FormatError("checkpoint stage '" + ck.stage + "' is not recognised");
  }
  return 0;
}

int cmd_eval(const Globals& g, const std::string& run) {
  const std::string dir = run.empty() ? g.out : run;
  if (dir.empty()) throw UsageError("--run (or --out) is required");
  if (!fs::exists(fs::path(dir) / "run_config.json")) {
    throw IoError("incomplete run directory " + dir + ": missing run_config.json");
  }
  const RunOutcome r = evaluate_run(dir);
  print_report(r);
  return 0;
}

int cmd_run_all(const Globals& g, bool resume) {
  require_out(g);
  const RunConfig cfg = resolve_config(g);
  RunOptions opts;
  opts.resume = resume;
  opts.log = [](const std::string& m) { std::cerr << m << "\n"; };
  const RunOutcome r = run_all(cfg, g.out, opts);
  print_report(r);
  std::cout << "results in " << (fs::path(g.out) / "eval").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pericardial fat count images from chest radiographs: phantoms, projections, training, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config, "Run configuration (JSON)");
  app.add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& s) { g.seed = s; }, "Run seed");
  app.add_flag("--deterministic", g.deterministic, "Never draw an unrecorded seed");
  app.add_option("--jobs", g.jobs, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "Output directory");

  std::function<int()> action;

  PhantomArgs pa;
  auto* ph = app.add_subcommand("phantom", "Generate a seeded phantom corpus");
  ph->add_option("--n", pa.n, "Number of cases")->required();
  ph->add_option("--paired", pa.paired, "Cases that also get a radiograph");
  ph->add_option("--size", pa.size, "Grid side in voxels");
  ph->callback([&] { action = [&] { return cmd_phantom(g, pa); }; });

  ProjectArgs pr;
  auto* pj = app.add_subcommand("project", "Project a CT volume into coronal images");
  pj->add_option("--volume", pr.volume, "CTV1 volume")->required();
  pj->add_option("--roi", pr.roi, "CTM1 pericardial ROI");
  pj->add_flag("--cwrs", pr.cwrs, "Write cwrs.pfm (default when no output is selected)");
  pj->add_flag("--pfci", pr.pfci, "Write pfci.pfm (needs --roi)");
  pj->add_flag("--roi-proj", pr.roi_proj, "Write roi.pgm (needs --roi)");
  pj->add_flag("--cxr", pr.cxr, "Write cxr.pfm");
  pj->add_option("--alpha", pr.alpha, "Ray-sum attenuation slope");
  pj->add_option("--mu-water", pr.mu_water, "Water attenuation for the radiograph, 1/mm");
  pj->callback([&] { action = [&] { return cmd_project(g, pr); }; });

  TrainArgs ta;
  auto* tr = app.add_subcommand("train", "Train one stage on a corpus");
  tr->add_option("--stage", ta.stage, "Stage to train")
      ->required()
      ->check(CLI::IsMember({"cyclegan", "unet", "pix2pix", "control"}));
  tr->add_option("--manifest", ta.manifest, "Corpus manifest")->required();
  tr->add_option("--fold", ta.fold, "Train on this fold's training partition only");
  tr->add_option_function<int>("--epochs", [&](const int& e) { ta.epochs = e; }, "Override the epoch count");
  tr->callback([&] { action = [&] { return cmd_train(g, ta); }; });

  InferArgs ia;
  auto* in = app.add_subcommand("infer", "Run a trained model or a fold's full pipeline on one image");
  in->add_option("--input", ia.input, "Input PFM")->required();
  in->add_option("--output", ia.output, "Output PFM (PGM for a segmentation checkpoint)")->required();
  in->add_option("--checkpoint", ia.checkpoint, "Single-stage checkpoint");
  in->add_option("--fold-dir", ia.fold_dir, "Directory holding stage1/2/3.nnck");
  in->add_option("--direction", ia.direction, "Translation direction")->check(CLI::IsMember({"a2b", "b2a"}));
  in->callback([&] { action = [&] { return cmd_infer(g, ia); }; });

  std::string run_dir;
  auto* ev = app.add_subcommand("eval", "Evaluate a completed run directory");
  ev->add_option("--run", run_dir, "Run directory (defaults to --out)");
  ev->callback([&] { action = [&] { return cmd_eval(g, run_dir); }; });

  bool resume = false;
  auto* ra = app.add_subcommand("run-all", "Phantoms, projections, cross-validated training, evaluation");
  ra->add_flag("--resume", resume, "Reuse completed (fold, stage) checkpoints");
  ra->callback([&] { action = [&] { return cmd_run_all(g, resume); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\nRun with --help for usage.\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
