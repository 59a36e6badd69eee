#include "pfci/run.hpp"

#include <fstream>
#include <initializer_list>
#include <set>

namespace pfci {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ParameterError(where + " must be a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ParameterError("unknown key '" + k + "' in " + where);
  }
}

template <class T>
void read(const json& j, const char* key, T& dst, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    dst = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ParameterError("bad value for '" + std::string(key) + "' in " + where);
  }
}

json interval_json(const Interval& i) { return json::array({i.lo, i.hi}); }

void read_interval(const json& j, const char* key, Interval& dst, const std::string& where) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number()) {
    throw ParameterError("'" + std::string(key) + "' in " + where + " must be [lo, hi]");
  }
  dst = Interval{v[0].get<double>(), v[1].get<double>()};
}

json phantom_json(const PhantomParams& p) {
  return {{"dims", {p.dims.nx, p.dims.ny, p.dims.nz}},
          {"spacing", {p.spacing.x, p.spacing.y, p.spacing.z}},
          {"thorax_x", interval_json(p.thorax_x)},
          {"thorax_y", interval_json(p.thorax_y)},
          {"thorax_z", interval_json(p.thorax_z)},
          {"heart_x", interval_json(p.heart_x)},
          {"heart_y", interval_json(p.heart_y)},
          {"heart_z", interval_json(p.heart_z)},
          {"heart_shift_x", interval_json(p.heart_shift_x)},
          {"heart_shift_y", interval_json(p.heart_shift_y)},
          {"heart_shift_z", interval_json(p.heart_shift_z)},
          {"fat_thickness", interval_json(p.fat_thickness)},
          {"lung_hu", p.lung_hu},
          {"soft_tissue_hu", p.soft_tissue_hu},
          {"fat_hu", p.fat_hu},
          {"spine_hu", p.spine_hu},
          {"background_hu", p.background_hu},
          {"noise_sd", p.noise_sd}};
}

void read_phantom(const json& j, PhantomParams& p) {
  const std::string where = "corpus.phantom";
  check_keys(j, {"dims", "spacing", "thorax_x", "thorax_y", "thorax_z", "heart_x", "heart_y", "heart_z",
                 "heart_shift_x", "heart_shift_y", "heart_shift_z", "fat_thickness", "lung_hu", "soft_tissue_hu",
                 "fat_hu", "spine_hu", "background_hu", "noise_sd"},
             where);
  if (j.contains("dims")) {
    std::vector<int> d;
    read(j, "dims", d, where);
    if (d.size() != 3) throw ParameterError("corpus.phantom.dims must hold three extents");
    p.dims = Dims3{d[0], d[1], d[2]};
  }
  if (j.contains("spacing")) {
    std::vector<double> s;
    read(j, "spacing", s, where);
    if (s.size() != 3) throw ParameterError("corpus.phantom.spacing must hold three values");
    p.spacing = Spacing3{s[0], s[1], s[2]};
  }
  read_interval(j, "thorax_x", p.thorax_x, where);
  read_interval(j, "thorax_y", p.thorax_y, where);
  read_interval(j, "thorax_z", p.thorax_z, where);
  read_interval(j, "heart_x", p.heart_x, where);
  read_interval(j, "heart_y", p.heart_y, where);
  read_interval(j, "heart_z", p.heart_z, where);
  read_interval(j, "heart_shift_x", p.heart_shift_x, where);
  read_interval(j, "heart_shift_y", p.heart_shift_y, where);
  read_interval(j, "heart_shift_z", p.heart_shift_z, where);
  read_interval(j, "fat_thickness", p.fat_thickness, where);
  read(j, "lung_hu", p.lung_hu, where);
  read(j, "soft_tissue_hu", p.soft_tissue_hu, where);
  read(j, "fat_hu", p.fat_hu, where);
  read(j, "spine_hu", p.spine_hu, where);
  read(j, "background_hu", p.background_hu, where);
  read(j, "noise_sd", p.noise_sd, where);
}

void read_stage(const json& j, StageConfig& s, const std::string& where) {
  check_keys(j, {"net", "train"}, where);
  if (j.contains("net")) {
    check_keys(j["net"], {"input_size", "in_channels", "out_channels", "depth", "base_width", "max_width_mult",
                          "disc_receptive_field", "disc_base_width"},
               where + ".net");
    s.net = j["net"].get<NetConfig>();
  }
  if (j.contains("train")) {
    check_keys(j["train"], {"learning_rate", "beta1", "beta2", "epochs", "batch_size", "seed", "deterministic"},
               where + ".train");
    TrainConfig t = s.train;
    from_json(j["train"], t);
    s.train = t;
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("short write to " + path.string());
}

json read_json_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("missing " + path.string());
  try {
    return json::parse(f);
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace

void RunConfig::validate() const {
  if (preset != "desk" && preset != "paper") throw ParameterError("preset must be 'desk' or 'paper'");
  if (corpus.cases < 1) throw ParameterError("corpus.cases must be >= 1");
  if (corpus.paired < 0 || corpus.paired > corpus.cases) {
    throw ParameterError("corpus.paired must lie in [0, corpus.cases]");
  }
  if (corpus.paired < pipeline.cv.outer_folds || corpus.paired < pipeline.cv.control_folds) {
    throw ParameterError("corpus.paired must be at least the number of folds");
  }
  corpus.phantom.validate();
  if (!(corpus.attenuation.mu_air >= 0 && corpus.attenuation.mu_air < corpus.attenuation.mu_water)) {
    throw ParameterError("attenuation requires 0 <= mu_air < mu_water");
  }
  pipeline.validate();
}

RunConfig desk_run_config() {
  RunConfig c;
  c.preset = "desk";
  c.pipeline = desk_pipeline_config();
  return c;
}

RunConfig paper_run_config() {
  RunConfig c;
  c.preset = "paper";
  c.corpus.cases = 191;
  c.corpus.paired = 110;
  c.pipeline = paper_pipeline_config();
  return c;
}

json run_config_to_json(const RunConfig& c) {
  const auto& p = c.pipeline;
  auto stage = [](const StageConfig& s) { return json{{"net", s.net}, {"train", s.train}}; };
  return {{"preset", c.preset},
          {"seed", p.seed},
          {"deterministic", c.deterministic},
          {"jobs", p.jobs},
          {"corpus",
           {{"cases", c.corpus.cases},
            {"paired", c.corpus.paired},
            {"seed", c.corpus.seed},
            {"phantom", phantom_json(c.corpus.phantom)},
            {"attenuation", {{"mu_air", c.corpus.attenuation.mu_air}, {"mu_water", c.corpus.attenuation.mu_water}}}}},
          {"projection", {{"alpha", p.projection.alpha}, {"exclude_below", p.projection.exclude_below}}},
          {"stages",
           {{"cyclegan", stage(p.cyclegan)},
            {"unet", stage(p.unet)},
            {"pix2pix", stage(p.pix2pix)},
            {"control", stage(p.control)}}},
          {"loss_weights", p.weights},
          {"cv",
           {{"outer_folds", p.cv.outer_folds},
            {"inner_validation_fraction", p.cv.inner_validation_fraction},
            {"control_folds", p.cv.control_folds}}},
          {"evaluation",
           {{"shared_normalization", p.eval.shared_normalization}, {"windowed_ssim", p.eval.windowed_ssim}}}};
}

RunConfig run_config_from_json(const json& j) {
  check_keys(j, {"preset", "seed", "deterministic", "jobs", "corpus", "projection", "stages", "loss_weights", "cv",
                 "evaluation"},
             "run config");
  std::string preset = "desk";
  read(j, "preset", preset, "run config");
  RunConfig c;
  if (preset == "desk") {
    c = desk_run_config();
  } else if (preset == "paper") {
    c = paper_run_config();
  } else {
    throw ParameterError("preset must be 'desk' or 'paper'");
  }
  auto& p = c.pipeline;
  read(j, "seed", p.seed, "run config");
  read(j, "deterministic", c.deterministic, "run config");
  read(j, "jobs", p.jobs, "run config");
  if (j.contains("corpus")) {
    const auto& cj = j["corpus"];
    check_keys(cj, {"cases", "paired", "seed", "phantom", "attenuation"}, "corpus");
    read(cj, "cases", c.corpus.cases, "corpus");
    read(cj, "paired", c.corpus.paired, "corpus");
    read(cj, "seed", c.corpus.seed, "corpus");
    if (cj.contains("phantom")) read_phantom(cj["phantom"], c.corpus.phantom);
    if (cj.contains("attenuation")) {
      check_keys(cj["attenuation"], {"mu_air", "mu_water"}, "corpus.attenuation");
      read(cj["attenuation"], "mu_air", c.corpus.attenuation.mu_air, "corpus.attenuation");
      read(cj["attenuation"], "mu_water", c.corpus.attenuation.mu_water, "corpus.attenuation");
    }
  }
  if (j.contains("projection")) {
    check_keys(j["projection"], {"alpha", "exclude_below"}, "projection");
    read(j["projection"], "alpha", p.projection.alpha, "projection");
    read(j["projection"], "exclude_below", p.projection.exclude_below, "projection");
  }
  if (j.contains("stages")) {
    const auto& sj = j["stages"];
    check_keys(sj, {"cyclegan", "unet", "pix2pix", "control"}, "stages");
    if (sj.contains("cyclegan")) read_stage(sj["cyclegan"], p.cyclegan, "stages.cyclegan");
    if (sj.contains("unet")) read_stage(sj["unet"], p.unet, "stages.unet");
    if (sj.contains("pix2pix")) read_stage(sj["pix2pix"], p.pix2pix, "stages.pix2pix");
    if (sj.contains("control")) read_stage(sj["control"], p.control, "stages.control");
  }
  if (j.contains("loss_weights")) {
    check_keys(j["loss_weights"], {"cycle", "gan", "l1", "bce", "dice"}, "loss_weights");
    from_json(j["loss_weights"], p.weights);
  }
  if (j.contains("cv")) {
    check_keys(j["cv"], {"outer_folds", "inner_validation_fraction", "control_folds"}, "cv");
    read(j["cv"], "outer_folds", p.cv.outer_folds, "cv");
    read(j["cv"], "inner_validation_fraction", p.cv.inner_validation_fraction, "cv");
    read(j["cv"], "control_folds", p.cv.control_folds, "cv");
  }
  if (j.contains("evaluation")) {
    check_keys(j["evaluation"], {"shared_normalization", "windowed_ssim"}, "evaluation");
    read(j["evaluation"], "shared_normalization", p.eval.shared_normalization, "evaluation");
    read(j["evaluation"], "windowed_ssim", p.eval.windowed_ssim, "evaluation");
  }
  c.preset = preset;
  return c;
}

RunConfig load_run_config(const fs::path& path) {
  try {
    return run_config_from_json(read_json_file(path));
  } catch (const FormatError& e) {
    throw ParameterError(e.what());
  }
}

// ---------------------------------------------------------------------------------------

namespace {

void write_evaluation(const RunLayout& layout, const MetricsReport& report, const json& comparison) {
  fs::create_directories(layout.eval());
  write_per_case_csv(report, layout.eval() / "per_case.csv");
  write_summary_csv(report, layout.eval() / "summary.csv");
  write_text(layout.eval() / "comparison.json", comparison.dump(2) + "\n");
}

}  // namespace

RunOutcome run_all(const RunConfig& cfg, const fs::path& out, const RunOptions& opts) {
  cfg.validate();
  const RunLayout layout{out};
  fs::create_directories(out);
  auto log = [&](const std::string& m) {
    if (opts.log) opts.log(m);
  };

  const auto& p = cfg.pipeline;
  std::vector<int> paired, ct_only;
  for (int id = 0; id < cfg.corpus.cases; ++id) (id < cfg.corpus.paired ? paired : ct_only).push_back(id);
  const FoldAssignment outer =
      assign_folds(paired, ct_only, p.cv.outer_folds, derive_seed(p.seed, 11), p.cv.inner_validation_fraction);
  const FoldAssignment control = assign_folds(paired, ct_only, p.cv.control_folds, derive_seed(p.seed, 12), 0.0);

  const json echo{{"config", run_config_to_json(cfg)},
                  {"folds", outer.to_json()},
                  {"control_folds", control.to_json()}};
  if (opts.resume && fs::exists(layout.config())) {
    if (read_json_file(layout.config()) != echo) {
      throw PipelineError("resume", "configuration differs from the one recorded in " + layout.config().string());
    }
  } else {
    write_text(layout.config(), echo.dump(2) + "\n");
  }

  CorpusManifest manifest;
  if (opts.resume && fs::exists(layout.manifest())) {
    manifest = load_manifest(layout.manifest());
    log("corpus reused from " + layout.manifest().string());
  } else {
    try {
      manifest = generate_corpus(cfg.corpus.cases, cfg.corpus.paired, cfg.corpus.seed, cfg.corpus.phantom,
                                 layout.corpus(), cfg.corpus.attenuation, p.jobs);
    } catch (const Error& e) {
      throw PipelineError("phantom", e.what());
    }
    log("corpus of " + std::to_string(manifest.cases.size()) + " cases written to " + layout.corpus().string());
  }
  if (manifest.paired_ids() != paired) throw PipelineError("phantom", "corpus pairing does not match the configuration");

  CaseTable cases;
  try {
    ProjectionParams proj = p.projection;
    proj.jobs = 1;
    cases = derive_all(manifest, proj, p.jobs);
    const fs::path pdir = out / "projections";
    fs::create_directories(pdir);
    for (const auto& [id, c] : cases) {
      char stem[32];
      std::snprintf(stem, sizeof stem, "case_%04d", id);
      save_pfm(c.cwrs, pdir / (std::string(stem) + "_cwrs.pfm"));
      save_pfm(c.pfci, pdir / (std::string(stem) + "_pfci.pfm"));
      save_pgm(c.roi, pdir / (std::string(stem) + "_roi.pgm"));
    }
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError("projection", e.what());
  }

  CvOptions cv{opts.resume, opts.log};
  std::vector<EvalRow> rows = nested_cv(cases, outer, p, layout, cv);
  tenfold_cv_control(cases, control, p, layout, rows, cv);

  fs::create_directories(layout.eval());
  write_text(layout.eval() / "rows.json", rows_to_json(rows, out).dump(2) + "\n");

  json audit{{"folds", json::array()}, {"control_folds", json::array()}};
  std::size_t overlap = 0;
  for (std::size_t k = 0; k < outer.folds.size(); ++k) {
    audit["folds"].push_back(read_json_file(layout.fold_dir(static_cast<int>(k)) / "leakage_audit.json"));
  }
  for (std::size_t k = 0; k < control.folds.size(); ++k) {
    audit["control_folds"].push_back(read_json_file(layout.control_dir(static_cast<int>(k)) / "leakage_audit.json"));
  }
  for (const auto* group : {&audit["folds"], &audit["control_folds"]})
    for (const auto& f : *group)
      for (const auto& s : f["stages"]) overlap += s["test_overlap"].size();
  audit["total_test_overlap"] = overlap;
  write_text(layout.eval() / "leakage_audit.json", audit.dump(2) + "\n");

  RunOutcome outcome;
  try {
    outcome.report = evaluate_rows(rows, p.eval);
  } catch (const InsufficientDataError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError("evaluation", e.what());
  }
  outcome.comparison = compare_models(outcome.report);
  write_evaluation(layout, outcome.report, outcome.comparison);
  return outcome;
}

RunOutcome evaluate_run(const fs::path& run_dir) {
  const RunLayout layout{run_dir};
  const json echo = read_json_file(layout.config());
  if (!echo.contains("config")) throw FormatError(layout.config().string() + " has no config record");
  const RunConfig cfg = run_config_from_json(echo["config"]);
  std::vector<EvalRow> rows = rows_from_json(read_json_file(layout.eval() / "rows.json"), run_dir);
  for (const auto& r : rows)
    for (const auto* path : {&r.gt, &r.proposed, &r.control})
      if (!fs::exists(*path)) throw IoError("case " + std::to_string(r.case_id) + ": missing " + path->string());
  RunOutcome outcome;
  outcome.report = evaluate_rows(rows, cfg.pipeline.eval);
  outcome.comparison = compare_models(outcome.report);
  write_evaluation(layout, outcome.report, outcome.comparison);
  return outcome;
}

}  // namespace pfci
