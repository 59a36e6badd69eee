#include "pfci/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>

#include "pfci/parallel.hpp"
#include "pfci/stage_losses.hpp"
#include "pfci/volume.hpp"

namespace pfci {

namespace fs = std::filesystem;

FloatImage apply_mask(const FloatImage& img, const BinaryImage& mask) {
  if (img.width() != mask.width() || img.height() != mask.height()) {
    throw ShapeError("apply_mask: image and mask dimensions differ");
  }
  const auto px = img.pixels();
  if (px.empty()) return img;
  const double lo = *std::min_element(px.begin(), px.end());
  const auto bits = mask.bits();
  std::vector<double> out(px.begin(), px.end());
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!bits[i]) out[i] = lo;
  return FloatImage(img.width(), img.height(), std::move(out));
}

namespace {

/// Stage-3 input: masked [-1, 1] CWRS, restretched to [-1, 1].
FloatImage masked_input(const FloatImage& cwrs_pm1, const BinaryImage& mask) {
  return normalize_pm1(apply_mask(cwrs_pm1, mask));
}

}  // namespace

CaseImages derive_case_images(const CorpusManifest& manifest, const CaseRecord& rec,
                              const ProjectionParams& projection) {
  CaseImages ci;
  ci.case_id = rec.case_id;
  ci.paired = rec.paired;
  const CtVolume vol = load_ctv(manifest.volume_path(rec));
  const Roi3D roi = load_ctm(manifest.roi_path(rec));
  ci.cwrs = cwrs(vol, projection);
  ci.pfci = pfci_gt(extract_fat_mask(vol, roi));
  ci.roi = roi_coronal_projection(roi);
  if (rec.paired) ci.cxr = load_pfm(manifest.cxr_path(rec));
  return ci;
}

CaseTable derive_all(const CorpusManifest& manifest, const ProjectionParams& projection, int jobs) {
  std::vector<CaseImages> out(manifest.cases.size());
  parallel_for(static_cast<int>(out.size()), jobs, [&](int i) {
    out[static_cast<std::size_t>(i)] = derive_case_images(manifest, manifest.cases[static_cast<std::size_t>(i)], projection);
  });
  CaseTable table;
  for (auto& c : out) table.emplace(c.case_id, std::move(c));
  return table;
}

// ---------------------------------------------------------------------------------------

void PipelineConfig::validate() const {
  cyclegan.net.validate(Arch::ResnetGenerator);
  cyclegan.net.validate(Arch::PatchDiscriminator);
  cyclegan.train.validate();
  unet.net.validate(Arch::UNetSegmenter);
  unet.train.validate();
  pix2pix.net.validate(Arch::UNetGenerator);
  pix2pix.net.validate(Arch::PatchDiscriminator);
  pix2pix.train.validate();
  control.net.validate(Arch::ResnetGenerator);
  control.net.validate(Arch::PatchDiscriminator);
  control.train.validate();
  weights.validate();
  if (cv.outer_folds < 2) throw ParameterError("outer folds must be >= 2");
  if (cv.control_folds < 2) throw ParameterError("control folds must be >= 2");
  if (!(cv.inner_validation_fraction >= 0.0 && cv.inner_validation_fraction < 1.0)) {
    throw ParameterError("inner validation fraction must lie in [0, 1)");
  }
  if (jobs < 1) throw ParameterError("jobs must be >= 1");
}

PipelineConfig paper_pipeline_config() {
  PipelineConfig c;
  c.cyclegan = {cyclegan_net_defaults(256), cyclegan_train_defaults()};
  c.unet = {unet_net_defaults(256), unet_train_defaults()};
  c.pix2pix = {pix2pix_net_defaults(256), pix2pix_train_defaults()};
  c.control = c.cyclegan;
  c.cv = CvConfig{5, 0.2, 10};
  return c;
}

PipelineConfig desk_pipeline_config() {
  PipelineConfig c;
  NetConfig cg = cyclegan_net_defaults(64);
  cg.base_width = 16;
  cg.disc_base_width = 16;
  cg.disc_receptive_field = 34;
  c.cyclegan = {cg, cyclegan_train_defaults()};
  c.cyclegan.train.epochs = 20;

  NetConfig un = unet_net_defaults(64);
  un.depth = 6;
  un.base_width = 8;
  c.unet = {un, unet_train_defaults()};
  c.unet.train.epochs = 20;

  NetConfig pp = pix2pix_net_defaults(64);
  pp.depth = 6;
  pp.base_width = 16;
  pp.disc_base_width = 16;
  c.pix2pix = {pp, pix2pix_train_defaults()};
  c.pix2pix.train.epochs = 40;

  c.control = c.cyclegan;
  c.cv = CvConfig{2, 0.2, 2};
  return c;
}

// ---------------------------------------------------------------------------------------

int FoldAssignment::fold_of(int case_id) const {
  for (std::size_t k = 0; k < folds.size(); ++k)
    if (std::find(folds[k].test.begin(), folds[k].test.end(), case_id) != folds[k].test.end()) {
      return static_cast<int>(k);
    }
  return -1;
}

nlohmann::json FoldAssignment::to_json() const {
  nlohmann::json j;
  j["seed"] = seed;
  j["paired_ids"] = paired_ids;
  j["ct_only_ids"] = ct_only_ids;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : folds) {
    j["folds"].push_back({{"test", f.test},
                          {"train", f.train},
                          {"inner_train", f.inner_train},
                          {"validation", f.validation}});
  }
  return j;
}

FoldAssignment assign_folds(const std::vector<int>& paired_ids, const std::vector<int>& ct_only_ids, int k,
                            std::uint64_t seed, double validation_fraction) {
  if (k < 2) throw ParameterError("need at least two folds");
  if (static_cast<int>(paired_ids.size()) < k) {
    throw DataError("only " + std::to_string(paired_ids.size()) + " paired cases for " + std::to_string(k) + " folds");
  }
  FoldAssignment fa;
  fa.seed = seed;
  fa.paired_ids = paired_ids;
  fa.ct_only_ids = ct_only_ids;
  std::sort(fa.paired_ids.begin(), fa.paired_ids.end());
  std::sort(fa.ct_only_ids.begin(), fa.ct_only_ids.end());

  std::vector<int> order = fa.paired_ids;
  std::mt19937_64 rng(derive_seed(seed, 0));
  std::shuffle(order.begin(), order.end(), rng);
  fa.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < order.size(); ++i) fa.folds[i % static_cast<std::size_t>(k)].test.push_back(order[i]);

  for (int f = 0; f < k; ++f) {
    auto& fold = fa.folds[static_cast<std::size_t>(f)];
    std::sort(fold.test.begin(), fold.test.end());
    std::vector<int> paired_train;
    for (int id : fa.paired_ids)
      if (!std::binary_search(fold.test.begin(), fold.test.end(), id)) paired_train.push_back(id);
    fold.train = paired_train;
    fold.train.insert(fold.train.end(), fa.ct_only_ids.begin(), fa.ct_only_ids.end());
    std::sort(fold.train.begin(), fold.train.end());

    std::mt19937_64 inner_rng(derive_seed(seed, static_cast<std::uint64_t>(f) + 1));
    for (std::vector<int> group : {paired_train, fa.ct_only_ids}) {
      std::shuffle(group.begin(), group.end(), inner_rng);
      std::size_t n_val = static_cast<std::size_t>(validation_fraction * static_cast<double>(group.size()) + 0.5);
      // Keep at least one training case per group.
      if (!group.empty()) n_val = std::min(n_val, group.size() - 1);
      fold.validation.insert(fold.validation.end(), group.begin(), group.begin() + static_cast<long>(n_val));
      fold.inner_train.insert(fold.inner_train.end(), group.begin() + static_cast<long>(n_val), group.end());
    }
    std::sort(fold.validation.begin(), fold.validation.end());
    std::sort(fold.inner_train.begin(), fold.inner_train.end());
  }
  return fa;
}

std::uint64_t partition_hash(std::vector<int> ids) {
  std::sort(ids.begin(), ids.end());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (int id : ids) {
    const auto u = static_cast<std::uint32_t>(id);
    for (int b = 0; b < 4; ++b) {
      h ^= (u >> (8 * b)) & 0xFFu;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace

nlohmann::json fold_meta(int fold, const std::vector<int>& partition, const std::vector<int>& train_ids,
                         const std::vector<int>& validation_ids) {
  return {{"fold", fold},
          {"partition_hash", hex64(partition_hash(partition))},
          {"partition", partition},
          {"train_case_ids", train_ids},
          {"validation_case_ids", validation_ids}};
}

nlohmann::json audit_leakage(const std::vector<const Checkpoint*>& stages, const std::vector<int>& test_ids,
                             std::optional<std::uint64_t> expected_hash) {
  const std::set<int> test(test_ids.begin(), test_ids.end());
  nlohmann::json record{{"test_case_ids", test_ids}, {"stages", nlohmann::json::array()}};
  std::string common_hash;
  for (const Checkpoint* ck : stages) {
    const auto& m = ck->meta;
    for (const char* key : {"partition_hash", "partition", "train_case_ids", "validation_case_ids"}) {
      if (!m.contains(key)) throw LeakageError(ck->stage + " checkpoint carries no " + key + " record");
    }
    const auto partition = m["partition"].get<std::vector<int>>();
    const auto train = m["train_case_ids"].get<std::vector<int>>();
    const auto val = m["validation_case_ids"].get<std::vector<int>>();
    const std::string hash = m["partition_hash"].get<std::string>();
    if (hash != hex64(partition_hash(partition))) {
      throw LeakageError(ck->stage + " checkpoint partition hash does not match its recorded partition");
    }
    if (common_hash.empty()) common_hash = hash;
    if (hash != common_hash) throw LeakageError("stages of one fold were trained on different partitions");
    if (expected_hash && hash != hex64(*expected_hash)) {
      throw LeakageError(ck->stage + " checkpoint was trained on a different partition than this fold");
    }
    const std::set<int> part(partition.begin(), partition.end());
    std::vector<int> overlap;
    for (const auto* ids : {&partition, &train, &val})
      for (int id : *ids)
        if (test.count(id)) overlap.push_back(id);
    if (!overlap.empty()) {
      std::sort(overlap.begin(), overlap.end());
      overlap.erase(std::unique(overlap.begin(), overlap.end()), overlap.end());
      std::string list;
      for (int id : overlap) list += (list.empty() ? "" : ",") + std::to_string(id);
      throw LeakageError(ck->stage + " checkpoint saw test case(s) " + list);
    }
    for (const auto* ids : {&train, &val})
      for (int id : *ids)
        if (!part.count(id)) {
          throw LeakageError(ck->stage + " checkpoint used case " + std::to_string(id) + " outside its partition");
        }
    record["stages"].push_back({{"stage", ck->stage},
                                {"partition_hash", hash},
                                {"train_cases", train.size()},
                                {"validation_cases", val.size()},
                                {"test_overlap", nlohmann::json::array()}});
  }
  record["partition_hash"] = common_hash;
  return record;
}

// ---------------------------------------------------------------------------------------

namespace {

template <class Model>
Model load_stage(const Checkpoint& ck, const char* stage) {
  try {
    return Model(ck);
  } catch (const Error& e) {
    throw PipelineError(stage, e.what());
  }
}

}  // namespace

ProposedPipeline::ProposedPipeline(const PipelineCheckpoints& ckpts)
    : stage1_(load_stage<CycleGanModel>(ckpts.stage1, "stage1")),
      stage2_(load_stage<UNetModel>(ckpts.stage2, "stage2")),
      stage3_(load_stage<Pix2PixModel>(ckpts.stage3, "stage3")) {}

ProposedPipeline::Trace ProposedPipeline::trace(const FloatImage& cxr) const {
  Trace t;
  try {
    t.cwrs = stage1_.translate(prepare_image(cxr, stage1_.input_size()), Direction::AtoB);
  } catch (const Error& e) {
    throw PipelineError("stage1", e.what());
  }
  try {
    t.mask = stage2_.segment(prepare_image(t.cwrs, stage2_.input_size()));
  } catch (const Error& e) {
    throw PipelineError("stage2", e.what());
  }
  try {
    const int s3 = stage3_.input_size();
    t.masked = masked_input(prepare_image(t.cwrs, s3), prepare_mask(t.mask, s3));
    t.pfci = pm1_to_unit(stage3_.translate(t.masked));
  } catch (const Error& e) {
    throw PipelineError("stage3", e.what());
  }
  return t;
}

FloatImage ProposedPipeline::run(const FloatImage& cxr) const { return trace(cxr).pfci; }

FloatImage run_proposed(const FloatImage& cxr, const PipelineCheckpoints& ckpts) {
  return ProposedPipeline(ckpts).run(cxr);
}

FloatImage run_control(const FloatImage& cxr, const Checkpoint& ckpt) {
  try {
    const CycleGanModel model(ckpt);
    return pm1_to_unit(model.translate(prepare_image(cxr, model.input_size()), Direction::AtoB));
  } catch (const Error& e) {
    throw PipelineError("control", e.what());
  }
}

// ---------------------------------------------------------------------------------------

fs::path RunLayout::image(int case_id, const std::string& kind) const {
  char buf[64];
  std::snprintf(buf, sizeof buf, "case_%04d_%s.pfm", case_id, kind.c_str());
  return images() / buf;
}

namespace {

FloatImage to_size(const FloatImage& img, int w, int h) {
  if (img.width() == w && img.height() == h) return img;
  return resize_bilinear(img, w, h);
}

const CaseImages& case_at(const CaseTable& cases, int id) {
  auto it = cases.find(id);
  if (it == cases.end()) throw DataError("case " + std::to_string(id) + " has no derived images");
  return it->second;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << "\n";
}

/// Loads the checkpoint at `path` when resuming and it exists; otherwise trains it.
template <class TrainFn>
Checkpoint obtain(const fs::path& path, const fs::path& loss_csv, bool resume, const nlohmann::json& meta,
                  TrainFn&& train, bool& trained) {
  trained = false;
  if (resume && fs::exists(path)) return load_checkpoint(path.string());
  TrainResult r = train();
  r.checkpoint.meta.update(meta);
  r.log.write_csv(loss_csv);
  save_checkpoint(path.string(), r.checkpoint);
  trained = true;
  return r.checkpoint;
}

class Progress {
 public:
  explicit Progress(const CvOptions& o) : opts_(o) {}
  void operator()(const std::string& msg) {
    if (!opts_.log) return;
    std::lock_guard lock(mu_);
    opts_.log(msg);
  }

 private:
  const CvOptions& opts_;
  std::mutex mu_;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt_seconds(double s) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f s", s);
  return buf;
}

}  // namespace

std::uint64_t fold_train_seed(const PipelineConfig& cfg, int stage, int fold) {
  const StageConfig* s = stage == 1 ? &cfg.cyclegan : stage == 2 ? &cfg.unet : stage == 3 ? &cfg.pix2pix : &cfg.control;
  return derive_seed(cfg.seed ^ s->train.seed, static_cast<std::uint64_t>(fold) * 8 + static_cast<std::uint64_t>(stage));
}

TrainResult train_stage(Stage stage, const CaseTable& cases, const std::vector<int>& train_ids,
                        const std::vector<int>& validation_ids, const PipelineConfig& cfg, std::uint64_t seed) {
  auto with_seed = [seed](const StageConfig& s) {
    TrainConfig t = s.train;
    t.seed = seed;
    return t;
  };
  try {
    switch (stage) {
      case Stage::Translation: {
        std::vector<FloatImage> a, b;
        ImageSets val;
        for (int id : train_ids) {
          const auto& c = case_at(cases, id);
          if (c.paired) a.push_back(c.cxr);
          b.push_back(c.cwrs);
        }
        for (int id : validation_ids) {
          const auto& c = case_at(cases, id);
          if (c.paired) val.a.push_back(c.cxr);
          val.b.push_back(c.cwrs);
        }
        return train_cyclegan(a, b, cfg.cyclegan.net, with_seed(cfg.cyclegan), cfg.weights, &val);
      }
      case Stage::Segmentation: {
        SegmentationSet train, val;
        for (int id : train_ids) {
          train.images.push_back(case_at(cases, id).cwrs);
          train.masks.push_back(case_at(cases, id).roi);
        }
        for (int id : validation_ids) {
          val.images.push_back(case_at(cases, id).cwrs);
          val.masks.push_back(case_at(cases, id).roi);
        }
        return train_unet(train, cfg.unet.net, with_seed(cfg.unet), cfg.weights, &val);
      }
      case Stage::CountImage: {
        const int s3 = cfg.pix2pix.net.input_size;
        auto make = [&](const std::vector<int>& ids) {
          TranslationSet set;
          for (int id : ids) {
            const auto& c = case_at(cases, id);
            set.inputs.push_back(masked_input(prepare_image(c.cwrs, s3), prepare_mask(c.roi, s3)));
            set.targets.push_back(c.pfci);
          }
          return set;
        };
        const TranslationSet train = make(train_ids);
        const TranslationSet val = make(validation_ids);
        return train_pix2pix(train, cfg.pix2pix.net, with_seed(cfg.pix2pix), cfg.weights, &val);
      }
      case Stage::Control: {
        std::vector<FloatImage> a, b;
        for (int id : train_ids) {
          const auto& c = case_at(cases, id);
          if (c.paired) a.push_back(c.cxr);
          b.push_back(c.pfci);
        }
        return train_cyclegan(a, b, cfg.control.net, with_seed(cfg.control), cfg.weights);
      }
    }
  } catch (const PipelineError&) {
    throw;
  } catch (const Error& e) {
    throw PipelineError(stage_name(stage), e.what());
  }
  throw ParameterError("unknown stage");
}

const char* stage_name(Stage s) {
  switch (s) {
    case Stage::Translation: return "stage1";
    case Stage::Segmentation: return "stage2";
    case Stage::CountImage: return "stage3";
    case Stage::Control: return "control";
  }
  return "unknown";
}

std::vector<EvalRow> nested_cv(const CaseTable& cases, const FoldAssignment& folds, const PipelineConfig& cfg,
                               const RunLayout& layout, const CvOptions& opts) {
  cfg.validate();
  fs::create_directories(layout.images());
  Progress progress(opts);
  const int k = static_cast<int>(folds.folds.size());
  std::vector<std::vector<EvalRow>> per_fold(static_cast<std::size_t>(k));

  parallel_for(k, cfg.jobs, [&](int f) {
    const auto& fold = folds.folds[static_cast<std::size_t>(f)];
    fs::create_directories(layout.fold_dir(f));
    const auto& partition = fold.train;
    const nlohmann::json meta = fold_meta(f, partition, fold.inner_train, fold.validation);

    Checkpoint ck[3];
    for (int stage = 1; stage <= 3; ++stage) {
      bool trained = false;
      const auto t0 = std::chrono::steady_clock::now();
      ck[stage - 1] = obtain(layout.stage(f, stage),
                             layout.fold_dir(f) / ("stage" + std::to_string(stage) + "_loss.csv"), opts.resume,
                             meta, [&] {
                               return train_stage(static_cast<Stage>(stage), cases, fold.inner_train,
                                                  fold.validation, cfg, fold_train_seed(cfg, stage, f));
                             },
                             trained);
      progress("fold " + std::to_string(f) + " stage " + std::to_string(stage) + " " +
               (trained ? "trained in " + fmt_seconds(seconds_since(t0)) : "resumed"));
    }
    const Checkpoint& c1 = ck[0];
    const Checkpoint& c2 = ck[1];
    const Checkpoint& c3 = ck[2];

    write_json(layout.fold_dir(f) / "leakage_audit.json",
               audit_leakage({&c1, &c2, &c3}, fold.test, partition_hash(partition)));

    const ProposedPipeline pipe(PipelineCheckpoints{c1, c2, c3});
    for (int id : fold.test) {
      const auto& c = case_at(cases, id);
      const FloatImage out = to_size(pipe.run(c.cxr), c.pfci.width(), c.pfci.height());
      save_pfm(out, layout.image(id, "proposed"));
      save_pfm(c.pfci, layout.image(id, "gt"));
      EvalRow row;
      row.case_id = id;
      row.gt = layout.image(id, "gt");
      row.proposed = layout.image(id, "proposed");
      row.control = layout.image(id, "control");
      per_fold[static_cast<std::size_t>(f)].push_back(row);
    }
  });

  std::vector<EvalRow> rows;
  for (auto& v : per_fold) rows.insert(rows.end(), v.begin(), v.end());
  std::sort(rows.begin(), rows.end(), [](const EvalRow& a, const EvalRow& b) { return a.case_id < b.case_id; });
  return rows;
}

void tenfold_cv_control(const CaseTable& cases, const FoldAssignment& folds, const PipelineConfig& cfg,
                        const RunLayout& layout, std::vector<EvalRow>& rows, const CvOptions& opts) {
  cfg.validate();
  fs::create_directories(layout.images());
  Progress progress(opts);
  const int k = static_cast<int>(folds.folds.size());
  parallel_for(k, cfg.jobs, [&](int f) {
    const auto& fold = folds.folds[static_cast<std::size_t>(f)];
    fs::create_directories(layout.control_dir(f));
    const nlohmann::json meta = fold_meta(f, fold.train, fold.train, {});
    bool trained = false;
    const auto t0 = std::chrono::steady_clock::now();
    Checkpoint ck = obtain(layout.control(f), layout.control_dir(f) / "control_loss.csv", opts.resume, meta, [&] {
      return train_stage(Stage::Control, cases, fold.train, {}, cfg, fold_train_seed(cfg, 4, f));
    }, trained);
    progress("control fold " + std::to_string(f) + " " +
             (trained ? "trained in " + fmt_seconds(seconds_since(t0)) : "resumed"));

    write_json(layout.control_dir(f) / "leakage_audit.json", audit_leakage({&ck}, fold.test, partition_hash(fold.train)));

    for (int id : fold.test) {
      const auto& c = case_at(cases, id);
      save_pfm(to_size(run_control(c.cxr, ck), c.pfci.width(), c.pfci.height()), layout.image(id, "control"));
    }
  });

  std::set<int> covered;
  for (const auto& fold : folds.folds) covered.insert(fold.test.begin(), fold.test.end());
  for (auto& row : rows) {
    if (!covered.count(row.case_id)) throw DataError("control folds do not cover case " + std::to_string(row.case_id));
    row.control = layout.image(row.case_id, "control");
  }
}

// ---------------------------------------------------------------------------------------

MetricsReport evaluate_rows(std::vector<EvalRow>& rows, const EvalOptions& opts) {
  if (rows.empty()) throw InsufficientDataError("no evaluation rows");
  std::vector<MetricsRecord> records;
  for (auto& row : rows) {
    FloatImage gt, prop, ctrl;
    try {
      gt = load_pfm(row.gt);
      prop = load_pfm(row.proposed);
      ctrl = load_pfm(row.control);
    } catch (const IoError& e) {
      throw IoError("case " + std::to_string(row.case_id) + ": " + e.what());
    }
    prop = to_size(prop, gt.width(), gt.height());
    ctrl = to_size(ctrl, gt.width(), gt.height());
    std::vector<FloatImage> n;
    if (opts.shared_normalization) {
      n = normalize01_shared({gt, prop, ctrl});
    } else {
      n = {normalize01(gt), normalize01(prop), normalize01(ctrl)};
    }
    auto score = [&](const FloatImage& pred, const char* model) {
      MetricsRecord r;
      r.case_id = row.case_id;
      r.model = model;
      r.ssim = opts.windowed_ssim ? ssim_windowed(n[0], pred) : ssim_global(n[0], pred);
      r.mse = mse(n[0], pred);
      r.mae = mae(n[0], pred);
      return r;
    };
    row.proposed_metrics = score(n[1], "proposed");
    row.control_metrics = score(n[2], "control");
    records.push_back(row.proposed_metrics);
    records.push_back(row.control_metrics);
  }
  return aggregate(records);
}

nlohmann::json rows_to_json(const std::vector<EvalRow>& rows, const fs::path& base) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"case_id", r.case_id},
                 {"gt", fs::relative(r.gt, base).generic_string()},
                 {"proposed", fs::relative(r.proposed, base).generic_string()},
                 {"control", fs::relative(r.control, base).generic_string()}});
  }
  return j;
}

std::vector<EvalRow> rows_from_json(const nlohmann::json& j, const fs::path& base) {
  std::vector<EvalRow> rows;
  try {
    for (const auto& e : j) {
      EvalRow r;
      r.case_id = e.at("case_id").get<int>();
      r.gt = base / e.at("gt").get<std::string>();
      r.proposed = base / e.at("proposed").get<std::string>();
      r.control = base / e.at("control").get<std::string>();
      rows.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("evaluation rows: ") + e.what());
  }
  return rows;
}

nlohmann::json compare_models(const MetricsReport& report) {
  auto get = [&](const char* model) -> const ModelSummary& {
    auto it = report.models.find(model);
    if (it == report.models.end()) throw DataError(std::string("report has no ") + model + " model");
    return it->second;
  };
  const ModelSummary& p = get("proposed");
  const ModelSummary& c = get("control");
  auto summary = [](const ModelSummary& m) {
    return nlohmann::json{{"n", m.n},
                          {"ssim", {{"mean", m.ssim.mean}, {"sd", m.ssim.sd}}},
                          {"mse", {{"mean", m.mse.mean}, {"sd", m.mse.sd}}},
                          {"mae", {{"mean", m.mae.mean}, {"sd", m.mae.sd}}}};
  };
  const bool ssim = p.ssim.mean > c.ssim.mean;
  const bool mse_b = p.mse.mean < c.mse.mean;
  const bool mae_b = p.mae.mean < c.mae.mean;
  return {{"proposed", summary(p)},
          {"control", summary(c)},
          {"proposed_better", {{"ssim", ssim}, {"mse", mse_b}, {"mae", mae_b}}},
          {"proposed_better_on_all", ssim && mse_b && mae_b}};
}

}  // namespace pfci
