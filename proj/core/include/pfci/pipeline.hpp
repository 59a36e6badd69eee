#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "pfci/checkpoint.hpp"
#include "pfci/image.hpp"
#include "pfci/metrics.hpp"
#include "pfci/models.hpp"
#include "pfci/phantom.hpp"
#include "pfci/projection.hpp"

namespace pfci {

/// Pixels outside `mask` become the image minimum; inside pixels are unchanged.
FloatImage apply_mask(const FloatImage& img, const BinaryImage& mask);

/// Every image the pipeline derives from one corpus case.
struct CaseImages {
  int case_id = 0;
  bool paired = false;
  FloatImage cwrs;
  FloatImage pfci;
  BinaryImage roi;
  /// Empty for CT-only cases.
  FloatImage cxr;
};

CaseImages derive_case_images(const CorpusManifest& manifest, const CaseRecord& rec,
                              const ProjectionParams& projection = {});

struct StageConfig {
  NetConfig net;
  TrainConfig train;
  bool operator==(const StageConfig&) const = default;
};

struct CvConfig {
  int outer_folds = 5;
  /// Share of each outer-training group held out for model selection; 0 disables it.
  double inner_validation_fraction = 0.2;
  int control_folds = 10;
  bool operator==(const CvConfig&) const = default;
};

struct EvalOptions {
  /// One min/max over the three images of a case instead of per-image normalization.
  bool shared_normalization = false;
  /// Gaussian-windowed SSIM instead of the global formula.
  bool windowed_ssim = false;
  bool operator==(const EvalOptions&) const = default;
};

struct PipelineConfig {
  StageConfig cyclegan;
  StageConfig unet;
  StageConfig pix2pix;
  /// Single CXR -> PFCI translator.
  StageConfig control;
  LossWeights weights;
  CvConfig cv;
  EvalOptions eval;
  ProjectionParams projection;
  std::uint64_t seed = 0;
  /// Folds trained concurrently.
  int jobs = 1;

  void validate() const;
  bool operator==(const PipelineConfig&) const = default;
};

/// Full-scale (256 px, 200/100/400 epochs, 5 outer / 10 control folds) and desk-scale presets.
PipelineConfig paper_pipeline_config();
PipelineConfig desk_pipeline_config();

/// Outer folds over the paired cases; CT-only cases always train. Each outer-training
/// partition is split once more into inner train / validation, stratified by pairing.
struct FoldAssignment {
  struct Fold {
    std::vector<int> test;
    std::vector<int> train;
    std::vector<int> inner_train;
    std::vector<int> validation;
  };

  std::uint64_t seed = 0;
  std::vector<int> paired_ids;
  std::vector<int> ct_only_ids;
  std::vector<Fold> folds;

  int fold_of(int case_id) const;
  nlohmann::json to_json() const;
};

/// Throws DataError when there are fewer paired cases than folds, ParameterError when k < 2.
FoldAssignment assign_folds(const std::vector<int>& paired_ids, const std::vector<int>& ct_only_ids, int k,
                            std::uint64_t seed, double validation_fraction);

/// FNV-1a over the sorted ids.
std::uint64_t partition_hash(std::vector<int> ids);

struct PipelineCheckpoints {
  Checkpoint stage1;
  Checkpoint stage2;
  Checkpoint stage3;
};

/// Loaded networks of one fold.
class ProposedPipeline {
 public:
  explicit ProposedPipeline(const PipelineCheckpoints& ckpts);
  /// Unpaired translation, segmentation, masking, paired translation. Output in [0, 1] at
  /// the stage-3 resolution. Stage failures surface as PipelineError.
  FloatImage run(const FloatImage& cxr) const;
  /// Intermediate products of run().
  struct Trace {
    FloatImage cwrs;
    BinaryImage mask;
    FloatImage masked;
    FloatImage pfci;
  };
  Trace trace(const FloatImage& cxr) const;

 private:
  CycleGanModel stage1_;
  UNetModel stage2_;
  Pix2PixModel stage3_;
};

FloatImage run_proposed(const FloatImage& cxr, const PipelineCheckpoints& ckpts);
/// One A->B translation of `cxr`, mapped to [0, 1].
FloatImage run_control(const FloatImage& cxr, const Checkpoint& ckpt);

/// Provenance stamped into every checkpoint trained for a fold.
nlohmann::json fold_meta(int fold, const std::vector<int>& partition, const std::vector<int>& train_ids,
                         const std::vector<int>& validation_ids);

/// Checks that no stage trained or validated on a test case and that all stages recorded the
/// same training partition (matching `expected_hash` when given). Throws LeakageError.
/// Returns the audit record for the run log.
nlohmann::json audit_leakage(const std::vector<const Checkpoint*>& stages, const std::vector<int>& test_ids,
                             std::optional<std::uint64_t> expected_hash = std::nullopt);

struct EvalRow {
  int case_id = 0;
  std::filesystem::path gt;
  std::filesystem::path proposed;
  std::filesystem::path control;
  MetricsRecord proposed_metrics;
  MetricsRecord control_metrics;
};

/// Loads the three images of every row, normalizes them and fills both metric records.
/// Throws IoError naming the case when an image is missing, InsufficientDataError when
/// there are fewer than two rows.
MetricsReport evaluate_rows(std::vector<EvalRow>& rows, const EvalOptions& opts = {});

nlohmann::json rows_to_json(const std::vector<EvalRow>& rows, const std::filesystem::path& base);
std::vector<EvalRow> rows_from_json(const nlohmann::json& j, const std::filesystem::path& base);

/// Proposed-vs-control means per metric and which model wins each.
nlohmann::json compare_models(const MetricsReport& report);

/// Case images of a whole corpus, indexed by case id.
using CaseTable = std::map<int, CaseImages>;
CaseTable derive_all(const CorpusManifest& manifest, const ProjectionParams& projection, int jobs = 1);

/// Run directory layout.
struct RunLayout {
  std::filesystem::path root;

  std::filesystem::path config() const { return root / "run_config.json"; }
  std::filesystem::path corpus() const { return root / "corpus"; }
  std::filesystem::path manifest() const { return corpus() / "manifest.json"; }
  std::filesystem::path fold_dir(int k) const { return root / ("fold_" + std::to_string(k)); }
  std::filesystem::path stage(int k, int s) const {
    return fold_dir(k) / ("stage" + std::to_string(s) + ".nnck");
  }
  std::filesystem::path control_dir(int k) const { return root / "control" / ("fold_" + std::to_string(k)); }
  std::filesystem::path control(int k) const { return control_dir(k) / "control.nnck"; }
  std::filesystem::path images() const { return root / "images"; }
  std::filesystem::path image(int case_id, const std::string& kind) const;
  std::filesystem::path eval() const { return root / "eval"; }
};

struct CvOptions {
  bool resume = false;
  /// Progress lines ("fold 0 stage 1 trained in 12.3 s"); may be empty.
  std::function<void(const std::string&)> log;
};

enum class Stage { Translation = 1, Segmentation = 2, CountImage = 3, Control = 4 };

/// "stage1", "stage2", "stage3" or "control".
const char* stage_name(Stage s);

/// Seed of one (stage, fold) training run, derived from the run seed and the stage seed.
std::uint64_t fold_train_seed(const PipelineConfig& cfg, int stage, int fold);

/// Assembles the training (and validation) data of one stage from the given cases and
/// trains it. Stage 1 uses the CXRs of paired cases as domain A and the CWRS of every case
/// as domain B; stage 2 pairs CWRS with ROI projections; stage 3 pairs masked CWRS with
/// count images; the control translates CXRs into count images.
TrainResult train_stage(Stage stage, const CaseTable& cases, const std::vector<int>& train_ids,
                        const std::vector<int>& validation_ids, const PipelineConfig& cfg, std::uint64_t seed);

/// Trains the three stages per outer fold on that fold's training partition only, writes the
/// proposed output of every test case, and returns one row per paired case. With
/// `resume`, (fold, stage) pairs whose checkpoint exists are loaded instead of retrained.
std::vector<EvalRow> nested_cv(const CaseTable& cases, const FoldAssignment& folds, const PipelineConfig& cfg,
                               const RunLayout& layout, const CvOptions& opts = {});

/// K-fold training of the single-model control; fills the control paths of `rows`.
void tenfold_cv_control(const CaseTable& cases, const FoldAssignment& folds, const PipelineConfig& cfg,
                        const RunLayout& layout, std::vector<EvalRow>& rows, const CvOptions& opts = {});

}  // namespace pfci
