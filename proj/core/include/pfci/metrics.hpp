#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pfci/image.hpp"

namespace pfci {

/// Per-image min-max map to [0, 1]. A constant image maps to all zeros.
FloatImage normalize01(const FloatImage& img);

/// Min-max map of every image with one shared [min, max] taken over all of them.
std::vector<FloatImage> normalize01_shared(const std::vector<FloatImage>& imgs);

/// Mean absolute error. Throws ShapeError on a dims mismatch.
double mae(const FloatImage& gt, const FloatImage& pred);
/// Mean squared error. Throws ShapeError on a dims mismatch.
double mse(const FloatImage& gt, const FloatImage& pred);

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  double c1() const noexcept { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const noexcept { return (k2 * dynamic_range) * (k2 * dynamic_range); }
  /// Throws ParameterError unless c1 > 0 and c2 > 0.
  void validate() const;
};

/// SSIM from whole-image statistics (population variances and covariance).
double ssim_global(const FloatImage& a, const FloatImage& b, const SsimParams& p = {});

/// Mean of local SSIM over every fully contained 11x11 window weighted by a Gaussian of
/// SD 1.5. Images smaller than the window fall back to ssim_global.
double ssim_windowed(const FloatImage& a, const FloatImage& b, const SsimParams& p = {});

struct MetricsRecord {
  int case_id = 0;
  std::string model;
  double ssim = 0.0;
  double mse = 0.0;
  double mae = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct ModelSummary {
  std::size_t n = 0;
  MetricSummary ssim;
  MetricSummary mse;
  MetricSummary mae;
};

struct MetricsReport {
  std::vector<MetricsRecord> records;
  /// Keyed by model label.
  std::map<std::string, ModelSummary> models;
};

/// Mean and (n-1) SD per model and metric. Throws InsufficientDataError when a model has
/// fewer than two records or the list is empty.
MetricsReport aggregate(const std::vector<MetricsRecord>& records);

/// "case_id,model,ssim,mse,mae", 6 significant digits.
void write_per_case_csv(const MetricsReport& report, const std::filesystem::path& path);
/// "model,metric,mean,sd", 6 significant digits.
void write_summary_csv(const MetricsReport& report, const std::filesystem::path& path);

std::string format_sig6(double v);

}  // namespace pfci
