#include "pfci/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "pfci/errors.hpp"

namespace pfci {

namespace {

void require_same_dims(const FloatImage& a, const FloatImage& b) {
  if (!a.same_dims(b)) {
    throw ShapeError("image dims differ: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                     std::to_string(b.width()) + "x" + std::to_string(b.height()));
  }
  if (a.size() == 0) throw ShapeError("metrics need non-empty images");
}

FloatImage rescale(const FloatImage& img, double lo, double hi) {
  std::vector<double> out(img.size(), 0.0);
  if (hi > lo) {
    const double span = hi - lo;
    auto px = img.pixels();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (px[i] - lo) / span;
  }
  return FloatImage(img.width(), img.height(), std::move(out));
}

struct Moments {
  double mean_a, mean_b, var_a, var_b, cov;
};

// Two-pass population moments.
Moments moments(std::span<const double> a, std::span<const double> b) {
  const double n = static_cast<double>(a.size());
  double sa = 0, sb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sa += a[i];
    sb += b[i];
  }
  Moments m{sa / n, sb / n, 0, 0, 0};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - m.mean_a;
    const double db = b[i] - m.mean_b;
    m.var_a += da * da;
    m.var_b += db * db;
    m.cov += da * db;
  }
  m.var_a /= n;
  m.var_b /= n;
  m.cov /= n;
  return m;
}

double ssim_from(const Moments& m, double c1, double c2) {
  return ((2 * m.mean_a * m.mean_b + c1) * (2 * m.cov + c2)) /
         ((m.mean_a * m.mean_a + m.mean_b * m.mean_b + c1) * (m.var_a + m.var_b + c2));
}

MetricSummary summarize(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  // Shifted by the first sample so identical inputs give an exact mean and a zero SD.
  const double x0 = v.front();
  double s = 0;
  for (double x : v) s += x - x0;
  auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double mean = std::clamp(x0 + s / n, *lo, *hi);
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0))};
}

}  // namespace

FloatImage normalize01(const FloatImage& img) {
  if (img.size() == 0) return img;
  auto [lo, hi] = std::minmax_element(img.pixels().begin(), img.pixels().end());
  return rescale(img, *lo, *hi);
}

std::vector<FloatImage> normalize01_shared(const std::vector<FloatImage>& imgs) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& im : imgs) {
    for (double v : im.pixels()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  std::vector<FloatImage> out;
  out.reserve(imgs.size());
  for (const auto& im : imgs) out.push_back(rescale(im, lo, hi));
  return out;
}

double mae(const FloatImage& gt, const FloatImage& pred) {
  require_same_dims(gt, pred);
  auto a = gt.pixels();
  auto b = pred.pixels();
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

double mse(const FloatImage& gt, const FloatImage& pred) {
  require_same_dims(gt, pred);
  auto a = gt.pixels();
  auto b = pred.pixels();
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

void SsimParams::validate() const {
  if (!(c1() > 0.0) || !(c2() > 0.0) || !std::isfinite(c1()) || !std::isfinite(c2())) {
    throw ParameterError("SSIM stabilizers c1, c2 must be positive");
  }
}

double ssim_global(const FloatImage& a, const FloatImage& b, const SsimParams& p) {
  require_same_dims(a, b);
  p.validate();
  return ssim_from(moments(a.pixels(), b.pixels()), p.c1(), p.c2());
}

double ssim_windowed(const FloatImage& a, const FloatImage& b, const SsimParams& p) {
  require_same_dims(a, b);
  p.validate();
  constexpr int kWin = 11;
  constexpr double kSigma = 1.5;
  if (a.width() < kWin || a.height() < kWin) return ssim_global(a, b, p);

  double kernel[kWin * kWin];
  double ksum = 0;
  for (int j = 0; j < kWin; ++j) {
    for (int i = 0; i < kWin; ++i) {
      const double dx = i - kWin / 2, dy = j - kWin / 2;
      kernel[j * kWin + i] = std::exp(-(dx * dx + dy * dy) / (2 * kSigma * kSigma));
      ksum += kernel[j * kWin + i];
    }
  }
  for (double& k : kernel) k /= ksum;

  const double c1 = p.c1(), c2 = p.c2();
  double total = 0;
  int count = 0;
  for (int z0 = 0; z0 + kWin <= a.height(); ++z0) {
    for (int x0 = 0; x0 + kWin <= a.width(); ++x0) {
      double ma = 0, mb = 0;
      for (int j = 0; j < kWin; ++j)
        for (int i = 0; i < kWin; ++i) {
          const double w = kernel[j * kWin + i];
          ma += w * a.at(x0 + i, z0 + j);
          mb += w * b.at(x0 + i, z0 + j);
        }
      double va = 0, vb = 0, cov = 0;
      for (int j = 0; j < kWin; ++j)
        for (int i = 0; i < kWin; ++i) {
          const double w = kernel[j * kWin + i];
          const double da = a.at(x0 + i, z0 + j) - ma;
          const double db = b.at(x0 + i, z0 + j) - mb;
          va += w * da * da;
          vb += w * db * db;
          cov += w * da * db;
        }
      total += ssim_from({ma, mb, va, vb, cov}, c1, c2);
      ++count;
    }
  }
  return total / count;
}

MetricsReport aggregate(const std::vector<MetricsRecord>& records) {
  if (records.empty()) throw InsufficientDataError("aggregation needs at least two records per model, got none");
  MetricsReport rep;
  rep.records = records;
  std::map<std::string, std::vector<const MetricsRecord*>> by_model;
  for (const auto& r : records) by_model[r.model].push_back(&r);
  for (const auto& [model, rs] : by_model) {
    if (rs.size() < 2) {
      throw InsufficientDataError("model '" + model + "' has " + std::to_string(rs.size()) +
                                  " record(s); SD needs at least two");
    }
    std::vector<double> s, e2, e1;
    for (const auto* r : rs) {
      s.push_back(r->ssim);
      e2.push_back(r->mse);
      e1.push_back(r->mae);
    }
    rep.models[model] = {rs.size(), summarize(s), summarize(e2), summarize(e1)};
  }
  return rep;
}

std::string format_sig6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_per_case_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "case_id,model,ssim,mse,mae\n";
  for (const auto& r : report.records) {
    out << r.case_id << ',' << r.model << ',' << format_sig6(r.ssim) << ',' << format_sig6(r.mse) << ','
        << format_sig6(r.mae) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

void write_summary_csv(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "model,metric,mean,sd\n";
  for (const auto& [model, s] : report.models) {
    out << model << ",ssim," << format_sig6(s.ssim.mean) << ',' << format_sig6(s.ssim.sd) << '\n';
    out << model << ",mse," << format_sig6(s.mse.mean) << ',' << format_sig6(s.mse.sd) << '\n';
    out << model << ",mae," << format_sig6(s.mae.mean) << ',' << format_sig6(s.mae.sd) << '\n';
  }
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace pfci
