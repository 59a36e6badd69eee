#pragma once

#include <filesystem>
#include <functional>
#include <string>

#include <nlohmann/json.hpp>

#include "pfci/metrics.hpp"
#include "pfci/phantom.hpp"
#include "pfci/pipeline.hpp"

namespace pfci {

struct CorpusConfig {
  int cases = 24;
  int paired = 16;
  std::uint64_t seed = 0;
  PhantomParams phantom;
  AttenuationParams attenuation;
  bool operator==(const CorpusConfig&) const = default;
};

/// Everything a reproducible end-to-end run depends on.
struct RunConfig {
  /// "desk" or "paper"; selects the defaults that explicit keys override.
  std::string preset = "desk";
  CorpusConfig corpus;
  PipelineConfig pipeline;
  bool deterministic = true;

  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

RunConfig desk_run_config();
RunConfig paper_run_config();

/// Full echo with every default spelled out.
nlohmann::json run_config_to_json(const RunConfig& cfg);
/// Starts from the preset named by "preset" (desk when absent) and applies the given keys.
/// Unknown keys raise ParameterError.
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::filesystem::path& path);

struct RunOptions {
  bool resume = false;
  std::function<void(const std::string&)> log;
};

struct RunOutcome {
  MetricsReport report;
  nlohmann::json comparison;
};

/// Corpus generation, projections, nested cross-validation of the proposed pipeline,
/// K-fold control, evaluation. The configuration echo is written before any compute.
RunOutcome run_all(const RunConfig& cfg, const std::filesystem::path& out, const RunOptions& opts = {});

/// Re-evaluates a finished run directory from its eval/rows.json and writes per_case.csv,
/// summary.csv and comparison.json. Throws IoError naming the first missing artifact.
RunOutcome evaluate_run(const std::filesystem::path& run_dir);

}  // namespace pfci
