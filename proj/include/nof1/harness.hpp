#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nof1/pipeline.hpp"
#include "nof1/synthgen.hpp"

namespace nof1 {

inline constexpr int kConfigSchemaVersion = 1;

struct EvaluationSettings {
  int bootstrap = 1000;
  int ece_bins = 10;
  double rc_coverage = 0.8;  // coverage used for the headline risk-coverage row
};

struct ExperimentConfig {
  PopulationConfig population = PopulationConfig::defaults();
  SplitRatios split;
  PipelineConfig pipeline;
  EvaluationSettings evaluation;
  std::uint64_t seed = 2025;
  std::string output_dir = "runs";
  std::vector<Variant> ablations{kAllVariants.begin(), kAllVariants.end()};
  // Dotted paths of fields set by the config file or the command line.
  std::vector<std::string> overrides;
  std::vector<std::string> warnings;
};

struct ConfigValidation {
  std::optional<ExperimentConfig> config;  // empty when errors is non-empty
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

// Parses and schema-checks a JSON config. Absent fields take the defaults;
// unknown keys become warnings. Collects every error instead of stopping at the
// first one and never throws.
ConfigValidation validate_config(const std::string& text);

// Resolved config as JSON; validate_config(dump) reproduces the same config.
nlohmann::json config_to_json(const ExperimentConfig& config);

// Semantic checks shared by validate_config and run_experiment.
std::vector<std::string> check_config(const ExperimentConfig& config);

struct RunOptions {
  // Run directory name; the default is seed<S>_<UTC timestamp>. An existing
  // directory is never reused: _2, _3, ... are appended instead.
  std::optional<std::string> run_name;
  bool save_models = false;  // also write full forests under models/
  bool write_outputs = true;
};

// Headline numbers of one run. Deltas are multi - mono.
struct RunMetrics {
  std::uint64_t seed = 0;
  double auc_overall_mono = 0, auc_overall_multi = 0, delong_p_overall = 1;
  double acc_overall_mono = 0, acc_overall_multi = 0;
  double auc_tail_mono = 0, auc_tail_multi = 0, delong_p_tail = 1;
  double acc_tail_mono = 0, acc_tail_multi = 0;
  double auc_d_mono = 0, auc_d_multi = 0, delong_p_d = 1;
  double acc_d_mono = 0, acc_d_multi = 0;
  double ece_tail_mono = 0, ece_tail_multi = 0;
  double rc_error_mono = 0, rc_error_multi = 0;
  double boot_auc_overall_p2_5 = 0, boot_auc_overall_p97_5 = 0;
  double boot_auc_tail_p2_5 = 0;
  std::vector<VariantMetrics> ablations;
  std::size_t test_rows = 0;
  std::size_t abstained = 0;

  // Flat (name, value) list; ablation entries are named <variant>_<metric>.
  std::vector<std::pair<std::string, double>> named() const;
};

struct RunResult {
  std::filesystem::path run_dir;
  nlohmann::json manifest;  // deterministic: config, fitted state, output checksums
  nlohmann::json run_info;  // directory, start time, thread count, stage timings
  RunMetrics metrics;
};

// generate -> split -> fit -> score -> evaluate -> emit. On failure writes a
// manifest with status "failed" and the stage, then throws StageError.
RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options = {});

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::optional<RunMetrics> metrics;
  std::string error;
  std::filesystem::path run_dir;
};

struct MetricSummary {
  std::string metric;
  std::size_t n = 0;
  double median = 0, q1 = 0, q3 = 0, min = 0, max = 0;
};

struct MultiSeedResult {
  std::filesystem::path dir;
  std::vector<SeedOutcome> seeds;
  std::vector<MetricSummary> summary;
};

std::vector<MetricSummary> summarize(const std::vector<RunMetrics>& runs);

// Seeds master, master + 1, ...; a failing seed is reported and the rest kept.
MultiSeedResult run_multi_seed(const ExperimentConfig& config, int n_seeds,
                               const RunOptions& options = {});

// Hex SHA-256 of a file.
std::string sha256_file(const std::filesystem::path& path);

}  // namespace nof1
