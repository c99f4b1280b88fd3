#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nof1/rng.hpp"
#include "nof1/synthgen.hpp"

namespace nof1 {

// ---------------------------------------------------------------------------
// Discrimination

struct AucResult {
  double auc = 0.5;
  double variance = 0.0;  // DeLong variance
  double ci_lower = 0.0;
  double ci_upper = 1.0;
};

// Mann-Whitney AUC (positive/negative ties count 0.5) with a 95% normal CI from
// the DeLong variance, clipped to [0, 1]. Throws std::invalid_argument unless
// both classes are present.
AucResult auc(std::span<const double> scores, std::span<const int> labels);

// AUC point estimate only (midrank formulation, O(n log n)).
double auc_value(std::span<const double> scores, std::span<const int> labels);

struct DeLongResult {
  double auc_a = 0.5;
  double auc_b = 0.5;
  double delta_auc = 0.0;  // auc_a - auc_b
  double variance = 0.0;
  double z = 0.0;
  double p = 1.0;
};

// Two-sided DeLong test for two correlated ROC curves on the same labels.
// Zero variance: delta == 0 gives z = 0, p = 1; otherwise p = 0.
DeLongResult delong_paired(std::span<const double> scores_a, std::span<const double> scores_b,
                           std::span<const int> labels);

// Two-sided standard normal tail probability 2 * (1 - Phi(|z|)).
double normal_two_sided_p(double z);

struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

// Empirical ROC curve from (inf, 0, 0) down to (min score, 1, 1).
std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels);

// ---------------------------------------------------------------------------
// Accuracy and calibration

// Fraction with (p >= threshold) == label. p exactly at the threshold is positive.
double accuracy(std::span<const double> probs, std::span<const int> labels,
                double threshold = 0.5);

struct CalibrationBin {
  double mean_predicted = 0.0;
  double empirical_rate = 0.0;
  std::size_t count = 0;
};

struct CalibrationReport {
  double ece = 0.0;
  std::vector<CalibrationBin> bins;
  std::vector<std::string> notes;
};

// Quantile-binned ECE: rows are ordered by prediction (ties by index) and cut
// into n_bins groups whose sizes differ by at most one.
CalibrationReport ece_quantile(std::span<const double> probs, std::span<const int> labels,
                               int n_bins = 10);

// ---------------------------------------------------------------------------
// Selective prediction

struct CoveragePoint {
  double coverage = 0.0;
  double error = 0.0;
};

struct RiskCoverageCurve {
  std::vector<CoveragePoint> points;  // one per kept-count 1..n

  // Selective error at the smallest kept-count whose coverage reaches c.
  double error_at(double coverage) const;
  // Points at coverage 0.01, 0.02, ..., 0.99.
  std::vector<CoveragePoint> summary() const;
};

// Keeps rows with x3 first (infinite confidence), then by |p - 0.5|
// descending; ties by index.
RiskCoverageCurve risk_coverage(std::span<const double> probs, std::span<const int> labels,
                                const std::vector<bool>& x3_present);

struct SurpriseResult {
  double rate = 0.0;
  std::vector<std::size_t> flagged;
};

// Flags rows whose outcome diverges from the prediction by more than threshold.
SurpriseResult surprise_index(std::span<const double> probs, std::span<const int> labels,
                              double threshold);

// ---------------------------------------------------------------------------
// Subgroups

struct ClusterMetrics {
  Cluster cluster = Cluster::A;
  std::size_t n = 0;
  std::optional<double> auc;  // empty when the cluster has one class
  double accuracy = 0.0;
};

std::vector<ClusterMetrics> per_cluster_metrics(std::span<const Cluster> clusters,
                                                std::span<const int> labels,
                                                std::span<const double> scores);

// ---------------------------------------------------------------------------
// Paired bootstrap

struct BootstrapDelta {
  std::string metric;
  double p2_5 = 0.0;
  double median = 0.0;
  double p97_5 = 0.0;
  double p = 1.0;
  bool no_crossings = false;  // every replicate on one side of zero
};

struct BootstrapSummary {
  std::vector<BootstrapDelta> deltas;  // AUC overall, ACC overall, AUC tail, ACC tail
  int resamples = 0;
  int redraws = 0;
  std::vector<std::string> notes;
};

struct BootstrapInput {
  std::span<const int> labels;
  std::span<const double> atypicality;  // m(x) for each test row
  std::span<const double> scores_mono;
  std::span<const double> scores_multi;
  double tail_fraction = 0.12;
};

// Fills `indices` (already sized n) with the resample for replicate b.
using Resampler = std::function<void(int b, Rng& rng, std::vector<std::size_t>& indices)>;

// Paired resamples with replacement; the tail is re-selected from the
// resampled m(x) values in every replicate. Replicates missing a class in the
// full or tail sample are redrawn. Replicate b draws from
// derive_seed(seed, {b}).
BootstrapSummary paired_bootstrap(const BootstrapInput& input, int resamples, std::uint64_t seed,
                                  const Resampler& resampler = {});

// Linear-interpolation quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> values, double q);

}  // namespace nof1
