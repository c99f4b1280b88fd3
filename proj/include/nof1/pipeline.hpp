#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nof1/atypicality.hpp"
#include "nof1/coordination.hpp"
#include "nof1/evalstats.hpp"
#include "nof1/learners.hpp"

namespace nof1 {

inline constexpr const char* kModelVersion = "nof1-1.0.0";

struct PipelineConfig {
  ForestParams forest;
  LogisticFitOptions glm;
  int regions = 3;
  KMeansOptions kmeans;
  int cv_folds = 3;
  int knn_k = 25;
  double density_epsilon = 1e-6;
  double tail_fraction = 0.12;
  StackerFitOptions stacker;
  CoordinationPolicy policy;
  double abstain_atyp_quantile = 0.99;  // of training m(x)
  ReliabilityCoefficients coefficients;
  int history_neighbors = 50;
  double history_half_life = 200.0;
};

// Wall-clock seconds per named stage, in execution order.
struct StageTimings {
  std::vector<std::pair<std::string, double>> stages;

  template <class F>
  auto time(const std::string& name, F&& f) {
    const auto t0 = std::chrono::steady_clock::now();
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      stages.emplace_back(name, seconds_since(t0));
    } else {
      auto r = f();
      stages.emplace_back(name, seconds_since(t0));
      return r;
    }
  }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }
};

// Thrown by fit_pipeline / run_experiment with the failing stage name.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct FittedPipeline {
  PipelineConfig config;
  CoordinationPolicy policy;  // with the resolved atypicality threshold
  MonolithModel monolith;
  KMeansResult regions;
  std::vector<RegionalAgent> agents;
  SpecialistModel specialist;
  MahalanobisModel mahalanobis;
  std::optional<DensityEstimator> density;
  std::vector<DensityEstimator> agent_density;
  StackerFit stacker;
  std::optional<ConformalCalibrator> conformal;
  std::optional<LocalHistory> history;

  CoordinationContext context() const;
};

// Ablation variants, named as in the ablation table.
enum class Variant { Monolith, MultiFull, NoSpecialist, NoStacking, AgentsOnly };
inline constexpr std::array<Variant, 5> kAllVariants{Variant::Monolith, Variant::MultiFull,
                                                     Variant::NoSpecialist, Variant::NoStacking,
                                                     Variant::AgentsOnly};
const char* variant_name(Variant v);
std::optional<Variant> parse_variant(std::string_view name);

// Per-row predictions of every system over a list of dataset rows.
struct ScoredRows {
  std::vector<std::size_t> rows;
  std::vector<int> y;
  std::vector<Cluster> cluster;
  std::vector<bool> x3_present;
  std::vector<std::vector<double>> agent_probs;  // [row][agent]
  std::vector<MetaFeatures> meta;
  std::vector<double> mono;
  std::vector<double> multi;         // specialist routing + stacker
  std::vector<double> no_specialist; // stacker everywhere
  std::vector<double> no_stacking;   // specialist routing + proximity-weighted agents
  std::vector<double> agents_only;   // proximity-weighted agents

  const std::vector<double>& scores(Variant v) const;
};

// softmax(-||x - c_j||^2) over region centroids.
std::vector<double> proximity_weights(std::span<const Point> centroids, const Point& x);
double proximity_average(std::span<const RegionalAgent> agents, const Point& x);

Patient make_patient(const Individual& ind);

// Reports of every regional agent for x; uncertainty is the agent's local ECE
// when a history is supplied.
std::vector<AgentReport> agent_reports(std::span<const RegionalAgent> agents, const Point& x,
                                       const LocalHistory* history);

FittedPipeline fit_pipeline(const Dataset& data, const SplitAssignment& split,
                            const PipelineConfig& config, std::uint64_t seed,
                            StageTimings* timings = nullptr);

ScoredRows score_rows(const FittedPipeline& pipeline, const Dataset& data,
                      std::span<const std::size_t> rows);

struct VariantMetrics {
  Variant variant = Variant::Monolith;
  double auc_overall = 0.5;
  double acc_overall = 0.0;
  double auc_tail = 0.5;
  double acc_tail = 0.0;
};

// Evaluates the five variants on the same scored rows; the tail is the top
// tail_fraction of those rows by m(x).
std::vector<VariantMetrics> run_ablations(const ScoredRows& scored, double tail_fraction,
                                          std::span<const Variant> variants = kAllVariants);

}  // namespace nof1
