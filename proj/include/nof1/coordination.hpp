#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "nof1/atypicality.hpp"
#include "nof1/glm.hpp"
#include "nof1/learners.hpp"

namespace nof1 {

struct Provenance {
  std::string model_kind;
  std::string model_version;
  int region_id = -1;
  std::vector<std::string> features;
};

// One agent's answer for one patient: calibrated probability, an uncertainty
// summary (local ECE) and where it came from.
struct AgentReport {
  std::string agent_id;
  double p_hat = 0.5;
  double uncertainty = 0.0;
  Provenance provenance;
};

struct MetaFeatures {
  double atyp = 0.0;      // Mahalanobis score
  double rho = 1.0;       // k-NN density
  double disagree = 0.0;  // sd of agent probabilities
};

struct Patient {
  std::size_t id = 0;
  Point x;
  std::optional<double> x3;
};

// ---------------------------------------------------------------------------
// Reliability weights
//
// w_j = alpha dens_j + beta cons_j + gamma / max(cal_j, 1e-3) + delta perf_j
//   dens_j  k-NN density of the patient within agent j's own training region
//   cons_j  1 - mean_k |p_j - p_k|
//   cal_j   ECE of agent j on the patient's nearest validation neighbours
//   perf_j  recency-weighted accuracy of agent j on those neighbours
// With `normalize`, each of the four terms is min-max scaled across agents
// before weighting (a term that is constant across agents scales to 1).

inline constexpr double kCalibrationFloor = 1e-3;

struct ReliabilityCoefficients {
  double alpha = 0.25;
  double beta = 0.25;
  double gamma = 0.25;
  double delta = 0.25;
  bool normalize = true;
};

struct AgentEvidence {
  double density = 0.0;
  std::optional<double> local_ece;
  std::optional<double> local_accuracy;
};

struct ReliabilityWeights {
  std::vector<double> w;
  std::vector<double> dens, cons, cal, perf;  // raw components (cal floored)
  // Coefficient-scaled contributions; w[j] is their sum.
  std::vector<double> dens_term, cons_term, cal_term, perf_term;
  ReliabilityCoefficients coefficients;
  std::vector<std::string> notes;
};

// Missing calibration or performance history for an agent falls back to the
// mean over agents that have it (noted in `notes`).
ReliabilityWeights compute_weights(std::span<const AgentReport> reports,
                                   std::span<const AgentEvidence> evidence,
                                   const ReliabilityCoefficients& coefficients = {});

// Calibration and accuracy of each agent on the validation rows nearest a
// query point. Validation row order stands in for arrival time: later rows are
// more recent for the recency weighting.
class LocalHistory {
 public:
  LocalHistory(std::vector<Point> points, std::vector<int> labels,
               std::vector<std::vector<double>> agent_probs, int neighbors = 50,
               double half_life = 200.0);

  struct Local {
    std::vector<double> ece;
    std::vector<double> accuracy;
  };

  Local evaluate(const Point& x) const;
  std::vector<std::size_t> nearest(const Point& x) const;
  std::size_t agent_count() const { return agent_probs_.size(); }

 private:
  std::vector<Point> points_;
  std::vector<int> labels_;
  std::vector<std::vector<double>> agent_probs_;  // [agent][row]
  int neighbors_;
  double half_life_;
};

// ---------------------------------------------------------------------------
// Stacked fusion

enum class StackerVariant {
  // sigma(a0 + a1 Atyp + a2 Disagree + sum_j b_j w_j p_j)
  Generalized,
  // sigma(a0 + a1 rho + a2 Disagree + sum_j b_j p_j); the fitted pipeline variant
  Reproduction,
};
const char* stacker_variant_name(StackerVariant v);

struct StackerModel {
  StackerVariant variant = StackerVariant::Reproduction;
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;
  std::vector<double> b;
  bool converged = false;

  std::size_t agent_count() const { return b.size(); }
};

// [1, meta, disagree, x_1..x_K] with meta = rho (Reproduction) or atyp
// (Generalized) and x_j = p_j or w_j p_j.
std::vector<double> stacker_features(StackerVariant variant, std::span<const double> agent_probs,
                                     const MetaFeatures& meta,
                                     std::span<const double> agent_weights = {});

struct StackerFitOptions {
  double tail_upweight = 4.0;
  double low_density_quantile = 0.08;
  LogisticFitOptions glm;
};

struct StackerFit {
  StackerModel model;
  std::vector<double> row_weights;
  double density_cutoff = 0.0;  // rows with rho strictly below get the upweight
  std::size_t upweighted_rows = 0;
};

// Weighted logistic fit on validation rows. agent_probs and agent_weights are
// row-major ([row][agent]); agent_weights is required for Generalized only.
StackerFit fit_stacker(std::span<const int> outcomes,
                       std::span<const std::vector<double>> agent_probs,
                       std::span<const MetaFeatures> meta, StackerVariant variant,
                       const StackerFitOptions& options = {},
                       std::span<const std::vector<double>> agent_weights = {});

// Throws std::invalid_argument on an agent-count mismatch.
double stack_predict(const StackerModel& model, std::span<const double> agent_probs,
                     const MetaFeatures& meta, std::span<const double> agent_weights = {});

// ---------------------------------------------------------------------------
// Abstention, intervals, routing

struct CoordinationPolicy {
  double abstain_atyp_threshold = 3.0;
  double abstain_disagree_threshold = 0.25;
  bool abstention_enabled = false;
  bool specialist_routing = true;
  double conformal_alpha = 0.1;
  double critical_discord_factor = 2.0;

  void validate() const;
};

// Conjunction: both the atypicality and the disagreement must exceed their
// thresholds. Always false when abstention is disabled.
bool should_abstain(const MetaFeatures& meta, const CoordinationPolicy& policy);

// Logged only; never changes the route.
bool critical_discord(const MetaFeatures& meta, const CoordinationPolicy& policy);

struct Interval {
  double lower = 0.0;
  double upper = 1.0;
};

// The ceil((1 - alpha)(n + 1))-th smallest residual; 1 when that rank exceeds n
// (residuals |y - p| never exceed 1).
double conformal_quantile(std::span<const double> residuals, double alpha);

// Split-conformal calibrator on nonconformity |y - p|.
class ConformalCalibrator {
 public:
  ConformalCalibrator(std::span<const int> outcomes, std::span<const double> predictions,
                      double alpha);

  Interval interval(double p) const;
  double quantile() const { return q_; }
  double alpha() const { return alpha_; }
  std::size_t size() const { return n_; }

 private:
  double alpha_;
  double q_;
  std::size_t n_;
};

Interval conformal_interval(std::span<const int> outcomes, std::span<const double> predictions,
                            double p_hat, double alpha);

enum class Route { Specialist, Stacker, Abstain };
const char* route_name(Route r);

struct RoutingDecision {
  Route route = Route::Stacker;
  double fused = 0.5;        // probability computed before the abstention check
  std::optional<double> p;   // empty when abstained
};

// x3 present (and routing enabled): the specialist's probability. Otherwise the
// stacker, followed by the abstention check.
RoutingDecision route(const Patient& patient, std::span<const AgentReport> reports,
                      const SpecialistModel* specialist, const StackerModel& stacker,
                      const MetaFeatures& meta, const CoordinationPolicy& policy,
                      std::span<const double> agent_weights = {});

struct Explanation {
  std::vector<AgentReport> agents;
  std::vector<double> weights;
  bool specialist_available = false;
  std::optional<double> specialist_p;
  std::vector<std::string> top_rationales;
  std::vector<std::string> key_disagreements;
  bool critical_discord = false;
  std::vector<std::string> notes;
};

struct DecisionPacket {
  std::size_t patient_id = 0;
  Route route = Route::Stacker;
  std::optional<double> p;
  double fused_p = 0.5;
  Interval interval;
  MetaFeatures meta;
  ReliabilityWeights weights;
  Explanation explanation;
};

// Non-owning view of the fitted state coordinate() needs.
struct CoordinationContext {
  const MahalanobisModel* mahalanobis = nullptr;
  const DensityEstimator* density = nullptr;
  std::span<const DensityEstimator> agent_density;
  const LocalHistory* history = nullptr;
  const SpecialistModel* specialist = nullptr;
  const StackerModel* stacker = nullptr;
  const ConformalCalibrator* conformal = nullptr;
  ReliabilityCoefficients coefficients;
};

MetaFeatures compute_meta(const Patient& patient, std::span<const AgentReport> reports,
                          const MahalanobisModel& mahalanobis, const DensityEstimator& density);

// Meta-features, weights, routing, abstention, then the packet. Throws
// ConfigError naming the first missing component.
DecisionPacket coordinate(const Patient& patient, std::span<const AgentReport> reports,
                          const CoordinationPolicy& policy, const CoordinationContext& context);

// One audit record per patient.
nlohmann::json packet_to_json(const DecisionPacket& packet, const Patient& patient);

}  // namespace nof1
