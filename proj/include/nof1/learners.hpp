#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nof1/forest.hpp"
#include "nof1/glm.hpp"
#include "nof1/kmeans.hpp"

namespace nof1 {

// Equal-weight ensemble of the quadratic GLM and the forest on (x1, x2).
struct MonolithModel {
  QuadraticGlm glm;
  ForestModel forest;

  double predict(const Point& x) const;
};

double average_probability(double p_glm, double p_forest);

MonolithModel fit_monolith(std::span<const Point> features, std::span<const int> labels,
                           const ForestParams& forest_params, std::uint64_t seed,
                           const LogisticFitOptions& glm_options = {});

// ---------------------------------------------------------------------------
// Regional agents

enum class ModelKind { Glm, Forest, Constant };
const char* model_kind_name(ModelKind k);

struct ConstantModel {
  double rate = 0.5;
  double predict(const Point&) const;
};

using RegionModel = std::variant<QuadraticGlm, ForestModel, ConstantModel>;

struct RegionalAgent {
  int region_id = 0;
  Point centroid;
  ModelKind chosen_kind = ModelKind::Glm;
  RegionModel model;
  std::optional<double> cv_auc_glm;
  std::optional<double> cv_auc_rf;
  std::size_t n_train = 0;
  std::vector<std::size_t> train_rows;  // indices into the training arrays
  std::string selection_note;

  double predict(const Point& x) const;
};

struct RegionalOptions {
  int folds = 3;
  std::size_t min_rows = 30;
  double tie_tolerance = 1e-6;
  ForestParams forest;
  LogisticFitOptions glm;
};

// Label-stratified fold ids in [0, k): each class is shuffled with its own
// substream and dealt round-robin.
std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed);

// Mean over folds of the held-out AUC of a model refit on the other folds.
// Returns nullopt when some held-out fold has a single class.
std::optional<double> cross_validated_auc(std::span<const Point> features,
                                          std::span<const int> labels, std::span<const int> folds,
                                          ModelKind kind, const RegionalOptions& options,
                                          std::uint64_t seed);

// GLM wins when |auc_glm - auc_rf| < tolerance or auc_glm > auc_rf.
ModelKind choose_by_cv(double auc_glm, double auc_rf, double tolerance);

// One agent per k-means region: 3-fold CV picks GLM vs forest on the region's
// rows and the winner is refit on all of them. Single-class regions get a
// constant agent; regions too small for CV get a GLM.
std::vector<RegionalAgent> fit_regional_agents(std::span<const Point> features,
                                               std::span<const int> labels,
                                               const KMeansResult& regions, std::uint64_t seed,
                                               const RegionalOptions& options = {});

// Prediction of the agent owning x's nearest centroid.
double predict_by_region(std::span<const RegionalAgent> agents, const Point& x);

// ---------------------------------------------------------------------------
// Rare-case specialist on x3

struct SpecialistModel {
  double alpha = 0.0;
  double gamma = 0.0;
  bool converged = false;
  std::size_t n_train = 0;

  double predict(double x3) const;
};

// Univariate logistic fit on the rows where x3 is observed; other rows are
// ignored. Throws std::invalid_argument with fewer than 20 such rows or a
// single class.
SpecialistModel fit_specialist(std::span<const std::optional<double>> x3,
                               std::span<const int> labels, const LogisticFitOptions& options = {});

}  // namespace nof1
