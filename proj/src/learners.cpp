#include "nof1/learners.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nof1/evalstats.hpp"

namespace nof1 {

double average_probability(double p_glm, double p_forest) { return 0.5 * (p_glm + p_forest); }

double MonolithModel::predict(const Point& x) const {
  return average_probability(glm.predict(x), forest.predict(x));
}

MonolithModel fit_monolith(std::span<const Point> features, std::span<const int> labels,
                           const ForestParams& forest_params, std::uint64_t seed,
                           const LogisticFitOptions& glm_options) {
  MonolithModel m;
  m.glm = fit_quadratic_glm(features, labels, {}, glm_options);
  m.forest = fit_forest(features, labels, forest_params, derive_seed(seed, {tag("monolith-forest")}));
  return m;
}

const char* model_kind_name(ModelKind k) {
  switch (k) {
    case ModelKind::Glm: return "glm";
    case ModelKind::Forest: return "forest";
    case ModelKind::Constant: return "constant";
  }
  return "?";
}

double ConstantModel::predict(const Point&) const { return clip_probability(rate); }

double RegionalAgent::predict(const Point& x) const {
  return std::visit([&](const auto& m) { return m.predict(x); }, model);
}

std::vector<int> stratified_folds(std::span<const int> labels, int k, std::uint64_t seed) {
  if (k < 1) throw std::invalid_argument("folds: k must be >= 1");
  std::vector<int> fold(labels.size(), 0);
  for (int cls = 0; cls <= 1; ++cls) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) members.push_back(i);
    Rng rng(derive_seed(seed, {tag("folds"), static_cast<std::uint64_t>(cls)}));
    rng.shuffle(std::span<std::size_t>(members));
    for (std::size_t r = 0; r < members.size(); ++r)
      fold[members[r]] = static_cast<int>(r % static_cast<std::size_t>(k));
  }
  return fold;
}

namespace {

RegionModel fit_kind(ModelKind kind, std::span<const Point> x, std::span<const int> y,
                     const RegionalOptions& options, std::uint64_t seed) {
  if (kind == ModelKind::Forest) return fit_forest(x, y, options.forest, seed);
  return fit_quadratic_glm(x, y, {}, options.glm);
}

}  // namespace

std::optional<double> cross_validated_auc(std::span<const Point> features,
                                          std::span<const int> labels, std::span<const int> folds,
                                          ModelKind kind, const RegionalOptions& options,
                                          std::uint64_t seed) {
  const int k = *std::max_element(folds.begin(), folds.end()) + 1;
  double total = 0.0;
  for (int f = 0; f < k; ++f) {
    std::vector<Point> xtr, xte;
    std::vector<int> ytr, yte;
    for (std::size_t i = 0; i < features.size(); ++i) {
      if (folds[i] == f) {
        xte.push_back(features[i]);
        yte.push_back(labels[i]);
      } else {
        xtr.push_back(features[i]);
        ytr.push_back(labels[i]);
      }
    }
    const auto pos_te = std::count(yte.begin(), yte.end(), 1);
    const auto pos_tr = std::count(ytr.begin(), ytr.end(), 1);
    if (pos_te == 0 || pos_te == static_cast<long>(yte.size())) return std::nullopt;
    if (pos_tr == 0 || pos_tr == static_cast<long>(ytr.size())) return std::nullopt;
    const RegionModel model =
        fit_kind(kind, xtr, ytr, options, derive_seed(seed, {tag("cv"), static_cast<std::uint64_t>(f)}));
    std::vector<double> scores(xte.size());
    for (std::size_t i = 0; i < xte.size(); ++i)
      scores[i] = std::visit([&](const auto& m) { return m.predict(xte[i]); }, model);
    total += auc_value(scores, yte);
  }
  return total / k;
}

ModelKind choose_by_cv(double auc_glm, double auc_rf, double tolerance) {
  if (std::abs(auc_glm - auc_rf) < tolerance) return ModelKind::Glm;
  return auc_glm > auc_rf ? ModelKind::Glm : ModelKind::Forest;
}

std::vector<RegionalAgent> fit_regional_agents(std::span<const Point> features,
                                               std::span<const int> labels,
                                               const KMeansResult& regions, std::uint64_t seed,
                                               const RegionalOptions& options) {
  if (regions.assignment.size() != features.size())
    throw std::invalid_argument("regional agents: assignment length differs from training rows");
  std::vector<RegionalAgent> agents;
  for (std::size_t r = 0; r < regions.centroids.size(); ++r) {
    RegionalAgent agent;
    agent.region_id = static_cast<int>(r);
    agent.centroid = regions.centroids[r];
    std::vector<Point> x;
    std::vector<int> y;
    for (std::size_t i = 0; i < features.size(); ++i)
      if (regions.assignment[i] == static_cast<int>(r)) {
        agent.train_rows.push_back(i);
        x.push_back(features[i]);
        y.push_back(labels[i]);
      }
    agent.n_train = x.size();
    const std::uint64_t region_seed = derive_seed(seed, {tag("region"), r});
    const auto pos = std::count(y.begin(), y.end(), 1);

    if (x.empty() || pos == 0 || pos == static_cast<long>(y.size())) {
      agent.chosen_kind = ModelKind::Constant;
      agent.model = ConstantModel{x.empty() ? 0.5 : static_cast<double>(pos) / static_cast<double>(y.size())};
      agent.selection_note = "single-class region; constant rate";
      agents.push_back(std::move(agent));
      continue;
    }
    if (x.size() < options.min_rows || x.size() < 20) {
      agent.chosen_kind = ModelKind::Glm;
      agent.selection_note = "region too small for cross-validation; defaulting to GLM";
    } else {
      const auto folds = stratified_folds(y, options.folds, region_seed);
      agent.cv_auc_glm = cross_validated_auc(x, y, folds, ModelKind::Glm, options, region_seed);
      agent.cv_auc_rf = cross_validated_auc(x, y, folds, ModelKind::Forest, options, region_seed);
      if (agent.cv_auc_glm && agent.cv_auc_rf) {
        agent.chosen_kind = choose_by_cv(*agent.cv_auc_glm, *agent.cv_auc_rf, options.tie_tolerance);
        agent.selection_note = "3-fold CV AUC";
      } else {
        agent.chosen_kind = ModelKind::Glm;
        agent.selection_note = "a CV fold lacked a class; defaulting to GLM";
      }
    }
    agent.model = fit_kind(agent.chosen_kind, x, y, options, derive_seed(region_seed, {tag("refit")}));
    agents.push_back(std::move(agent));
  }
  return agents;
}

double predict_by_region(std::span<const RegionalAgent> agents, const Point& x) {
  if (agents.empty()) throw std::invalid_argument("predict_by_region: no agents");
  std::vector<Point> c;
  for (const auto& a : agents) c.push_back(a.centroid);
  return agents[static_cast<std::size_t>(nearest_centroid(c, x))].predict(x);
}

double SpecialistModel::predict(double x3) const { return clip_probability(sigmoid(alpha + gamma * x3)); }

SpecialistModel fit_specialist(std::span<const std::optional<double>> x3,
                               std::span<const int> labels, const LogisticFitOptions& options) {
  if (x3.size() != labels.size()) throw std::invalid_argument("specialist: length mismatch");
  std::vector<double> xs;
  std::vector<int> ys;
  for (std::size_t i = 0; i < x3.size(); ++i)
    if (x3[i]) {
      xs.push_back(*x3[i]);
      ys.push_back(labels[i]);
    }
  if (xs.empty()) throw std::invalid_argument("specialist: no rows with observed x3");
  if (xs.size() < 20)
    throw std::invalid_argument("specialist: need at least 20 rows with x3, got " +
                                std::to_string(xs.size()));
  Eigen::MatrixXd design(static_cast<Eigen::Index>(xs.size()), 2);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    design(static_cast<Eigen::Index>(i), 1) = xs[i];
  }
  const LogisticFit fit = fit_logistic(design, ys, {}, options);
  SpecialistModel m;
  m.alpha = fit.coefficients[0];
  m.gamma = fit.coefficients[1];
  m.converged = fit.converged;
  m.n_train = xs.size();
  return m;
}

}  // namespace nof1
