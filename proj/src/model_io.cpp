#include "nof1/model_io.hpp"

#include <stdexcept>

namespace nof1 {

using nlohmann::json;

void to_json(json& j, const QuadraticGlm& m) {
  j = {{"terms", {"1", "x1", "x1^2", "x2", "x2^2", "x1*x2"}},
       {"coefficients", m.coefficients},
       {"converged", m.converged},
       {"cap_triggered", m.cap_triggered},
       {"iterations", m.iterations}};
}

void from_json(const json& j, QuadraticGlm& m) {
  j.at("coefficients").get_to(m.coefficients);
  m.converged = j.at("converged").get<bool>();
  m.cap_triggered = j.value("cap_triggered", false);
  m.iterations = j.value("iterations", 0);
}

// Trees are stored column-wise to keep files compact.
void to_json(json& j, const ForestModel& m) {
  json trees = json::array();
  for (const auto& t : m.trees) {
    std::vector<int> feature, left, right;
    std::vector<double> threshold, value;
    for (const auto& n : t.nodes) {
      feature.push_back(n.feature);
      threshold.push_back(n.threshold);
      left.push_back(n.left);
      right.push_back(n.right);
      value.push_back(n.value);
    }
    trees.push_back({{"feature", feature}, {"threshold", threshold}, {"left", left},
                     {"right", right}, {"value", value}});
  }
  j = {{"params",
        {{"n_trees", m.params.n_trees},
         {"min_leaf", m.params.min_leaf},
         {"max_depth", m.params.max_depth},
         {"features_per_split", m.params.features_per_split},
         {"bootstrap", m.params.bootstrap}}},
       {"seed", m.seed},
       {"trees", std::move(trees)}};
}

void from_json(const json& j, ForestModel& m) {
  const auto& p = j.at("params");
  m.params.n_trees = p.at("n_trees");
  m.params.min_leaf = p.at("min_leaf");
  m.params.max_depth = p.at("max_depth");
  m.params.features_per_split = p.at("features_per_split");
  m.params.bootstrap = p.at("bootstrap");
  m.seed = j.at("seed");
  m.trees.clear();
  for (const auto& t : j.at("trees")) {
    const auto feature = t.at("feature").get<std::vector<int>>();
    const auto threshold = t.at("threshold").get<std::vector<double>>();
    const auto left = t.at("left").get<std::vector<int>>();
    const auto right = t.at("right").get<std::vector<int>>();
    const auto value = t.at("value").get<std::vector<double>>();
    DecisionTree tree;
    for (std::size_t i = 0; i < feature.size(); ++i)
      tree.nodes.push_back({feature[i], threshold[i], left[i], right[i], value[i]});
    m.trees.push_back(std::move(tree));
  }
}

void to_json(json& j, const SpecialistModel& m) {
  j = {{"alpha", m.alpha}, {"gamma", m.gamma}, {"converged", m.converged}, {"n_train", m.n_train}};
}

void from_json(const json& j, SpecialistModel& m) {
  m.alpha = j.at("alpha");
  m.gamma = j.at("gamma");
  m.converged = j.value("converged", false);
  m.n_train = j.value("n_train", std::size_t{0});
}

void to_json(json& j, const StackerModel& m) {
  j = {{"variant", stacker_variant_name(m.variant)},
       {"a0", m.a0}, {"a1", m.a1}, {"a2", m.a2}, {"b", m.b},
       {"converged", m.converged}};
}

void from_json(const json& j, StackerModel& m) {
  const auto v = j.at("variant").get<std::string>();
  if (v == "generalized")
    m.variant = StackerVariant::Generalized;
  else if (v == "reproduction")
    m.variant = StackerVariant::Reproduction;
  else
    throw std::runtime_error("unknown stacker variant '" + v + "'");
  m.a0 = j.at("a0");
  m.a1 = j.at("a1");
  m.a2 = j.at("a2");
  j.at("b").get_to(m.b);
  m.converged = j.value("converged", false);
}

void to_json(json& j, const KMeansResult& m) {
  json c = json::array();
  for (const auto& p : m.centroids) c.push_back({p.x1, p.x2});
  j = {{"centroids", std::move(c)}, {"wcss", m.wcss}};
}

void from_json(const json& j, KMeansResult& m) {
  m.centroids.clear();
  for (const auto& c : j.at("centroids")) m.centroids.push_back({c.at(0), c.at(1)});
  m.wcss = j.value("wcss", 0.0);
  m.assignment.clear();
}

void to_json(json& j, const RegionalAgent& a) {
  j = {{"region_id", a.region_id},
       {"centroid", {a.centroid.x1, a.centroid.x2}},
       {"chosen_kind", model_kind_name(a.chosen_kind)},
       {"cv_auc_glm", a.cv_auc_glm ? json(*a.cv_auc_glm) : json(nullptr)},
       {"cv_auc_rf", a.cv_auc_rf ? json(*a.cv_auc_rf) : json(nullptr)},
       {"n_train", a.n_train},
       {"selection_note", a.selection_note}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, ConstantModel>)
          j["model"] = {{"rate", m.rate}};
        else
          j["model"] = m;
      },
      a.model);
}

void from_json(const json& j, RegionalAgent& a) {
  a.region_id = j.at("region_id");
  a.centroid = {j.at("centroid").at(0), j.at("centroid").at(1)};
  const auto kind = j.at("chosen_kind").get<std::string>();
  a.n_train = j.value("n_train", std::size_t{0});
  a.selection_note = j.value("selection_note", "");
  if (!j.at("cv_auc_glm").is_null()) a.cv_auc_glm = j.at("cv_auc_glm").get<double>();
  if (!j.at("cv_auc_rf").is_null()) a.cv_auc_rf = j.at("cv_auc_rf").get<double>();
  if (kind == "glm") {
    a.chosen_kind = ModelKind::Glm;
    a.model = j.at("model").get<QuadraticGlm>();
  } else if (kind == "forest") {
    a.chosen_kind = ModelKind::Forest;
    a.model = j.at("model").get<ForestModel>();
  } else if (kind == "constant") {
    a.chosen_kind = ModelKind::Constant;
    a.model = ConstantModel{j.at("model").at("rate").get<double>()};
  } else {
    throw std::runtime_error("unknown agent model kind '" + kind + "'");
  }
}

json model_file(const std::string& kind, json model, const ModelMetadata& meta) {
  return {{"format_version", kModelFormatVersion},
          {"kind", kind},
          {"training_scope", meta.training_scope},
          {"seed", meta.seed},
          {"metrics", meta.metrics},
          {"model", std::move(model)}};
}

json read_model_file(const json& file, const std::string& expected_kind) {
  const int version = file.value("format_version", -1);
  if (version != kModelFormatVersion)
    throw std::runtime_error("model file: unsupported format_version " + std::to_string(version));
  const auto kind = file.value("kind", std::string{});
  if (kind != expected_kind)
    throw std::runtime_error("model file: expected kind '" + expected_kind + "', found '" + kind + "'");
  return file.at("model");
}

}  // namespace nof1
