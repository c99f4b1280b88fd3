#include "nof1/harness.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "nof1/model_io.hpp"
#include "nof1/parallel.hpp"
#include "nof1/textio.hpp"

namespace nof1 {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---------------------------------------------------------------------------
// Config reading

struct Reader {
  std::vector<std::string>& errors;
  std::vector<std::string>& warnings;
  std::vector<std::string>& overrides;

  static std::string join(const std::string& path, const std::string& key) {
    return path.empty() ? key : path + "." + key;
  }

  // Object at key, or nullptr when absent or mistyped (mistyped is an error).
  const json* object(const json& obj, const std::string& path, const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end()) return nullptr;
    if (!it->is_object()) {
      errors.push_back(join(path, key) + ": expected an object");
      return nullptr;
    }
    return &*it;
  }

  void unknown_keys(const json& obj, const std::string& path, std::initializer_list<const char*> known) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool found = false;
      for (const char* k : known) found = found || it.key() == k;
      if (!found) warnings.push_back("unknown key '" + join(path, it.key()) + "' ignored");
    }
  }

  const json* present(const json& obj, const std::string& path, const std::string& key) {
    auto it = obj.find(key);
    if (it == obj.end()) return nullptr;
    overrides.push_back(join(path, key));
    return &*it;
  }

  void number(const json& obj, const std::string& path, const std::string& key, double& out) {
    const json* v = present(obj, path, key);
    if (!v) return;
    if (!v->is_number()) {
      errors.push_back(join(path, key) + ": expected a number");
      return;
    }
    out = v->get<double>();
    if (!std::isfinite(out)) errors.push_back(join(path, key) + ": must be finite");
  }

  template <class Int>
  void integer(const json& obj, const std::string& path, const std::string& key, Int& out) {
    const json* v = present(obj, path, key);
    if (!v) return;
    if (!v->is_number_integer()) {
      errors.push_back(join(path, key) + ": expected an integer");
      return;
    }
    if constexpr (std::is_unsigned_v<Int>) {
      if (v->is_number_unsigned()) {
        out = v->get<Int>();
      } else {
        errors.push_back(join(path, key) + ": must be non-negative");
      }
    } else {
      const auto x = v->get<long long>();
      if (x < std::numeric_limits<Int>::min() || x > std::numeric_limits<Int>::max())
        errors.push_back(join(path, key) + ": out of range");
      else
        out = static_cast<Int>(x);
    }
  }

  void boolean(const json& obj, const std::string& path, const std::string& key, bool& out) {
    const json* v = present(obj, path, key);
    if (!v) return;
    if (!v->is_boolean())
      errors.push_back(join(path, key) + ": expected true or false");
    else
      out = v->get<bool>();
  }

  void string(const json& obj, const std::string& path, const std::string& key, std::string& out) {
    const json* v = present(obj, path, key);
    if (!v) return;
    if (!v->is_string())
      errors.push_back(join(path, key) + ": expected a string");
    else
      out = v->get<std::string>();
  }

  void point(const json& obj, const std::string& path, const std::string& key, Point& out) {
    const json* v = present(obj, path, key);
    if (!v) return;
    if (!v->is_array() || v->size() != 2 || !(*v)[0].is_number() || !(*v)[1].is_number()) {
      errors.push_back(join(path, key) + ": expected [x1, x2]");
      return;
    }
    out = {(*v)[0].get<double>(), (*v)[1].get<double>()};
  }

  void covariance(const json& obj, const std::string& path, const std::string& key, Cov2& out) {
    const json* v = present(obj, path, key);
    if (!v) return;
    auto row_ok = [](const json& r) {
      return r.is_array() && r.size() == 2 && r[0].is_number() && r[1].is_number();
    };
    if (!v->is_array() || v->size() != 2 || !row_ok((*v)[0]) || !row_ok((*v)[1])) {
      errors.push_back(join(path, key) + ": expected [[s11, s12], [s21, s22]]");
      return;
    }
    const double s12 = (*v)[0][1].get<double>(), s21 = (*v)[1][0].get<double>();
    if (s12 != s21) errors.push_back(join(path, key) + ": must be symmetric");
    out = {(*v)[0][0].get<double>(), s12, (*v)[1][1].get<double>()};
  }
};

void read_population(Reader& r, const json& root, ExperimentConfig& c) {
  const json* pop = r.object(root, "", "population");
  if (!pop) return;
  r.unknown_keys(*pop, "population", {"clusters", "outcome"});
  if (const json* o = r.object(*pop, "population", "outcome")) {
    const std::string p = "population.outcome";
    r.unknown_keys(*o, p, {"intercept", "c1", "c2", "c12", "beta3", "majority_flip"});
    auto& oc = c.population.outcome;
    r.number(*o, p, "intercept", oc.intercept);
    r.number(*o, p, "c1", oc.c1);
    r.number(*o, p, "c2", oc.c2);
    r.number(*o, p, "c12", oc.c12);
    r.number(*o, p, "beta3", oc.beta3);
    r.number(*o, p, "majority_flip", oc.majority_flip);
    // majority_flip is the default for clusters without x3; an explicit
    // per-cluster flip_rate below still wins
    if (o->contains("majority_flip"))
      for (auto& s : c.population.clusters)
        if (!s.has_x3) s.flip_rate = oc.majority_flip;
  }
  if (const json* cl = r.object(*pop, "population", "clusters")) {
    for (auto it = cl->begin(); it != cl->end(); ++it) {
      const std::string path = "population.clusters." + it.key();
      ClusterSpec* spec = nullptr;
      for (auto& s : c.population.clusters)
        if (it.key() == std::string(1, cluster_name(s.id))) spec = &s;
      if (!spec) {
        r.errors.push_back(path + ": unknown cluster (expected A, B, C or D)");
        continue;
      }
      if (!it->is_object()) {
        r.errors.push_back(path + ": expected an object");
        continue;
      }
      const json& o = *it;
      r.unknown_keys(o, path, {"mean", "covariance", "count", "has_x3", "flip_rate"});
      r.point(o, path, "mean", spec->mean);
      r.covariance(o, path, "covariance", spec->covariance);
      r.integer(o, path, "count", spec->count);
      r.boolean(o, path, "has_x3", spec->has_x3);
      r.number(o, path, "flip_rate", spec->flip_rate);
    }
  }
}

void read_models(Reader& r, const json& root, ExperimentConfig& c) {
  const json* m = r.object(root, "", "models");
  if (!m) return;
  auto& pc = c.pipeline;
  r.unknown_keys(*m, "models", {"forest", "glm", "regions", "kmeans", "cv_folds", "stacker"});
  if (const json* f = r.object(*m, "models", "forest")) {
    const std::string p = "models.forest";
    r.unknown_keys(*f, p, {"n_trees", "min_leaf", "max_depth", "features_per_split", "bootstrap"});
    r.integer(*f, p, "n_trees", pc.forest.n_trees);
    r.integer(*f, p, "min_leaf", pc.forest.min_leaf);
    r.integer(*f, p, "max_depth", pc.forest.max_depth);
    r.integer(*f, p, "features_per_split", pc.forest.features_per_split);
    r.boolean(*f, p, "bootstrap", pc.forest.bootstrap);
  }
  if (const json* g = r.object(*m, "models", "glm")) {
    const std::string p = "models.glm";
    r.unknown_keys(*g, p, {"tolerance", "max_iterations", "max_halvings", "coefficient_cap"});
    r.number(*g, p, "tolerance", pc.glm.tolerance);
    r.integer(*g, p, "max_iterations", pc.glm.max_iterations);
    r.integer(*g, p, "max_halvings", pc.glm.max_halvings);
    r.number(*g, p, "coefficient_cap", pc.glm.coefficient_cap);
  }
  r.integer(*m, "models", "regions", pc.regions);
  if (const json* k = r.object(*m, "models", "kmeans")) {
    r.unknown_keys(*k, "models.kmeans", {"restarts", "max_iterations"});
    r.integer(*k, "models.kmeans", "restarts", pc.kmeans.restarts);
    r.integer(*k, "models.kmeans", "max_iterations", pc.kmeans.max_iterations);
  }
  r.integer(*m, "models", "cv_folds", pc.cv_folds);
  if (const json* s = r.object(*m, "models", "stacker")) {
    r.unknown_keys(*s, "models.stacker", {"tail_upweight", "low_density_quantile"});
    r.number(*s, "models.stacker", "tail_upweight", pc.stacker.tail_upweight);
    r.number(*s, "models.stacker", "low_density_quantile", pc.stacker.low_density_quantile);
  }
  pc.stacker.glm = pc.glm;
}

void read_coordination(Reader& r, const json& root, ExperimentConfig& c) {
  const json* o = r.object(root, "", "coordination");
  if (!o) return;
  const std::string p = "coordination";
  auto& pc = c.pipeline;
  r.unknown_keys(*o, p,
                 {"abstention", "abstain_atyp_quantile", "abstain_disagree_threshold",
                  "specialist_routing", "conformal_alpha", "critical_discord_factor", "reliability",
                  "history_neighbors", "history_half_life"});
  r.boolean(*o, p, "abstention", pc.policy.abstention_enabled);
  r.number(*o, p, "abstain_atyp_quantile", pc.abstain_atyp_quantile);
  r.number(*o, p, "abstain_disagree_threshold", pc.policy.abstain_disagree_threshold);
  r.boolean(*o, p, "specialist_routing", pc.policy.specialist_routing);
  r.number(*o, p, "conformal_alpha", pc.policy.conformal_alpha);
  r.number(*o, p, "critical_discord_factor", pc.policy.critical_discord_factor);
  r.integer(*o, p, "history_neighbors", pc.history_neighbors);
  r.number(*o, p, "history_half_life", pc.history_half_life);
  if (const json* w = r.object(*o, p, "reliability")) {
    const std::string q = p + ".reliability";
    r.unknown_keys(*w, q, {"alpha", "beta", "gamma", "delta", "normalize"});
    r.number(*w, q, "alpha", pc.coefficients.alpha);
    r.number(*w, q, "beta", pc.coefficients.beta);
    r.number(*w, q, "gamma", pc.coefficients.gamma);
    r.number(*w, q, "delta", pc.coefficients.delta);
    r.boolean(*w, q, "normalize", pc.coefficients.normalize);
  }
}

void read_evaluation(Reader& r, const json& root, ExperimentConfig& c) {
  const json* o = r.object(root, "", "evaluation");
  if (!o) return;
  const std::string p = "evaluation";
  r.unknown_keys(*o, p,
                 {"tail_fraction", "knn_k", "density_epsilon", "bootstrap", "ece_bins",
                  "rc_coverage", "ablations"});
  r.number(*o, p, "tail_fraction", c.pipeline.tail_fraction);
  r.integer(*o, p, "knn_k", c.pipeline.knn_k);
  r.number(*o, p, "density_epsilon", c.pipeline.density_epsilon);
  r.integer(*o, p, "bootstrap", c.evaluation.bootstrap);
  r.integer(*o, p, "ece_bins", c.evaluation.ece_bins);
  r.number(*o, p, "rc_coverage", c.evaluation.rc_coverage);
  if (const json* a = r.present(*o, p, "ablations")) {
    if (!a->is_array()) {
      r.errors.push_back("evaluation.ablations: expected an array of variant names");
    } else {
      c.ablations.clear();
      for (const auto& v : *a) {
        const auto parsed = v.is_string() ? parse_variant(v.get<std::string>()) : std::nullopt;
        if (!parsed)
          r.errors.push_back("evaluation.ablations: unknown variant " + v.dump());
        else if (std::find(c.ablations.begin(), c.ablations.end(), *parsed) == c.ablations.end())
          c.ablations.push_back(*parsed);
      }
    }
  }
}

std::string now_utc_stamp() {
  const std::time_t t = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y%m%dT%H%M%SZ", &tm);
  return buf;
}

// Creates <parent>/<base>, appending _2, _3, ... when it already exists.
fs::path fresh_directory(const fs::path& parent, const std::string& base) {
  fs::create_directories(parent);
  fs::path dir = parent / base;
  for (int i = 2; fs::exists(dir); ++i) dir = parent / (base + "_" + std::to_string(i));
  fs::create_directories(dir);
  return dir;
}

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    throw std::runtime_error("sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

std::string num(double v) { return format_number(v); }
std::string num(std::optional<double> v) { return v ? format_number(*v) : "NA"; }

class Csv {
 public:
  explicit Csv(std::initializer_list<std::string> header) { row(std::vector<std::string>(header)); }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }
  std::string str() const { return out_.str(); }

 private:
  std::ostringstream out_;
};

// Files of a run directory plus their checksums, in write order.
class Emitter {
 public:
  explicit Emitter(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, const std::string& content) {
    const fs::path path = dir_ / name;
    fs::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    f << content;
    if (!f) throw std::runtime_error("cannot write " + path.string());
    inventory_.push_back({{"file", name}, {"bytes", content.size()}, {"sha256", sha256_hex(content)}});
  }

  const json& inventory() const { return inventory_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  json inventory_ = json::array();
};

template <class T>
std::vector<T> pick(const std::vector<T>& v, const std::vector<std::size_t>& idx) {
  std::vector<T> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

std::vector<int> pick_labels(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
  return pick(v, idx);
}

bool both_classes(std::span<const int> y) {
  bool pos = false, neg = false;
  for (int v : y) (v ? pos : neg) = true;
  return pos && neg;
}

struct SubsetComparison {
  std::size_t n = 0;
  std::optional<AucResult> auc_mono, auc_multi;
  std::optional<DeLongResult> delong;
  double acc_mono = kNaN, acc_multi = kNaN;
};

SubsetComparison compare(const std::vector<double>& mono, const std::vector<double>& multi,
                         const std::vector<int>& y) {
  SubsetComparison c;
  c.n = y.size();
  if (c.n == 0) return c;
  c.acc_mono = accuracy(mono, y);
  c.acc_multi = accuracy(multi, y);
  if (both_classes(y)) {
    c.auc_mono = auc(mono, y);
    c.auc_multi = auc(multi, y);
    c.delong = delong_paired(multi, mono, y);
  }
  return c;
}

double auc_or_nan(const std::optional<AucResult>& a) { return a ? a->auc : kNaN; }

json timings_json(const StageTimings& t) {
  json out = json::array();
  for (const auto& [name, s] : t.stages) out.push_back({{"stage", name}, {"seconds", s}});
  return out;
}

json agent_summary(const RegionalAgent& a) {
  return {{"region_id", a.region_id},
          {"centroid", {a.centroid.x1, a.centroid.x2}},
          {"chosen_kind", model_kind_name(a.chosen_kind)},
          {"n_train", a.n_train},
          {"cv_auc_glm", a.cv_auc_glm ? json(*a.cv_auc_glm) : json(nullptr)},
          {"cv_auc_rf", a.cv_auc_rf ? json(*a.cv_auc_rf) : json(nullptr)},
          {"selection_note", a.selection_note}};
}

void write_models(Emitter& em, const FittedPipeline& fp, std::uint64_t seed, bool full) {
  auto dump = [&](const std::string& file, const std::string& kind, json model, ModelMetadata meta) {
    meta.seed = seed;
    em.write("models/" + file, model_file(kind, std::move(model), meta).dump(1) + "\n");
  };
  dump("monolith_glm.json", "quadratic_glm", fp.monolith.glm, {"train split, all clusters", 0, {}});
  if (full)
    dump("monolith_forest.json", "forest", fp.monolith.forest, {"train split, all clusters", 0, {}});
  dump("regions.json", "kmeans", fp.regions, {"train split, (x1, x2)", 0, {}});
  for (const auto& a : fp.agents) {
    json j = a;
    if (!full && a.chosen_kind == ModelKind::Forest) j["model"] = {{"omitted", "use --save-models"}};
    json metrics = {{"cv_auc_glm", j["cv_auc_glm"]}, {"cv_auc_rf", j["cv_auc_rf"]}};
    dump("agent_region" + std::to_string(a.region_id) + ".json", "regional_agent", std::move(j),
         {"train split, region " + std::to_string(a.region_id) + " (" + std::to_string(a.n_train) +
              " rows)",
          0, metrics});
  }
  dump("specialist.json", "specialist", fp.specialist, {"train split, rows with x3", 0, {}});
  dump("stacker.json", "stacker", fp.stacker.model,
       {"validation split", 0,
        {{"density_cutoff", fp.stacker.density_cutoff},
         {"upweighted_rows", fp.stacker.upweighted_rows}}});
}

json manifest_base(const ExperimentConfig& config) {
  json m;
  m["schema_version"] = 1;
  m["tool"] = "nof1";
  m["model_version"] = kModelVersion;
  m["config_schema_version"] = kConfigSchemaVersion;
  m["model_format_version"] = kModelFormatVersion;
  m["seed"] = config.seed;
  m["config"] = config_to_json(config);
  m["overrides"] = config.overrides;
  m["warnings"] = config.warnings;
  return m;
}

// Facts about this particular execution; kept out of manifest.json so that
// the manifest is as reproducible as the rest of the run directory.
json run_info_base(const std::string& directory) {
  return {{"directory", directory}, {"started_utc", now_utc_stamp()}, {"threads", thread_count()}};
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream f(path, std::ios::binary);
  f << j.dump(2) << "\n";
  if (!f) throw std::runtime_error("cannot write " + path.string());
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<std::string> check_config(const ExperimentConfig& c) {
  std::vector<std::string> errors;
  auto expect = [&](bool ok, const std::string& msg) {
    if (!ok) errors.push_back(msg);
  };
  if (c.population.clusters.size() != 4) {
    errors.push_back("population: exactly 4 cluster specs required (A-D)");
  } else {
    for (const auto& s : c.population.clusters) {
      try {
        s.validate();
      } catch (const std::exception& e) {
        errors.push_back(std::string("population: ") + e.what());
      }
    }
  }
  try {
    c.population.outcome.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("population.") + e.what());
  }
  const auto& s = c.split;
  expect(s.train > 0 && s.validation > 0 && s.test > 0 &&
             std::abs(s.train + s.validation + s.test - 1.0) < 1e-9,
         "split: ratios must be positive and sum to 1");
  const auto& p = c.pipeline;
  expect(p.forest.n_trees >= 1, "models.forest.n_trees must be >= 1");
  expect(p.forest.min_leaf >= 1, "models.forest.min_leaf must be >= 1");
  expect(p.forest.max_depth >= 1, "models.forest.max_depth must be >= 1");
  expect(p.forest.features_per_split >= 1 && p.forest.features_per_split <= 2,
         "models.forest.features_per_split ∈ [1, 2]");
  expect(p.glm.tolerance > 0, "models.glm.tolerance must be positive");
  expect(p.glm.max_iterations >= 1, "models.glm.max_iterations must be >= 1");
  expect(p.glm.max_halvings >= 0, "models.glm.max_halvings must be >= 0");
  expect(p.glm.coefficient_cap > 0, "models.glm.coefficient_cap must be positive");
  expect(p.regions >= 1, "models.regions must be >= 1");
  expect(p.kmeans.restarts >= 1, "models.kmeans.restarts must be >= 1");
  expect(p.kmeans.max_iterations >= 1, "models.kmeans.max_iterations must be >= 1");
  expect(p.cv_folds >= 2, "models.cv_folds must be >= 2");
  expect(p.stacker.tail_upweight > 0, "models.stacker.tail_upweight must be positive");
  expect(p.stacker.low_density_quantile >= 0 && p.stacker.low_density_quantile <= 1,
         "models.stacker.low_density_quantile ∈ [0, 1]");
  try {
    p.policy.validate();
  } catch (const std::exception& e) {
    errors.push_back(std::string("coordination: ") + e.what());
  }
  expect(p.abstain_atyp_quantile > 0 && p.abstain_atyp_quantile <= 1,
         "coordination.abstain_atyp_quantile ∈ (0, 1]");
  for (double v : {p.coefficients.alpha, p.coefficients.beta, p.coefficients.gamma, p.coefficients.delta})
    expect(v >= 0, "coordination.reliability coefficients must be non-negative");
  expect(p.history_neighbors >= 1, "coordination.history_neighbors must be >= 1");
  expect(p.history_half_life > 0, "coordination.history_half_life must be positive");
  expect(p.tail_fraction > 0 && p.tail_fraction < 1, "evaluation.tail_fraction ∈ (0, 1)");
  expect(p.knn_k >= 1, "evaluation.knn_k must be >= 1");
  expect(p.density_epsilon > 0, "evaluation.density_epsilon must be positive");
  expect(c.evaluation.bootstrap >= 0, "evaluation.bootstrap must be >= 0");
  expect(c.evaluation.ece_bins >= 1, "evaluation.ece_bins must be >= 1");
  expect(c.evaluation.rc_coverage > 0 && c.evaluation.rc_coverage <= 1,
         "evaluation.rc_coverage ∈ (0, 1]");
  expect(!c.ablations.empty(), "evaluation.ablations must list at least one variant");
  expect(!c.output_dir.empty(), "output_dir must not be empty");
  return errors;
}

ConfigValidation validate_config(const std::string& text) {
  ConfigValidation out;
  ExperimentConfig c;
  json root;
  bool blank = std::all_of(text.begin(), text.end(), [](unsigned char ch) { return std::isspace(ch); });
  if (blank) {
    root = json::object();
  } else {
    try {
      root = json::parse(text);
    } catch (const json::exception& e) {
      out.errors.push_back(std::string("malformed JSON: ") + e.what());
      return out;
    }
  }
  if (!root.is_object()) {
    out.errors.push_back("config root must be a JSON object");
    return out;
  }
  Reader r{out.errors, out.warnings, c.overrides};
  r.unknown_keys(root, "",
                 {"schema_version", "seed", "output_dir", "population", "split", "models",
                  "coordination", "evaluation"});
  if (auto it = root.find("schema_version"); it != root.end()) {
    if (!it->is_number_integer() || it->get<long long>() != kConfigSchemaVersion)
      out.errors.push_back("schema_version: only version " + std::to_string(kConfigSchemaVersion) +
                           " is supported");
  }
  r.integer(root, "", "seed", c.seed);
  r.string(root, "", "output_dir", c.output_dir);
  read_population(r, root, c);
  if (const json* s = r.object(root, "", "split")) {
    r.unknown_keys(*s, "split", {"train", "validation", "test"});
    r.number(*s, "split", "train", c.split.train);
    r.number(*s, "split", "validation", c.split.validation);
    r.number(*s, "split", "test", c.split.test);
  }
  read_models(r, root, c);
  read_coordination(r, root, c);
  read_evaluation(r, root, c);
  for (auto& e : check_config(c))
    if (std::find(out.errors.begin(), out.errors.end(), e) == out.errors.end()) out.errors.push_back(e);
  c.warnings = out.warnings;
  if (out.errors.empty()) out.config = std::move(c);
  return out;
}

json config_to_json(const ExperimentConfig& c) {
  json clusters = json::object();
  for (const auto& s : c.population.clusters)
    clusters[std::string(1, cluster_name(s.id))] = {
        {"mean", {s.mean.x1, s.mean.x2}},
        {"covariance", {{s.covariance.s11, s.covariance.s12}, {s.covariance.s12, s.covariance.s22}}},
        {"count", s.count},
        {"has_x3", s.has_x3},
        {"flip_rate", s.flip_rate}};
  const auto& o = c.population.outcome;
  const auto& p = c.pipeline;
  json ablations = json::array();
  for (Variant v : c.ablations) ablations.push_back(variant_name(v));
  return {
      {"schema_version", kConfigSchemaVersion},
      {"seed", c.seed},
      {"output_dir", c.output_dir},
      {"population",
       {{"clusters", clusters},
        {"outcome",
         {{"intercept", o.intercept}, {"c1", o.c1}, {"c2", o.c2}, {"c12", o.c12},
          {"beta3", o.beta3}, {"majority_flip", o.majority_flip}}}}},
      {"split", {{"train", c.split.train}, {"validation", c.split.validation}, {"test", c.split.test}}},
      {"models",
       {{"forest",
         {{"n_trees", p.forest.n_trees}, {"min_leaf", p.forest.min_leaf},
          {"max_depth", p.forest.max_depth}, {"features_per_split", p.forest.features_per_split},
          {"bootstrap", p.forest.bootstrap}}},
        {"glm",
         {{"tolerance", p.glm.tolerance}, {"max_iterations", p.glm.max_iterations},
          {"max_halvings", p.glm.max_halvings}, {"coefficient_cap", p.glm.coefficient_cap}}},
        {"regions", p.regions},
        {"kmeans", {{"restarts", p.kmeans.restarts}, {"max_iterations", p.kmeans.max_iterations}}},
        {"cv_folds", p.cv_folds},
        {"stacker",
         {{"tail_upweight", p.stacker.tail_upweight},
          {"low_density_quantile", p.stacker.low_density_quantile}}}}},
      {"coordination",
       {{"abstention", p.policy.abstention_enabled},
        {"abstain_atyp_quantile", p.abstain_atyp_quantile},
        {"abstain_disagree_threshold", p.policy.abstain_disagree_threshold},
        {"specialist_routing", p.policy.specialist_routing},
        {"conformal_alpha", p.policy.conformal_alpha},
        {"critical_discord_factor", p.policy.critical_discord_factor},
        {"reliability",
         {{"alpha", p.coefficients.alpha}, {"beta", p.coefficients.beta},
          {"gamma", p.coefficients.gamma}, {"delta", p.coefficients.delta},
          {"normalize", p.coefficients.normalize}}},
        {"history_neighbors", p.history_neighbors},
        {"history_half_life", p.history_half_life}}},
      {"evaluation",
       {{"tail_fraction", p.tail_fraction}, {"knn_k", p.knn_k},
        {"density_epsilon", p.density_epsilon}, {"bootstrap", c.evaluation.bootstrap},
        {"ece_bins", c.evaluation.ece_bins}, {"rc_coverage", c.evaluation.rc_coverage},
        {"ablations", ablations}}}};
}

std::vector<std::pair<std::string, double>> RunMetrics::named() const {
  std::vector<std::pair<std::string, double>> v{
      {"auc_overall_mono", auc_overall_mono},
      {"auc_overall_multi", auc_overall_multi},
      {"delta_auc_overall", auc_overall_multi - auc_overall_mono},
      {"delong_p_overall", delong_p_overall},
      {"acc_overall_mono", acc_overall_mono},
      {"acc_overall_multi", acc_overall_multi},
      {"delta_acc_overall", acc_overall_multi - acc_overall_mono},
      {"auc_tail_mono", auc_tail_mono},
      {"auc_tail_multi", auc_tail_multi},
      {"delta_auc_tail", auc_tail_multi - auc_tail_mono},
      {"delong_p_tail", delong_p_tail},
      {"acc_tail_mono", acc_tail_mono},
      {"acc_tail_multi", acc_tail_multi},
      {"delta_acc_tail", acc_tail_multi - acc_tail_mono},
      {"auc_d_mono", auc_d_mono},
      {"auc_d_multi", auc_d_multi},
      {"delta_auc_d", auc_d_multi - auc_d_mono},
      {"delong_p_d", delong_p_d},
      {"acc_d_mono", acc_d_mono},
      {"acc_d_multi", acc_d_multi},
      {"ece_tail_mono", ece_tail_mono},
      {"ece_tail_multi", ece_tail_multi},
      {"rc_error_mono", rc_error_mono},
      {"rc_error_multi", rc_error_multi},
      {"rc_advantage", rc_error_mono - rc_error_multi},
      {"boot_auc_overall_p2_5", boot_auc_overall_p2_5},
      {"boot_auc_overall_p97_5", boot_auc_overall_p97_5},
      {"boot_auc_tail_p2_5", boot_auc_tail_p2_5},
      {"abstained", static_cast<double>(abstained)},
  };
  for (const auto& a : ablations) {
    const std::string n = variant_name(a.variant);
    v.emplace_back(n + "_auc_overall", a.auc_overall);
    v.emplace_back(n + "_acc_overall", a.acc_overall);
    v.emplace_back(n + "_auc_tail", a.auc_tail);
    v.emplace_back(n + "_acc_tail", a.acc_tail);
  }
  return v;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return sha256_hex(ss.str());
}

// ---------------------------------------------------------------------------

RunResult run_experiment(const ExperimentConfig& config, const RunOptions& options) {
  RunResult result;
  StageTimings timings;
  std::string current = "validate";
  std::optional<Emitter> em;
  json manifest;

  auto stage = [&](const std::string& name, auto&& f) {
    current = name;
    return timings.time(name, f);
  };

  try {
    if (auto errs = check_config(config); !errs.empty()) {
      std::string msg = "invalid config:";
      for (auto& e : errs) msg += " " + e + ";";
      throw ConfigError(msg);
    }
    const std::uint64_t seed = config.seed;
    const std::string run_name =
        options.run_name.value_or("seed" + std::to_string(seed) + "_" + now_utc_stamp());
    manifest = manifest_base(config);
    result.run_info = run_info_base(run_name);
    if (options.write_outputs) {
      current = "prepare";
      const fs::path parent(config.output_dir);
      em.emplace(fresh_directory(parent, run_name));
      result.run_dir = em->dir();
      result.run_info["directory"] = result.run_dir.filename().string();
    }

    const Dataset data = stage("generate", [&] { return generate_population(config.population, seed); });
    const SplitAssignment split = stage("split", [&] {
      return stratified_split(data, config.split, derive_seed(seed, {tag("split")}));
    });

    current = "fit";
    const FittedPipeline fp = fit_pipeline(data, split, config.pipeline, seed, &timings);

    const auto& test = split.test;
    const ScoredRows sc = stage("score", [&] { return score_rows(fp, data, test); });
    const std::size_t n = test.size();

    // Decision packets under the configured policy (abstention as configured).
    std::vector<DecisionPacket> packets = stage("coordinate", [&] {
      std::vector<DecisionPacket> out(n);
      const CoordinationContext ctx = fp.context();
      parallel_for(n, [&](std::size_t i) {
        const Patient pt = make_patient(data[test[i]]);
        const auto reports = agent_reports(fp.agents, pt.x, ctx.history);
        out[i] = coordinate(pt, reports, fp.policy, ctx);
      });
      return out;
    });

    RunMetrics& rm = result.metrics;
    rm.seed = seed;
    rm.test_rows = n;
    std::vector<double> m(n);
    for (std::size_t i = 0; i < n; ++i) m[i] = sc.meta[i].atyp;
    const TailSelection tail = select_tail(m, config.pipeline.tail_fraction);
    std::vector<bool> in_tail(n, false);
    for (auto i : tail.indices) in_tail[i] = true;
    std::vector<std::size_t> d_rows;
    for (std::size_t i = 0; i < n; ++i)
      if (sc.cluster[i] == Cluster::D) d_rows.push_back(i);

    SubsetComparison overall, tail_cmp, d_cmp;
    CalibrationReport ece_mono, ece_multi;
    RiskCoverageCurve rc_mono, rc_multi;
    std::vector<ClusterMetrics> pc_mono, pc_multi;
    stage("evaluate", [&] {
      overall = compare(sc.mono, sc.multi, sc.y);
      const auto yt = pick_labels(sc.y, tail.indices);
      tail_cmp = compare(pick(sc.mono, tail.indices), pick(sc.multi, tail.indices), yt);
      d_cmp = compare(pick(sc.mono, d_rows), pick(sc.multi, d_rows), pick_labels(sc.y, d_rows));
      ece_mono = ece_quantile(pick(sc.mono, tail.indices), yt, config.evaluation.ece_bins);
      ece_multi = ece_quantile(pick(sc.multi, tail.indices), yt, config.evaluation.ece_bins);
      rc_mono = risk_coverage(sc.mono, sc.y, sc.x3_present);
      rc_multi = risk_coverage(sc.multi, sc.y, sc.x3_present);
      pc_mono = per_cluster_metrics(sc.cluster, sc.y, sc.mono);
      pc_multi = per_cluster_metrics(sc.cluster, sc.y, sc.multi);
      std::vector<Variant> variants = config.ablations;
      rm.ablations = run_ablations(sc, config.pipeline.tail_fraction, variants);
    });
    rm.auc_overall_mono = auc_or_nan(overall.auc_mono);
    rm.auc_overall_multi = auc_or_nan(overall.auc_multi);
    rm.delong_p_overall = overall.delong ? overall.delong->p : kNaN;
    rm.acc_overall_mono = overall.acc_mono;
    rm.acc_overall_multi = overall.acc_multi;
    rm.auc_tail_mono = auc_or_nan(tail_cmp.auc_mono);
    rm.auc_tail_multi = auc_or_nan(tail_cmp.auc_multi);
    rm.delong_p_tail = tail_cmp.delong ? tail_cmp.delong->p : kNaN;
    rm.acc_tail_mono = tail_cmp.acc_mono;
    rm.acc_tail_multi = tail_cmp.acc_multi;
    rm.auc_d_mono = auc_or_nan(d_cmp.auc_mono);
    rm.auc_d_multi = auc_or_nan(d_cmp.auc_multi);
    rm.delong_p_d = d_cmp.delong ? d_cmp.delong->p : kNaN;
    rm.acc_d_mono = d_cmp.acc_mono;
    rm.acc_d_multi = d_cmp.acc_multi;
    rm.ece_tail_mono = ece_mono.ece;
    rm.ece_tail_multi = ece_multi.ece;
    rm.rc_error_mono = rc_mono.error_at(config.evaluation.rc_coverage);
    rm.rc_error_multi = rc_multi.error_at(config.evaluation.rc_coverage);
    for (const auto& p : packets) rm.abstained += p.route == Route::Abstain;

    BootstrapSummary boot;
    if (config.evaluation.bootstrap > 0) {
      boot = stage("bootstrap", [&] {
        BootstrapInput in{sc.y, m, sc.mono, sc.multi, config.pipeline.tail_fraction};
        return paired_bootstrap(in, config.evaluation.bootstrap, derive_seed(seed, {tag("bootstrap")}));
      });
      for (const auto& d : boot.deltas) {
        if (d.metric == "dAUC_overall") {
          rm.boot_auc_overall_p2_5 = d.p2_5;
          rm.boot_auc_overall_p97_5 = d.p97_5;
        } else if (d.metric == "dAUC_tail") {
          rm.boot_auc_tail_p2_5 = d.p2_5;
        }
      }
    } else {
      rm.boot_auc_overall_p2_5 = rm.boot_auc_overall_p97_5 = rm.boot_auc_tail_p2_5 = kNaN;
    }

    if (em) {
      stage("emit", [&] {
        std::ostringstream ds;
        write_dataset_csv(ds, data, split);
        em->write("dataset.csv", ds.str());

        // headline comparison: overall, tail, cluster D
        Csv t1({"setting", "metric", "n", "monolith", "multi_agent", "delta", "p_value",
                "monolith_ci_lower", "monolith_ci_upper", "multi_ci_lower", "multi_ci_upper"});
        auto t1_rows = [&](const std::string& setting, const SubsetComparison& c) {
          const double am = auc_or_nan(c.auc_mono), aa = auc_or_nan(c.auc_multi);
          t1.row({setting, "AUC", std::to_string(c.n), num(am), num(aa), num(aa - am),
                  c.delong ? num(c.delong->p) : "NA",
                  c.auc_mono ? num(c.auc_mono->ci_lower) : "NA",
                  c.auc_mono ? num(c.auc_mono->ci_upper) : "NA",
                  c.auc_multi ? num(c.auc_multi->ci_lower) : "NA",
                  c.auc_multi ? num(c.auc_multi->ci_upper) : "NA"});
          t1.row({setting, "Accuracy", std::to_string(c.n), num(c.acc_mono), num(c.acc_multi),
                  num(c.acc_multi - c.acc_mono), "NA", "NA", "NA", "NA", "NA"});
        };
        t1_rows("Overall", overall);
        t1_rows("Tail", tail_cmp);
        t1_rows("Cluster D", d_cmp);
        em->write("table_1.csv", t1.str());

        Csv t2({"cluster", "n", "auc_monolith", "auc_multi_agent", "acc_monolith", "acc_multi_agent"});
        for (std::size_t k = 0; k < pc_mono.size(); ++k)
          t2.row({std::string(1, cluster_name(pc_mono[k].cluster)), std::to_string(pc_mono[k].n), num(pc_mono[k].auc),
                  num(pc_multi[k].auc), num(pc_mono[k].accuracy), num(pc_multi[k].accuracy)});
        em->write("table_2.csv", t2.str());

        Csv t3({"model", "auc_overall", "acc_overall", "auc_tail", "acc_tail"});
        for (const auto& a : rm.ablations)
          t3.row({variant_name(a.variant), num(a.auc_overall), num(a.acc_overall), num(a.auc_tail),
                  num(a.acc_tail)});
        em->write("table_3.csv", t3.str());

        Csv t4({"metric", "p2_5", "median", "p97_5", "p_value", "no_crossings"});
        for (const auto& d : boot.deltas)
          t4.row({d.metric, num(d.p2_5), num(d.median), num(d.p97_5), num(d.p),
                  d.no_crossings ? "true" : "false"});
        em->write("table_4.csv", t4.str());

        Csv f1({"patient_id", "rho", "atyp", "in_tail", "y", "p_monolith", "p_multi_agent",
                "error_monolith", "error_multi_agent"});
        for (std::size_t i = 0; i < n; ++i)
          f1.row({std::to_string(data[test[i]].id), num(sc.meta[i].rho), num(sc.meta[i].atyp),
                  in_tail[i] ? "1" : "0", std::to_string(sc.y[i]), num(sc.mono[i]), num(sc.multi[i]),
                  num(std::abs(sc.y[i] - sc.mono[i])), num(std::abs(sc.y[i] - sc.multi[i]))});
        em->write("fig_error_vs_density.csv", f1.str());

        Csv f2({"coverage", "error_monolith", "error_multi_agent"});
        const auto sm = rc_mono.summary(), sa = rc_multi.summary();
        for (std::size_t k = 0; k < sm.size(); ++k)
          f2.row({num(sm[k].coverage), num(sm[k].error), num(sa[k].error)});
        em->write("fig_risk_coverage.csv", f2.str());
        Csv f2full({"kept", "coverage", "error_monolith", "error_multi_agent"});
        for (std::size_t k = 0; k < rc_mono.points.size(); ++k)
          f2full.row({std::to_string(k + 1), num(rc_mono.points[k].coverage),
                      num(rc_mono.points[k].error), num(rc_multi.points[k].error)});
        em->write("fig_risk_coverage_full.csv", f2full.str());

        Csv f3({"system", "bin", "n", "mean_predicted", "empirical_rate", "ece"});
        auto bins = [&](const std::string& sys, const CalibrationReport& r) {
          for (std::size_t b = 0; b < r.bins.size(); ++b)
            f3.row({sys, std::to_string(b + 1), std::to_string(r.bins[b].count),
                    num(r.bins[b].mean_predicted), num(r.bins[b].empirical_rate), num(r.ece)});
        };
        bins("monolith", ece_mono);
        bins("multi_agent", ece_multi);
        em->write("fig_tail_calibration.csv", f3.str());

        Csv f4({"patient_id", "x3", "y", "p_specialist", "p_monolith", "p_multi_agent"});
        for (auto i : d_rows) {
          const auto& ind = data[test[i]];
          f4.row({std::to_string(ind.id), num(ind.x3), std::to_string(sc.y[i]),
                  ind.x3 ? num(fp.specialist.predict(*ind.x3)) : "NA", num(sc.mono[i]), num(sc.multi[i])});
        }
        em->write("fig_d_x3_diagnostic.csv", f4.str());

        Csv f5({"system", "threshold", "fpr", "tpr"});
        const auto yd = pick_labels(sc.y, d_rows);
        if (both_classes(yd)) {
          for (const auto& [sys, s] : {std::pair{"monolith", &sc.mono}, std::pair{"multi_agent", &sc.multi}})
            for (const auto& pt : roc_curve(pick(*s, d_rows), yd))
              f5.row({sys, num(pt.threshold), num(pt.fpr), num(pt.tpr)});
        }
        em->write("fig_d_roc.csv", f5.str());

        Csv f6({"setting", "metric", "monolith", "multi_agent", "delta"});
        for (const auto& [setting, c] : {std::pair{"Population", &overall}, std::pair{"Tail", &tail_cmp}}) {
          const double am = auc_or_nan(c->auc_mono), aa = auc_or_nan(c->auc_multi);
          f6.row({setting, "AUC", num(am), num(aa), num(aa - am)});
          f6.row({setting, "Accuracy", num(c->acc_mono), num(c->acc_multi), num(c->acc_multi - c->acc_mono)});
        }
        em->write("fig_population_vs_tail.csv", f6.str());

        // One packet per test patient, with every system's score so the
        // tables can be recomputed from this file and dataset.csv.
        std::string log;
        for (std::size_t i = 0; i < n; ++i) {
          json j = packet_to_json(packets[i], make_patient(data[test[i]]));
          j["in_tail"] = static_cast<bool>(in_tail[i]);
          json scores = json::object();
          for (Variant v : kAllVariants) scores[variant_name(v)] = sc.scores(v)[i];
          j["scores"] = std::move(scores);
          log += j.dump() + "\n";
        }
        em->write("decisions.jsonl", log);

        if (fp.policy.abstention_enabled) {
          std::size_t abst_tail = 0, discord = 0, kept = 0, kept_err = 0;
          for (std::size_t i = 0; i < n; ++i) {
            const auto& p = packets[i];
            discord += p.explanation.critical_discord;
            if (p.route == Route::Abstain) {
              abst_tail += in_tail[i];
            } else {
              ++kept;
              kept_err += (*p.p >= 0.5) != (sc.y[i] == 1);
            }
          }
          Csv ab({"metric", "value"});
          ab.row({"test_rows", std::to_string(n)});
          ab.row({"abstained", std::to_string(rm.abstained)});
          ab.row({"abstention_rate", num(static_cast<double>(rm.abstained) / n)});
          ab.row({"abstained_in_tail", std::to_string(abst_tail)});
          ab.row({"kept_error", kept ? num(static_cast<double>(kept_err) / kept) : "NA"});
          ab.row({"critical_discord", std::to_string(discord)});
          ab.row({"atyp_threshold", num(fp.policy.abstain_atyp_threshold)});
          ab.row({"disagree_threshold", num(fp.policy.abstain_disagree_threshold)});
          em->write("abstention_summary.csv", ab.str());
        }

        Csv mc({"metric", "value"});
        for (const auto& [k, v] : rm.named()) mc.row({k, num(v)});
        em->write("metrics.csv", mc.str());

        write_models(*em, fp, seed, options.save_models);
      });
    }

    json agents = json::array();
    for (const auto& a : fp.agents) agents.push_back(agent_summary(a));
    manifest["fitted"] = {
        {"agents", agents},
        {"abstain_atyp_threshold", fp.policy.abstain_atyp_threshold},
        {"conformal_quantile", fp.conformal ? json(fp.conformal->quantile()) : json(nullptr)},
        {"stacker_density_cutoff", fp.stacker.density_cutoff},
        {"stacker_upweighted_rows", fp.stacker.upweighted_rows},
        {"tail_rows", tail.indices.size()},
        {"tail_threshold", tail.threshold}};
    manifest["bootstrap"] = {{"resamples", boot.resamples}, {"redraws", boot.redraws}, {"notes", boot.notes}};
    manifest["calibration_notes"] = ece_multi.notes;
    manifest["status"] = "ok";
  } catch (const std::exception& e) {
    const auto* se = dynamic_cast<const StageError*>(&e);
    const std::string failed = se ? se->stage() : current;
    if (manifest.is_null()) manifest = manifest_base(config);
    manifest["status"] = "failed";
    manifest["failed_stage"] = failed;
    manifest["error"] = e.what();
    result.run_info["timings"] = timings_json(timings);
    if (em) {
      manifest["outputs"] = em->inventory();
      write_json(em->dir() / "manifest.json", manifest);
      write_json(em->dir() / "run_info.json", result.run_info);
    }
    if (se) throw;
    throw StageError(failed, e.what());
  }

  result.run_info["timings"] = timings_json(timings);
  if (em) {
    manifest["outputs"] = em->inventory();
    write_json(em->dir() / "manifest.json", manifest);
    write_json(em->dir() / "run_info.json", result.run_info);
  }
  result.manifest = std::move(manifest);
  return result;
}

std::vector<MetricSummary> summarize(const std::vector<RunMetrics>& runs) {
  std::vector<MetricSummary> out;
  if (runs.empty()) return out;
  const auto names = runs.front().named();
  for (std::size_t k = 0; k < names.size(); ++k) {
    std::vector<double> v;
    for (const auto& r : runs) {
      const auto nv = r.named();
      if (k < nv.size() && nv[k].first == names[k].first && std::isfinite(nv[k].second))
        v.push_back(nv[k].second);
    }
    MetricSummary s;
    s.metric = names[k].first;
    s.n = v.size();
    if (v.empty()) {
      s.median = s.q1 = s.q3 = s.min = s.max = kNaN;
    } else {
      s.median = quantile(v, 0.5);
      s.q1 = quantile(v, 0.25);
      s.q3 = quantile(v, 0.75);
      s.min = *std::min_element(v.begin(), v.end());
      s.max = *std::max_element(v.begin(), v.end());
    }
    out.push_back(std::move(s));
  }
  return out;
}

MultiSeedResult run_multi_seed(const ExperimentConfig& config, int n_seeds, const RunOptions& options) {
  if (n_seeds < 1) throw ConfigError("multi: n_seeds must be >= 1");
  MultiSeedResult res;
  ExperimentConfig cfg = config;
  if (options.write_outputs) {
    res.dir = fresh_directory(config.output_dir,
                              options.run_name.value_or("multi_seed" + std::to_string(config.seed) + "_" +
                                                        now_utc_stamp()));
    cfg.output_dir = res.dir.string();
  }
  std::vector<RunMetrics> ok;
  for (int s = 0; s < n_seeds; ++s) {
    cfg.seed = config.seed + static_cast<std::uint64_t>(s);
    RunOptions ro = options;
    ro.run_name = "seed" + std::to_string(cfg.seed);
    SeedOutcome so;
    so.seed = cfg.seed;
    try {
      RunResult r = run_experiment(cfg, ro);
      so.metrics = r.metrics;
      so.run_dir = r.run_dir;
      ok.push_back(r.metrics);
    } catch (const std::exception& e) {
      so.error = e.what();
    }
    res.seeds.push_back(std::move(so));
  }
  res.summary = summarize(ok);
  if (options.write_outputs) {
    Emitter em(res.dir);
    std::ostringstream per;
    per << "seed,status";
    const auto names = ok.empty() ? std::vector<std::pair<std::string, double>>{} : ok.front().named();
    for (const auto& [k, v] : names) per << "," << k;
    per << "\n";
    for (const auto& so : res.seeds) {
      per << so.seed << "," << (so.metrics ? "ok" : "failed");
      if (so.metrics) {
        for (const auto& [k, v] : so.metrics->named()) per << "," << num(v);
      } else {
        for (std::size_t k = 0; k < names.size(); ++k) per << ",NA";
      }
      per << "\n";
    }
    em.write("per_seed_metrics.csv", per.str());
    Csv sum({"metric", "n", "median", "q1", "q3", "iqr", "min", "max"});
    for (const auto& s : res.summary)
      sum.row({s.metric, std::to_string(s.n), num(s.median), num(s.q1), num(s.q3), num(s.q3 - s.q1),
               num(s.min), num(s.max)});
    em.write("summary.csv", sum.str());
    json failures = json::array();
    for (const auto& so : res.seeds)
      if (!so.metrics) failures.push_back({{"seed", so.seed}, {"error", so.error}});
    json m = manifest_base(config);
    m["n_seeds"] = n_seeds;
    m["failed_seeds"] = failures;
    m["outputs"] = em.inventory();
    m["status"] = failures.empty() ? "ok" : "partial";
    write_json(res.dir / "manifest.json", m);
    write_json(res.dir / "run_info.json", run_info_base(res.dir.filename().string()));
  }
  return res;
}

}  // namespace nof1
