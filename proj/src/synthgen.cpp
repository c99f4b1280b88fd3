#include "nof1/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <string>

#include "nof1/textio.hpp"

namespace nof1 {

char cluster_name(Cluster c) { return static_cast<char>('A' + static_cast<int>(c)); }

Cluster parse_cluster(char c) {
  if (c < 'A' || c > 'D') throw ConfigError(std::string("unknown cluster label '") + c + "'");
  return static_cast<Cluster>(c - 'A');
}

void ClusterSpec::validate() const {
  const std::string who = std::string("cluster ") + cluster_name(id) + ": ";
  if (!std::isfinite(mean.x1) || !std::isfinite(mean.x2)) throw ConfigError(who + "mean must be finite");
  if (!covariance.positive_definite())
    throw ConfigError(who + "covariance must be symmetric positive-definite");
  if (count < 1) throw ConfigError(who + "count must be >= 1");
  if (!(flip_rate >= 0.0 && flip_rate <= 0.5)) throw ConfigError(who + "flip_rate ∈ [0, 0.5]");
  if (has_x3 != (id == Cluster::D)) throw ConfigError(who + "has_x3 must be true exactly for cluster D");
}

void OutcomeConfig::validate() const {
  for (double v : {intercept, c1, c2, c12, beta3, majority_flip})
    if (!std::isfinite(v)) throw ConfigError("outcome: coefficients must be finite");
  if (!(majority_flip >= 0.0 && majority_flip <= 0.5))
    throw ConfigError("outcome: majority_flip ∈ [0, 0.5]");
}

PopulationConfig PopulationConfig::defaults() {
  const Cov2 majority{1.0, 0.25, 1.0};
  const Cov2 rare{0.35, -0.2, 0.5};
  PopulationConfig cfg;
  cfg.clusters = {
      {Cluster::A, {-1.2, 1.1}, majority, 6000, false, 0.03},
      {Cluster::B, {1.4, 1.0}, majority, 4000, false, 0.03},
      {Cluster::C, {0.1, -1.3}, majority, 2000, false, 0.03},
      {Cluster::D, {2.8, -2.6}, rare, 400, true, 0.0},
  };
  return cfg;
}

void PopulationConfig::validate() const {
  if (clusters.size() != 4) throw ConfigError("population: exactly 4 cluster specs required (A-D)");
  for (std::size_t i = 0; i < clusters.size(); ++i) {
    if (clusters[i].id != static_cast<Cluster>(i))
      throw ConfigError("population: clusters must be listed in order A, B, C, D");
    clusters[i].validate();
  }
  outcome.validate();
}

std::size_t PopulationConfig::total_count() const {
  return std::accumulate(clusters.begin(), clusters.end(), std::size_t{0},
                         [](std::size_t s, const ClusterSpec& c) { return s + c.count; });
}

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double majority_probability(const OutcomeConfig& cfg, double x1, double x2) {
  return sigmoid(cfg.intercept + cfg.c1 * x1 + cfg.c2 * x2 + cfg.c12 * x1 * x2);
}

double apply_label_noise(double p, double flip_rate) {
  return p * (1.0 - flip_rate) + (1.0 - p) * flip_rate;
}

double outcome_probability(const Individual& ind, const OutcomeConfig& cfg, double flip_rate) {
  if (ind.x3) return sigmoid(cfg.beta3 * *ind.x3);
  return apply_label_noise(majority_probability(cfg, ind.x.x1, ind.x.x2), flip_rate);
}

OutcomeDraw apply_outcome(const Individual& ind, const OutcomeConfig& cfg, double flip_rate,
                          Rng& rng) {
  const double p = outcome_probability(ind, cfg, flip_rate);
  return {p, rng.bernoulli(p) ? 1 : 0};
}

std::vector<Point> sample_bivariate_normal(const Point& mean, const Cov2& cov, std::size_t n,
                                           Rng& rng) {
  if (!cov.positive_definite()) throw ConfigError("covariance must be positive-definite");
  // L = [[l11, 0], [l21, l22]] with L L^T = cov.
  const double l11 = std::sqrt(cov.s11);
  const double l21 = cov.s12 / l11;
  const double l22 = std::sqrt(cov.s22 - l21 * l21);
  std::vector<Point> out(n);
  for (auto& p : out) {
    const double z1 = rng.normal();
    const double z2 = rng.normal();
    p = {mean.x1 + l11 * z1, mean.x2 + l21 * z1 + l22 * z2};
  }
  return out;
}

Dataset generate_population(const PopulationConfig& config, std::uint64_t seed) {
  config.validate();
  Dataset data;
  data.rows.reserve(config.total_count());
  for (const ClusterSpec& spec : config.clusters) {
    const auto cid = static_cast<std::uint64_t>(spec.id);
    Rng cov_rng(derive_seed(seed, {cid, tag("covariates")}));
    Rng x3_rng(derive_seed(seed, {cid, tag("x3")}));
    Rng outcome_rng(derive_seed(seed, {cid, tag("outcome")}));
    const auto points = sample_bivariate_normal(spec.mean, spec.covariance, spec.count, cov_rng);
    for (const Point& p : points) {
      Individual ind;
      ind.id = data.rows.size();
      ind.x = p;
      ind.cluster = spec.id;
      if (spec.has_x3) ind.x3 = x3_rng.normal();
      const OutcomeDraw draw = apply_outcome(ind, config.outcome, spec.flip_rate, outcome_rng);
      ind.true_prob = draw.true_prob;
      ind.outcome = draw.outcome;
      data.rows.push_back(ind);
    }
  }
  return data;
}

const char* split_name(SplitRole r) {
  switch (r) {
    case SplitRole::Train: return "train";
    case SplitRole::Validation: return "validation";
    case SplitRole::Test: return "test";
  }
  return "?";
}

SplitAssignment stratified_split(const Dataset& data, const SplitRatios& ratios,
                                 std::uint64_t seed) {
  const double sum = ratios.train + ratios.validation + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9 || ratios.train <= 0 || ratios.validation < 0 || ratios.test < 0)
    throw ConfigError("split ratios must be non-negative and sum to 1");

  SplitAssignment out;
  for (Cluster c : kAllClusters) {
    std::vector<std::size_t> members;
    for (const auto& ind : data.rows)
      if (ind.cluster == c) members.push_back(ind.id);
    if (members.empty()) continue;
    if (members.size() < 5)
      throw ConfigError(std::string("cluster ") + cluster_name(c) +
                        " has fewer than 5 individuals; cannot split");
    Rng rng(derive_seed(seed, {static_cast<std::uint64_t>(c), tag("split")}));
    rng.shuffle(std::span<std::size_t>(members));
    const auto n = static_cast<double>(members.size());
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.validation * n + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * n + 1e-9));
    const std::size_t n_train = members.size() - n_val - n_test;
    auto it = members.begin();
    out.train.insert(out.train.end(), it, it + n_train);
    it += n_train;
    out.validation.insert(out.validation.end(), it, it + n_val);
    it += n_val;
    out.test.insert(out.test.end(), it, it + n_test);
  }
  for (auto* v : {&out.train, &out.validation, &out.test}) std::sort(v->begin(), v->end());
  return out;
}

std::vector<SplitRole> split_roles(const SplitAssignment& split, std::size_t n) {
  std::vector<SplitRole> roles(n, SplitRole::Train);
  for (auto i : split.validation) roles.at(i) = SplitRole::Validation;
  for (auto i : split.test) roles.at(i) = SplitRole::Test;
  return roles;
}

void write_dataset_csv(std::ostream& out, const Dataset& data, const SplitAssignment& split) {
  const auto roles = split_roles(split, data.size());
  out << "id,cluster,x1,x2,x3,y,split\n";
  for (const auto& ind : data.rows) {
    out << ind.id << ',' << cluster_name(ind.cluster) << ',' << format_number(ind.x.x1, 17) << ','
        << format_number(ind.x.x2, 17) << ',';
    if (ind.x3) out << format_number(*ind.x3, 17);
    out << ',' << ind.outcome << ',' << split_name(roles[ind.id]) << '\n';
  }
}

}  // namespace nof1
