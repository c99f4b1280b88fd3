#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "nof1/rng.hpp"

namespace nof1 {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Cluster : std::uint8_t { A = 0, B = 1, C = 2, D = 3 };

inline constexpr std::array<Cluster, 4> kAllClusters{Cluster::A, Cluster::B, Cluster::C,
                                                     Cluster::D};

char cluster_name(Cluster c);
Cluster parse_cluster(char c);

struct Point {
  double x1 = 0.0;
  double x2 = 0.0;
  bool operator==(const Point&) const = default;
};

// Symmetric 2x2 matrix [[s11, s12], [s12, s22]].
struct Cov2 {
  double s11 = 1.0;
  double s12 = 0.0;
  double s22 = 1.0;
  double det() const { return s11 * s22 - s12 * s12; }
  bool positive_definite() const { return s11 > 0.0 && det() > 0.0; }
};

struct ClusterSpec {
  Cluster id = Cluster::A;
  Point mean;
  Cov2 covariance;
  std::size_t count = 0;
  bool has_x3 = false;
  double flip_rate = 0.0;

  // Throws ConfigError naming the violated invariant.
  void validate() const;
};

struct OutcomeConfig {
  double intercept = 0.8;
  double c1 = 1.2;
  double c2 = -0.9;
  double c12 = 0.35;
  double beta3 = 3.5;
  double majority_flip = 0.03;  // config-file default for clusters without x3; flip_rate is what applies

  void validate() const;
};

struct PopulationConfig {
  std::vector<ClusterSpec> clusters;
  OutcomeConfig outcome;

  // Three majority clusters A-C around the origin and the rare cluster D at
  // (2.8, -2.6); counts 6000/4000/2000/400.
  static PopulationConfig defaults();
  void validate() const;
  std::size_t total_count() const;
};

struct Individual {
  std::size_t id = 0;
  Point x;
  std::optional<double> x3;
  Cluster cluster = Cluster::A;
  double true_prob = 0.5;  // after label noise
  int outcome = 0;
};

struct Dataset {
  std::vector<Individual> rows;

  std::size_t size() const { return rows.size(); }
  const Individual& operator[](std::size_t i) const { return rows[i]; }
};

double sigmoid(double z);

// Pre-noise majority probability sigma(b0 + b1 x1 + b2 x2 + b12 x1 x2).
double majority_probability(const OutcomeConfig& cfg, double x1, double x2);

// Symmetric flip: p(1 - f) + (1 - p) f.
double apply_label_noise(double p, double flip_rate);

// Post-noise success probability for an individual. Rows carrying x3 use the
// rare-mechanism model sigma(beta3 * x3) and never flip.
double outcome_probability(const Individual& ind, const OutcomeConfig& cfg, double flip_rate);

struct OutcomeDraw {
  double true_prob = 0.5;
  int outcome = 0;
};

OutcomeDraw apply_outcome(const Individual& ind, const OutcomeConfig& cfg, double flip_rate,
                          Rng& rng);

// Draws every cluster from its own derived substream, so the result does not
// depend on generation order. Outcomes are drawn here, before any split.
Dataset generate_population(const PopulationConfig& config, std::uint64_t seed);

// Samples n points from N(mean, cov) via the Cholesky factor.
std::vector<Point> sample_bivariate_normal(const Point& mean, const Cov2& cov, std::size_t n,
                                           Rng& rng);

struct SplitRatios {
  double train = 0.6;
  double validation = 0.2;
  double test = 0.2;
};

struct SplitAssignment {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

enum class SplitRole : std::uint8_t { Train, Validation, Test };
const char* split_name(SplitRole r);

// Each cluster is shuffled and partitioned independently: validation and test
// get floor(ratio * n_cluster), train takes the remainder.
SplitAssignment stratified_split(const Dataset& data, const SplitRatios& ratios,
                                 std::uint64_t seed);

std::vector<SplitRole> split_roles(const SplitAssignment& split, std::size_t n);

// Columns: id,cluster,x1,x2,x3,y,split. x3 is empty for rows without it.
void write_dataset_csv(std::ostream& out, const Dataset& data, const SplitAssignment& split);

}  // namespace nof1
