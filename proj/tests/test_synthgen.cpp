#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "nof1/synthgen.hpp"

using namespace nof1;

namespace {

struct Moments {
  double m1 = 0, m2 = 0, s11 = 0, s12 = 0, s22 = 0;
};

// Plain two-pass sample moments, written independently of the library.
Moments moments(const std::vector<Point>& pts) {
  Moments m;
  const double n = static_cast<double>(pts.size());
  for (const auto& p : pts) {
    m.m1 += p.x1;
    m.m2 += p.x2;
  }
  m.m1 /= n;
  m.m2 /= n;
  for (const auto& p : pts) {
    m.s11 += (p.x1 - m.m1) * (p.x1 - m.m1);
    m.s12 += (p.x1 - m.m1) * (p.x2 - m.m2);
    m.s22 += (p.x2 - m.m2) * (p.x2 - m.m2);
  }
  m.s11 /= n - 1;
  m.s12 /= n - 1;
  m.s22 /= n - 1;
  return m;
}

}  // namespace

TEST_SUITE("synthgen") {

TEST_CASE("default population has the stated cluster sizes") {
  const auto cfg = PopulationConfig::defaults();
  const Dataset d = generate_population(cfg, 2025);
  CHECK(d.size() == 12400);
  std::map<Cluster, int> count;
  for (const auto& r : d.rows) ++count[r.cluster];
  CHECK(count[Cluster::A] == 6000);
  CHECK(count[Cluster::B] == 4000);
  CHECK(count[Cluster::C] == 2000);
  CHECK(count[Cluster::D] == 400);
  for (std::size_t i = 0; i < d.size(); ++i) {
    CHECK(d[i].id == i);
    CHECK(d[i].x3.has_value() == (d[i].cluster == Cluster::D));
    CHECK(d[i].true_prob >= 0.0);
    CHECK(d[i].true_prob <= 1.0);
  }
}

TEST_CASE("default cluster geometry") {
  const auto cfg = PopulationConfig::defaults();
  REQUIRE(cfg.clusters.size() == 4);
  CHECK(cfg.clusters[0].mean.x1 == -1.2);
  CHECK(cfg.clusters[0].mean.x2 == 1.1);
  CHECK(cfg.clusters[1].mean.x1 == 1.4);
  CHECK(cfg.clusters[1].mean.x2 == 1.0);
  CHECK(cfg.clusters[2].mean.x1 == 0.1);
  CHECK(cfg.clusters[2].mean.x2 == -1.3);
  CHECK(cfg.clusters[3].mean.x1 == 2.8);
  CHECK(cfg.clusters[3].mean.x2 == -2.6);
  CHECK(cfg.clusters[3].covariance.s11 == 0.35);
  CHECK(cfg.clusters[3].covariance.s12 == -0.2);
  CHECK(cfg.clusters[3].covariance.s22 == 0.5);
  CHECK(cfg.clusters[0].covariance.s12 == 0.25);
  CHECK(cfg.clusters[3].has_x3);
  CHECK(cfg.clusters[3].flip_rate == 0.0);
  CHECK(cfg.clusters[0].flip_rate == 0.03);
}

TEST_CASE("oversampled clusters match the stated moments") {
  const auto cfg = PopulationConfig::defaults();
  for (const auto& spec : cfg.clusters) {
    Rng rng(derive_seed(99, {static_cast<std::uint64_t>(spec.id)}));
    const auto pts = sample_bivariate_normal(spec.mean, spec.covariance, 100000, rng);
    const Moments m = moments(pts);
    CAPTURE(cluster_name(spec.id));
    CHECK(std::abs(m.m1 - spec.mean.x1) < 0.02);
    CHECK(std::abs(m.m2 - spec.mean.x2) < 0.02);
    CHECK(std::abs(m.s11 - spec.covariance.s11) < 0.03);
    CHECK(std::abs(m.s12 - spec.covariance.s12) < 0.03);
    CHECK(std::abs(m.s22 - spec.covariance.s22) < 0.03);
  }
}

TEST_CASE("outcome probabilities") {
  const OutcomeConfig oc;
  Individual maj;
  maj.x = {0.0, 0.0};
  CHECK(majority_probability(oc, 0, 0) == doctest::Approx(0.68997).epsilon(1e-5));
  CHECK(outcome_probability(maj, oc, 0.03) == doctest::Approx(0.67857).epsilon(1e-5));
  CHECK(apply_label_noise(1.0, 0.03) == doctest::Approx(0.97));

  Individual d;
  d.cluster = Cluster::D;
  d.x3 = 0.0;
  CHECK(outcome_probability(d, oc, 0.03) == 0.5);
  d.x3 = 1.0;
  CHECK(outcome_probability(d, oc, 0.0) == doctest::Approx(1.0 / (1.0 + std::exp(-3.5))));
}

TEST_CASE("label noise is affine with slope 0.94 and intercept 0.03") {
  for (double p = 0.0; p <= 1.0; p += 0.05)
    CHECK(apply_label_noise(p, 0.03) == doctest::Approx(0.03 + 0.94 * p).epsilon(1e-12));
}

TEST_CASE("cluster D outcome rate follows sigma(3.5 x3)") {
  Rng rng(7);
  const OutcomeConfig oc;
  // bins of x3 width 0.5 on [-2, 2]
  std::vector<int> n(8), pos(8);
  std::vector<double> psum(8);
  for (int i = 0; i < 40000; ++i) {
    Individual ind;
    ind.cluster = Cluster::D;
    ind.x3 = rng.normal();
    const double z = *ind.x3;
    if (z < -2 || z >= 2) continue;
    const int b = static_cast<int>((z + 2) / 0.5);
    const auto draw = apply_outcome(ind, oc, 0.0, rng);
    ++n[b];
    pos[b] += draw.outcome;
    psum[b] += 1.0 / (1.0 + std::exp(-3.5 * z));
  }
  for (int b = 0; b < 8; ++b) {
    if (n[b] < 200) continue;
    const double expect = psum[b] / n[b];
    const double rate = static_cast<double>(pos[b]) / n[b];
    const double se = std::sqrt(expect * (1 - expect) / n[b]);
    CAPTURE(b);
    CHECK(std::abs(rate - expect) < 4 * se + 1e-3);
  }
}

TEST_CASE("generation is deterministic and seed-sensitive") {
  const auto cfg = PopulationConfig::defaults();
  const Dataset a = generate_population(cfg, 11), b = generate_population(cfg, 11),
                c = generate_population(cfg, 12);
  bool same = true, differs = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    same = same && a[i].x.x1 == b[i].x.x1 && a[i].x.x2 == b[i].x.x2 && a[i].outcome == b[i].outcome &&
           a[i].x3 == b[i].x3;
    differs = differs || a[i].x.x1 != c[i].x.x1;
  }
  CHECK(same);
  CHECK(differs);
}

TEST_CASE("config errors") {
  auto cfg = PopulationConfig::defaults();
  cfg.clusters[0].covariance = {1.0, 2.0, 1.0};
  CHECK_THROWS_AS(generate_population(cfg, 1), ConfigError);
  cfg = PopulationConfig::defaults();
  cfg.clusters[1].count = 0;
  CHECK_THROWS_AS(generate_population(cfg, 1), ConfigError);
  cfg = PopulationConfig::defaults();
  cfg.clusters[2].flip_rate = 0.9;
  try {
    cfg.validate();
    FAIL("expected a ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("flip_rate ∈ [0, 0.5]") != std::string::npos);
  }
  cfg = PopulationConfig::defaults();
  cfg.clusters[0].has_x3 = true;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("stratified split") {
  const Dataset d = generate_population(PopulationConfig::defaults(), 2025);
  const SplitAssignment s = stratified_split(d, {}, 5);
  CHECK(s.train.size() + s.validation.size() + s.test.size() == d.size());
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.validation, &s.test})
    for (auto i : *part) CHECK(all.insert(i).second);
  CHECK(all.size() == d.size());

  std::map<Cluster, std::array<int, 3>> per;
  for (auto i : s.train) ++per[d[i].cluster][0];
  for (auto i : s.validation) ++per[d[i].cluster][1];
  for (auto i : s.test) ++per[d[i].cluster][2];
  CHECK(per[Cluster::D] == std::array<int, 3>{240, 80, 80});
  CHECK(per[Cluster::A][2] == 1200);
  CHECK(per[Cluster::B][2] == 800);
  CHECK(per[Cluster::C][2] == 400);
  CHECK(s.test.size() == 2480);

  const SplitAssignment again = stratified_split(d, {}, 5);
  CHECK(again.test == s.test);
  CHECK(again.train == s.train);
}

TEST_CASE("split floors validation and test, remainder to train") {
  auto cfg = PopulationConfig::defaults();
  cfg.clusters[3].count = 7;
  const Dataset d = generate_population(cfg, 1);
  const SplitAssignment s = stratified_split(d, {}, 1);
  int tr = 0, va = 0, te = 0;
  for (auto i : s.train) tr += d[i].cluster == Cluster::D;
  for (auto i : s.validation) va += d[i].cluster == Cluster::D;
  for (auto i : s.test) te += d[i].cluster == Cluster::D;
  CHECK(va == 1);
  CHECK(te == 1);
  CHECK(tr == 5);
}

TEST_CASE("tiny cluster cannot be split") {
  auto cfg = PopulationConfig::defaults();
  cfg.clusters[3].count = 4;
  const Dataset d = generate_population(cfg, 1);
  CHECK_THROWS(stratified_split(d, {}, 1));
}

TEST_CASE("dataset csv") {
  auto cfg = PopulationConfig::defaults();
  const Dataset d = generate_population(cfg, 3);
  const SplitAssignment s = stratified_split(d, {}, 3);
  std::ostringstream out;
  write_dataset_csv(out, d, s);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "id,cluster,x1,x2,x3,y,split");
  int rows = 0, empty_x3 = 0;
  while (std::getline(in, line)) {
    ++rows;
    if (line.find(",,") != std::string::npos) ++empty_x3;
  }
  CHECK(rows == 12400);
  CHECK(empty_x3 == 12000);
}

}
