#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "doctest.h"
#include "nof1/atypicality.hpp"
#include "nof1/rng.hpp"

using namespace nof1;

namespace {

std::vector<Point> cloud(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> p;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.normal();
    p.push_back({1.0 + 1.5 * a, -0.5 + 0.6 * a + 0.8 * b});
  }
  return p;
}

}  // namespace

TEST_SUITE("atypicality") {

TEST_CASE("unit square moments") {
  const std::vector<Point> sq{{0, 0}, {1, 0}, {0, 1}, {1, 1}};
  const auto m = fit_mahalanobis(sq);
  CHECK(m.mean.x1 == doctest::Approx(0.5));
  CHECK(m.mean.x2 == doctest::Approx(0.5));
  CHECK(m.covariance.s11 == doctest::Approx(1.0 / 3));
  CHECK(m.covariance.s22 == doctest::Approx(1.0 / 3));
  CHECK(std::abs(m.covariance.s12) < 1e-15);
  CHECK(m.score(m.mean) == 0.0);
}

TEST_CASE("identity metric reduces to Euclidean") {
  MahalanobisModel m;
  m.mean = {0, 0};
  m.covariance = {1, 0, 1};
  m.precision = {1, 0, 1};
  CHECK(mahalanobis_score(m, {1, 0}) == doctest::Approx(1.0));
  CHECK(mahalanobis_score(m, {3, 4}) == doctest::Approx(5.0));
}

TEST_CASE("precision is the inverse and scores match a linear solve") {
  const auto train = cloud(500, 3);
  const auto m = fit_mahalanobis(train);
  CHECK(m.precision.s11 * m.covariance.s11 + m.precision.s12 * m.covariance.s12 == doctest::Approx(1).epsilon(1e-12));
  CHECK(std::abs(m.precision.s11 * m.covariance.s12 + m.precision.s12 * m.covariance.s22) < 1e-9);

  Eigen::Matrix2d S;
  S << m.covariance.s11, m.covariance.s12, m.covariance.s12, m.covariance.s22;
  const auto lu = S.fullPivLu();
  Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const Eigen::Vector2d d(rng.normal() * 3 - m.mean.x1, rng.normal() * 3 - m.mean.x2);
    const double oracle = std::sqrt(d.dot(lu.solve(d)));
    CHECK(std::abs(mahalanobis_score(m, {d[0] + m.mean.x1, d[1] + m.mean.x2}) - oracle) < 1e-10);
  }
}

TEST_CASE("affine invariance") {
  Rng rng(11);
  const auto train = cloud(400, 7);
  const auto test = cloud(100, 8);
  const auto base = fit_mahalanobis(train);
  for (int rep = 0; rep < 20; ++rep) {
    double a, b, c, d;
    do {
      a = rng.normal();
      b = rng.normal();
      c = rng.normal();
      d = rng.normal();
    } while (std::abs(a * d - b * c) < 0.2);
    const double t1 = rng.normal() * 5, t2 = rng.normal() * 5;
    auto tf = [&](const Point& p) { return Point{a * p.x1 + b * p.x2 + t1, c * p.x1 + d * p.x2 + t2}; };
    std::vector<Point> tr2;
    for (const auto& p : train) tr2.push_back(tf(p));
    const auto moved = fit_mahalanobis(tr2);
    for (const auto& p : test) CHECK(std::abs(moved.score(tf(p)) - base.score(p)) <= 1e-9);
  }
}

TEST_CASE("monotone along rays") {
  const auto m = fit_mahalanobis(cloud(300, 2));
  Rng rng(1);
  for (int r = 0; r < 20; ++r) {
    const double ux = rng.normal(), uy = rng.normal();
    double prev = -1;
    for (double t = 0; t < 5; t += 0.25) {
      const double s = m.score({m.mean.x1 + t * ux, m.mean.x2 + t * uy});
      CHECK(s >= prev);
      prev = s;
    }
  }
}

TEST_CASE("chi-square sanity on training points") {
  const auto train = cloud(20000, 13);
  const auto m = fit_mahalanobis(train);
  double s2 = 0;
  for (const auto& p : train) s2 += m.score(p) * m.score(p);
  CHECK(s2 / train.size() == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("degenerate inputs") {
  CHECK_THROWS_AS(fit_mahalanobis(std::vector<Point>{{0, 0}, {1, 1}}), std::invalid_argument);
  std::vector<Point> line;
  for (int i = 0; i < 10; ++i) line.push_back({1.0 * i, 2.0 * i});
  try {
    fit_mahalanobis(line);
    FAIL("expected domain_error");
  } catch (const std::domain_error& e) {
    CHECK(std::string(e.what()).find("condition") != std::string::npos);
  }
}

TEST_CASE("knn density formula and duplicates") {
  std::vector<Point> ref(30, Point{0, 0});
  DensityEstimator dup(ref, 25, 1e-6);
  CHECK(dup.kth_distance({0, 0}) == 0.0);
  CHECK(dup.density({0, 0}) == doctest::Approx(1e6));

  std::vector<Point> ring;
  for (int i = 0; i < 25; ++i) ring.push_back({0.5 * std::cos(i * 0.25), 0.5 * std::sin(i * 0.25)});
  DensityEstimator est(ring, 25, 1e-6);
  CHECK(est.kth_distance({0, 0}) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(est.density({0, 0}) == doctest::Approx(1.999996).epsilon(1e-9));
}

TEST_CASE("kth distance equals the full-sort oracle") {
  const auto ref = cloud(2000, 17);
  DensityEstimator est(ref, 25);
  Rng rng(4);
  for (int i = 0; i < 100; ++i) {
    const Point q{rng.normal() * 3, rng.normal() * 3};
    std::vector<double> d;
    for (const auto& r : ref) d.push_back(std::sqrt((r.x1 - q.x1) * (r.x1 - q.x1) + (r.x2 - q.x2) * (r.x2 - q.x2)));
    std::sort(d.begin(), d.end());
    CHECK(est.kth_distance(q) == d[24]);
  }
}

TEST_CASE("density decays away from the cloud") {
  const auto ref = cloud(500, 19);
  DensityEstimator est(ref, 25);
  double prev = std::numeric_limits<double>::infinity();
  for (double r = 15; r < 60; r += 5) {
    const double rho = est.density({1.0 + r, -0.5 + r});
    CHECK(rho <= prev);
    prev = rho;
  }
}

TEST_CASE("tail selection") {
  std::vector<double> s(1000);
  for (int i = 0; i < 1000; ++i) s[i] = std::sin(i * 1.7);
  CHECK(select_tail(s, 0.12).indices.size() == 120);
  CHECK(tail_count(2480, 0.12) == 298);
  std::vector<double> big(2480);
  for (int i = 0; i < 2480; ++i) big[i] = i % 97;
  CHECK(select_tail(big, 0.12).indices.size() == 298);

  std::vector<double> flat(50, 1.0);
  const auto t = select_tail(flat, 0.12);
  REQUIRE(t.indices.size() == 6);
  for (std::size_t i = 0; i < 6; ++i) CHECK(t.indices[i] == i);
}

TEST_CASE("tail membership is rank based") {
  Rng rng(6);
  std::vector<double> s(777), t(777);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = rng.uniform() * 4;
    t[i] = std::exp(2 * s[i]) + 3;
  }
  CHECK(select_tail(s, 0.12).indices == select_tail(t, 0.12).indices);
  const auto tail = select_tail(s, 0.12);
  const double cut = tail.threshold;
  std::size_t above = 0;
  for (double v : s) above += v > cut;
  CHECK(above < tail.indices.size());
  for (auto i : tail.indices) CHECK(s[i] >= cut);
}

TEST_CASE("disagreement") {
  CHECK(disagreement(std::vector<double>{0.3, 0.3, 0.3}) == 0.0);
  CHECK(disagreement(std::vector<double>{0.2, 0.4, 0.6}) == doctest::Approx(0.2));
  CHECK(disagreement(std::vector<double>{0.6, 0.2, 0.4}) == disagreement(std::vector<double>{0.2, 0.4, 0.6}));
  CHECK(disagreement(std::vector<double>{0.7}) == 0.0);
}

}
