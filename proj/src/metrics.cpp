#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "nof1/evalstats.hpp"

namespace nof1 {

namespace {

constexpr double kZ975 = 1.959963984540054;

void check_sizes(std::size_t a, std::size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": length mismatch");
}

// 1-based midranks of values (ties share the mean of their ranks).
std::vector<double> midranks(std::span<const double> v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = mid;
    i = j + 1;
  }
  return r;
}

// DeLong structural components: v01 per positive, v10 per negative.
struct Components {
  double auc = 0.5;
  std::vector<double> v01;
  std::vector<double> v10;
};

Components structural_components(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size(), "auc");
  std::vector<double> pos, neg;
  for (std::size_t i = 0; i < scores.size(); ++i) (labels[i] ? pos : neg).push_back(scores[i]);
  if (pos.empty() || neg.empty())
    throw std::invalid_argument("auc: both classes must be present");
  const auto m = static_cast<double>(pos.size());
  const auto n = static_cast<double>(neg.size());
  std::vector<double> all(pos);
  all.insert(all.end(), neg.begin(), neg.end());
  const auto tz = midranks(all);
  const auto tx = midranks(pos);
  const auto ty = midranks(neg);

  Components c;
  c.v01.resize(pos.size());
  c.v10.resize(neg.size());
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < pos.size(); ++i) {
    rank_sum += tz[i];
    c.v01[i] = (tz[i] - tx[i]) / n;
  }
  for (std::size_t j = 0; j < neg.size(); ++j)
    c.v10[j] = 1.0 - (tz[pos.size() + j] - ty[j]) / m;
  c.auc = (rank_sum - m * (m + 1.0) / 2.0) / (m * n);
  return c;
}

double covariance(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() < 2) return 0.0;
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / static_cast<double>(b.size());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - ma) * (b[i] - mb);
  return s / static_cast<double>(a.size() - 1);
}

}  // namespace

double normal_two_sided_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

AucResult auc(std::span<const double> scores, std::span<const int> labels) {
  const Components c = structural_components(scores, labels);
  AucResult r;
  r.auc = c.auc;
  r.variance = covariance(c.v01, c.v01) / static_cast<double>(c.v01.size()) +
               covariance(c.v10, c.v10) / static_cast<double>(c.v10.size());
  const double half = kZ975 * std::sqrt(std::max(r.variance, 0.0));
  r.ci_lower = std::clamp(r.auc - half, 0.0, 1.0);
  r.ci_upper = std::clamp(r.auc + half, 0.0, 1.0);
  return r;
}

double auc_value(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size(), "auc");
  const auto r = midranks(scores);
  double rank_sum = 0.0, m = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i]) {
      rank_sum += r[i];
      m += 1.0;
    }
  const double n = static_cast<double>(labels.size()) - m;
  if (m == 0 || n == 0) throw std::invalid_argument("auc: both classes must be present");
  return (rank_sum - m * (m + 1.0) / 2.0) / (m * n);
}

DeLongResult delong_paired(std::span<const double> scores_a, std::span<const double> scores_b,
                           std::span<const int> labels) {
  check_sizes(scores_a.size(), scores_b.size(), "delong");
  const Components a = structural_components(scores_a, labels);
  const Components b = structural_components(scores_b, labels);
  const auto m = static_cast<double>(a.v01.size());
  const auto n = static_cast<double>(a.v10.size());
  DeLongResult r;
  r.auc_a = a.auc;
  r.auc_b = b.auc;
  r.delta_auc = a.auc - b.auc;
  std::vector<double> d01(a.v01.size()), d10(a.v10.size());
  for (std::size_t i = 0; i < d01.size(); ++i) d01[i] = a.v01[i] - b.v01[i];
  for (std::size_t j = 0; j < d10.size(); ++j) d10[j] = a.v10[j] - b.v10[j];
  r.variance = covariance(d01, d01) / m + covariance(d10, d10) / n;
  if (r.variance <= 1e-300) {
    r.variance = 0.0;
    r.z = 0.0;
    r.p = r.delta_auc == 0.0 ? 1.0 : 0.0;
    if (r.delta_auc != 0.0) r.z = r.delta_auc > 0 ? std::numeric_limits<double>::infinity()
                                                   : -std::numeric_limits<double>::infinity();
    return r;
  }
  r.z = r.delta_auc / std::sqrt(r.variance);
  r.p = normal_two_sided_p(r.z);
  return r;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores, std::span<const int> labels) {
  check_sizes(scores.size(), labels.size(), "roc");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  double P = 0, N = 0;
  for (int y : labels) (y ? P : N) += 1;
  if (P == 0 || N == 0) throw std::invalid_argument("roc: both classes must be present");
  std::vector<RocPoint> out{{std::numeric_limits<double>::infinity(), 0.0, 0.0}};
  double tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < idx.size()) {
    const double t = scores[idx[i]];
    while (i < idx.size() && scores[idx[i]] == t) {
      (labels[idx[i]] ? tp : fp) += 1;
      ++i;
    }
    out.push_back({t, fp / N, tp / P});
  }
  return out;
}

double accuracy(std::span<const double> probs, std::span<const int> labels, double threshold) {
  check_sizes(probs.size(), labels.size(), "accuracy");
  if (probs.empty()) throw std::invalid_argument("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < probs.size(); ++i)
    hits += static_cast<int>(probs[i] >= threshold) == labels[i];
  return static_cast<double>(hits) / static_cast<double>(probs.size());
}

CalibrationReport ece_quantile(std::span<const double> probs, std::span<const int> labels,
                               int n_bins) {
  check_sizes(probs.size(), labels.size(), "ece");
  if (probs.empty()) throw std::invalid_argument("ece: empty input");
  if (n_bins < 1) throw std::invalid_argument("ece: n_bins must be >= 1");
  CalibrationReport rep;
  const std::size_t n = probs.size();
  auto bins = static_cast<std::size_t>(n_bins);
  if (n < bins) {
    rep.notes.push_back("ece: " + std::to_string(n) + " points < " + std::to_string(bins) +
                        " bins; using " + std::to_string(n) + " bins");
    bins = n;
  }
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return probs[a] < probs[b]; });
  for (std::size_t b = 0; b < bins; ++b) {
    const std::size_t lo = b * n / bins;
    const std::size_t hi = (b + 1) * n / bins;
    CalibrationBin bin;
    bin.count = hi - lo;
    double sp = 0, sy = 0;
    for (std::size_t k = lo; k < hi; ++k) {
      sp += probs[idx[k]];
      sy += labels[idx[k]];
    }
    bin.mean_predicted = sp / static_cast<double>(bin.count);
    bin.empirical_rate = sy / static_cast<double>(bin.count);
    rep.ece += static_cast<double>(bin.count) / static_cast<double>(n) *
               std::abs(bin.mean_predicted - bin.empirical_rate);
    rep.bins.push_back(bin);
  }
  return rep;
}

double RiskCoverageCurve::error_at(double coverage) const {
  if (points.empty()) throw std::logic_error("risk-coverage: empty curve");
  const auto n = static_cast<double>(points.size());
  auto kept = static_cast<std::size_t>(std::ceil(coverage * n - 1e-9));
  kept = std::clamp<std::size_t>(kept, 1, points.size());
  return points[kept - 1].error;
}

std::vector<CoveragePoint> RiskCoverageCurve::summary() const {
  std::vector<CoveragePoint> out;
  for (int k = 1; k <= 99; ++k) {
    const double c = k / 100.0;
    out.push_back({c, error_at(c)});
  }
  return out;
}

RiskCoverageCurve risk_coverage(std::span<const double> probs, std::span<const int> labels,
                                const std::vector<bool>& x3_present) {
  check_sizes(probs.size(), labels.size(), "risk-coverage");
  check_sizes(probs.size(), x3_present.size(), "risk-coverage");
  if (probs.empty()) throw std::invalid_argument("risk-coverage: empty input");
  const std::size_t n = probs.size();
  std::vector<double> conf(n);
  for (std::size_t i = 0; i < n; ++i)
    conf[i] = x3_present[i] ? std::numeric_limits<double>::infinity() : std::abs(probs[i] - 0.5);
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return conf[a] > conf[b]; });
  RiskCoverageCurve curve;
  curve.points.reserve(n);
  std::size_t errors = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const auto i = idx[k];
    errors += static_cast<int>(probs[i] >= 0.5) != labels[i];
    curve.points.push_back({static_cast<double>(k + 1) / static_cast<double>(n),
                            static_cast<double>(errors) / static_cast<double>(k + 1)});
  }
  return curve;
}

SurpriseResult surprise_index(std::span<const double> probs, std::span<const int> labels,
                              double threshold) {
  check_sizes(probs.size(), labels.size(), "surprise");
  if (probs.empty()) throw std::invalid_argument("surprise: empty input");
  SurpriseResult r;
  for (std::size_t i = 0; i < probs.size(); ++i)
    if (std::abs(labels[i] - probs[i]) > threshold) r.flagged.push_back(i);
  r.rate = static_cast<double>(r.flagged.size()) / static_cast<double>(probs.size());
  return r;
}

std::vector<ClusterMetrics> per_cluster_metrics(std::span<const Cluster> clusters,
                                                std::span<const int> labels,
                                                std::span<const double> scores) {
  check_sizes(clusters.size(), labels.size(), "per-cluster");
  check_sizes(scores.size(), labels.size(), "per-cluster");
  std::vector<ClusterMetrics> out;
  for (Cluster c : kAllClusters) {
    std::vector<double> s;
    std::vector<int> y;
    for (std::size_t i = 0; i < clusters.size(); ++i)
      if (clusters[i] == c) {
        s.push_back(scores[i]);
        y.push_back(labels[i]);
      }
    if (s.empty()) continue;
    ClusterMetrics m;
    m.cluster = c;
    m.n = s.size();
    m.accuracy = accuracy(s, y);
    const auto pos = std::count(y.begin(), y.end(), 1);
    if (pos > 0 && pos < static_cast<long>(y.size())) m.auc = auc_value(s, y);
    out.push_back(m);
  }
  return out;
}

}  // namespace nof1
