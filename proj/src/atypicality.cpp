#include "nof1/atypicality.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nof1/textio.hpp"

namespace nof1 {

double MahalanobisModel::score(const Point& x) const {
  const double d1 = x.x1 - mean.x1;
  const double d2 = x.x2 - mean.x2;
  const double q = precision.s11 * d1 * d1 + 2.0 * precision.s12 * d1 * d2 + precision.s22 * d2 * d2;
  return std::sqrt(std::max(q, 0.0));
}

double mahalanobis_score(const MahalanobisModel& model, const Point& x) { return model.score(x); }

MahalanobisModel fit_mahalanobis(std::span<const Point> train) {
  if (train.size() < 3) throw std::invalid_argument("mahalanobis: need at least 3 points");
  const auto n = static_cast<double>(train.size());
  Point mu;
  for (const auto& p : train) {
    mu.x1 += p.x1;
    mu.x2 += p.x2;
  }
  mu.x1 /= n;
  mu.x2 /= n;
  Cov2 s{0.0, 0.0, 0.0};
  for (const auto& p : train) {
    const double d1 = p.x1 - mu.x1, d2 = p.x2 - mu.x2;
    s.s11 += d1 * d1;
    s.s12 += d1 * d2;
    s.s22 += d2 * d2;
  }
  s.s11 /= n - 1;
  s.s12 /= n - 1;
  s.s22 /= n - 1;

  // Eigenvalues of the symmetric 2x2 matrix for the conditioning report.
  const double tr = s.s11 + s.s22;
  const double disc = std::sqrt(std::max(0.0, 0.25 * (s.s11 - s.s22) * (s.s11 - s.s22) + s.s12 * s.s12));
  const double lmax = 0.5 * tr + disc;
  const double lmin = 0.5 * tr - disc;
  const double cond = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
  if (!(lmin > 0) || cond > 1e12)
    throw std::domain_error("mahalanobis: singular training covariance (condition number " +
                            format_number(cond, 6) + ")");

  const double det = s.det();
  MahalanobisModel m;
  m.mean = mu;
  m.covariance = s;
  m.precision = {s.s22 / det, -s.s12 / det, s.s11 / det};
  return m;
}

DensityEstimator::DensityEstimator(std::vector<Point> reference, int k, double epsilon)
    : reference_(std::move(reference)), k_(k), epsilon_(epsilon) {
  if (k_ < 1) throw std::invalid_argument("density: k must be >= 1");
  if (static_cast<std::size_t>(k_) > reference_.size())
    throw std::invalid_argument("density: k = " + std::to_string(k_) + " exceeds " +
                                std::to_string(reference_.size()) + " reference points");
  if (!(epsilon_ > 0)) throw std::invalid_argument("density: epsilon must be positive");
}

double DensityEstimator::kth_distance(const Point& x) const {
  std::vector<double> d2(reference_.size());
  for (std::size_t i = 0; i < reference_.size(); ++i) {
    const double a = reference_[i].x1 - x.x1, b = reference_[i].x2 - x.x2;
    d2[i] = a * a + b * b;
  }
  auto kth = d2.begin() + (k_ - 1);
  std::nth_element(d2.begin(), kth, d2.end());
  return std::sqrt(*kth);
}

std::size_t tail_count(std::size_t n, double fraction) {
  if (!(fraction > 0 && fraction < 1)) throw std::invalid_argument("tail fraction must lie in (0, 1)");
  // The small guard keeps exact products such as 0.12 * 1000 from rounding up.
  auto c = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n) - 1e-9));
  return std::min(c, n);
}

TailSelection select_tail(std::span<const double> scores, double fraction) {
  if (scores.empty()) throw std::invalid_argument("select_tail: empty score list");
  const std::size_t count = tail_count(scores.size(), fraction);
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  TailSelection sel;
  sel.indices.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(count));
  sel.threshold = count > 0 ? scores[sel.indices.back()] : 0.0;
  std::sort(sel.indices.begin(), sel.indices.end());
  return sel;
}

double disagreement(std::span<const double> probs) {
  if (probs.empty()) throw std::invalid_argument("disagreement: no probabilities");
  if (probs.size() == 1) return 0.0;
  const double mean = std::accumulate(probs.begin(), probs.end(), 0.0) / static_cast<double>(probs.size());
  double ss = 0.0;
  for (double p : probs) ss += (p - mean) * (p - mean);
  return std::sqrt(ss / static_cast<double>(probs.size() - 1));
}

}  // namespace nof1
