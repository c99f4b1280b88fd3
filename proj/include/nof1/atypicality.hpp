#pragma once

#include <span>
#include <vector>

#include "nof1/synthgen.hpp"

namespace nof1 {

struct MahalanobisModel {
  Point mean;
  Cov2 covariance;
  Cov2 precision;  // explicit inverse of the covariance

  double score(const Point& x) const;
};

// Sample mean and (n - 1)-denominator covariance. Throws std::invalid_argument
// for n < 3 and std::domain_error (with the condition number) when the
// covariance is singular or numerically so.
MahalanobisModel fit_mahalanobis(std::span<const Point> train);

// sqrt((x - mu)^T Sigma^-1 (x - mu)).
double mahalanobis_score(const MahalanobisModel& model, const Point& x);

// Local density rho(x) = 1 / (d_k(x) + eps), d_k the Euclidean distance to the
// k-th nearest reference point, found by exhaustive search.
class DensityEstimator {
 public:
  DensityEstimator(std::vector<Point> reference, int k = 25, double epsilon = 1e-6);

  double kth_distance(const Point& x) const;
  double density(const Point& x) const { return 1.0 / (kth_distance(x) + epsilon_); }

  int k() const { return k_; }
  double epsilon() const { return epsilon_; }
  std::span<const Point> reference() const { return reference_; }

 private:
  std::vector<Point> reference_;
  int k_;
  double epsilon_;
};

struct TailSelection {
  std::vector<std::size_t> indices;  // ascending
  double threshold = 0.0;            // smallest selected score
};

// Number of rows in a tail of the given fraction: ceil(fraction * n).
std::size_t tail_count(std::size_t n, double fraction);

// The ceil(fraction * n) largest scores; ties at the cutoff go to the smaller
// index.
TailSelection select_tail(std::span<const double> scores, double fraction = 0.12);

// Sample standard deviation (n - 1 denominator); 0 for a single value.
double disagreement(std::span<const double> probs);

}  // namespace nof1
