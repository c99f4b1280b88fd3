#pragma once

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "nof1/synthgen.hpp"

namespace nof1 {

// Lower clip applied to every probability leaving a model so that logits stay
// finite downstream.
inline constexpr double kProbabilityFloor = 1e-12;
double clip_probability(double p);

struct LogisticFitOptions {
  double tolerance = 1e-8;  // max |delta beta| for convergence
  int max_iterations = 50;
  int max_halvings = 20;
  double coefficient_cap = 30.0;
};

struct LogisticFit {
  Eigen::VectorXd coefficients;
  bool converged = false;
  bool cap_triggered = false;
  int iterations = 0;
  double log_likelihood = 0.0;
  // Log-likelihood after each accepted Newton step, starting from beta = 0.
  std::vector<double> log_likelihood_trace;
};

// Weighted Bernoulli log-likelihood sum_i w_i [y_i eta_i - log(1 + e^eta_i)].
double logistic_log_likelihood(const Eigen::MatrixXd& design, std::span<const int> labels,
                               std::span<const double> weights, const Eigen::VectorXd& beta);

// Score vector X^T W (y - p).
Eigen::VectorXd logistic_score(const Eigen::MatrixXd& design, std::span<const int> labels,
                               std::span<const double> weights, const Eigen::VectorXd& beta);

// Damped Newton-Raphson for weighted logistic regression. Empty weights mean
// unit weights. Steps are halved while the likelihood decreases. If any
// coefficient exceeds the cap (separation) the fit stops with the capped
// coefficients and converged = false. Throws std::invalid_argument when the
// labels contain a single class.
LogisticFit fit_logistic(const Eigen::MatrixXd& design, std::span<const int> labels,
                         std::span<const double> weights = {},
                         const LogisticFitOptions& options = {});

// Raw polynomial basis (1, x1, x1^2, x2, x2^2, x1*x2).
std::array<double, 6> quadratic_terms(const Point& x);

struct QuadraticGlm {
  std::array<double, 6> coefficients{};
  bool converged = false;
  bool cap_triggered = false;
  int iterations = 0;

  double predict(const Point& x) const;
};

QuadraticGlm fit_quadratic_glm(std::span<const Point> features, std::span<const int> labels,
                               std::span<const double> weights = {},
                               const LogisticFitOptions& options = {});

}  // namespace nof1
