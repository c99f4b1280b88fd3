#include "nof1/glm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace nof1 {

double clip_probability(double p) { return std::clamp(p, kProbabilityFloor, 1.0 - kProbabilityFloor); }

namespace {

// log(1 + e^z) without overflow.
double softplus(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double weight_at(std::span<const double> w, Eigen::Index i) {
  return w.empty() ? 1.0 : w[static_cast<std::size_t>(i)];
}

void check_inputs(const Eigen::MatrixXd& design, std::span<const int> labels,
                  std::span<const double> weights) {
  if (design.rows() != static_cast<Eigen::Index>(labels.size()))
    throw std::invalid_argument("logistic fit: design rows and label count differ");
  if (!weights.empty() && weights.size() != labels.size())
    throw std::invalid_argument("logistic fit: weight count differs from label count");
  bool pos = false, neg = false;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (weight_at(weights, static_cast<Eigen::Index>(i)) <= 0) continue;
    (labels[i] ? pos : neg) = true;
  }
  if (!pos || !neg) throw std::invalid_argument("logistic fit: labels contain a single class");
}

}  // namespace

double logistic_log_likelihood(const Eigen::MatrixXd& design, std::span<const int> labels,
                               std::span<const double> weights, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    ll += weight_at(weights, i) * (labels[i] * eta[i] - softplus(eta[i]));
  return ll;
}

Eigen::VectorXd logistic_score(const Eigen::MatrixXd& design, std::span<const int> labels,
                               std::span<const double> weights, const Eigen::VectorXd& beta) {
  const Eigen::VectorXd eta = design * beta;
  Eigen::VectorXd r(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i)
    r[i] = weight_at(weights, i) * (labels[i] - sigmoid(eta[i]));
  return design.transpose() * r;
}

LogisticFit fit_logistic(const Eigen::MatrixXd& design, std::span<const int> labels,
                         std::span<const double> weights, const LogisticFitOptions& options) {
  check_inputs(design, labels, weights);
  const Eigen::Index n = design.rows();
  const Eigen::Index k = design.cols();

  LogisticFit fit;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(k);
  double ll = logistic_log_likelihood(design, labels, weights, beta);
  fit.log_likelihood_trace.push_back(ll);

  Eigen::VectorXd residual(n);
  Eigen::VectorXd curvature(n);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    fit.iterations = iter;
    const Eigen::VectorXd eta = design * beta;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double p = sigmoid(eta[i]);
      const double w = weight_at(weights, i);
      residual[i] = w * (labels[i] - p);
      curvature[i] = w * p * (1.0 - p);
    }
    const Eigen::VectorXd grad = design.transpose() * residual;
    const Eigen::MatrixXd hess = design.transpose() * curvature.asDiagonal() * design;
    // Minimum-norm solve keeps rank-deficient designs (e.g. all-zero columns)
    // from producing non-finite steps.
    const Eigen::VectorXd step = hess.completeOrthogonalDecomposition().solve(grad);
    if (!step.allFinite()) break;
    if (step.cwiseAbs().maxCoeff() < options.tolerance) {
      beta += step;
      ll = logistic_log_likelihood(design, labels, weights, beta);
      fit.converged = true;
      break;
    }

    double scale = 1.0;
    Eigen::VectorXd candidate = beta + step;
    double cand_ll = logistic_log_likelihood(design, labels, weights, candidate);
    int halvings = 0;
    while (!(cand_ll >= ll) && halvings < options.max_halvings) {
      scale *= 0.5;
      ++halvings;
      candidate = beta + scale * step;
      cand_ll = logistic_log_likelihood(design, labels, weights, candidate);
    }
    if (!(cand_ll >= ll)) {
      // Only rounding noise remains once the Newton step is this small.
      fit.converged = step.cwiseAbs().maxCoeff() < 1e-6;
      break;
    }

    const double change = (candidate - beta).cwiseAbs().maxCoeff();
    beta = candidate;
    ll = cand_ll;
    fit.log_likelihood_trace.push_back(ll);

    if (beta.cwiseAbs().maxCoeff() > options.coefficient_cap) {
      beta = beta.cwiseMax(-options.coefficient_cap).cwiseMin(options.coefficient_cap);
      ll = logistic_log_likelihood(design, labels, weights, beta);
      fit.cap_triggered = true;
      break;
    }
    if (change < options.tolerance) {
      fit.converged = true;
      break;
    }
  }
  fit.coefficients = beta;
  fit.log_likelihood = ll;
  return fit;
}

std::array<double, 6> quadratic_terms(const Point& x) {
  return {1.0, x.x1, x.x1 * x.x1, x.x2, x.x2 * x.x2, x.x1 * x.x2};
}

double QuadraticGlm::predict(const Point& x) const {
  const auto t = quadratic_terms(x);
  double eta = 0.0;
  for (std::size_t j = 0; j < t.size(); ++j) eta += coefficients[j] * t[j];
  return clip_probability(sigmoid(eta));
}

QuadraticGlm fit_quadratic_glm(std::span<const Point> features, std::span<const int> labels,
                               std::span<const double> weights, const LogisticFitOptions& options) {
  if (features.size() < 20)
    throw std::invalid_argument("quadratic GLM needs at least 20 rows, got " +
                                std::to_string(features.size()));
  Eigen::MatrixXd design(static_cast<Eigen::Index>(features.size()), 6);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto t = quadratic_terms(features[i]);
    for (int j = 0; j < 6; ++j) design(static_cast<Eigen::Index>(i), j) = t[j];
  }
  const LogisticFit fit = fit_logistic(design, labels, weights, options);
  QuadraticGlm model;
  for (int j = 0; j < 6; ++j) model.coefficients[j] = fit.coefficients[j];
  model.converged = fit.converged;
  model.cap_triggered = fit.cap_triggered;
  model.iterations = fit.iterations;
  return model;
}

}  // namespace nof1
