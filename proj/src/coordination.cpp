#include "nof1/coordination.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nof1/evalstats.hpp"
#include "nof1/textio.hpp"

namespace nof1 {

// ---------------------------------------------------------------------------
// Reliability weights

namespace {

double mean_of_present(const std::vector<std::optional<double>>& v, double fallback) {
  double s = 0;
  int c = 0;
  for (const auto& x : v)
    if (x) {
      s += *x;
      ++c;
    }
  return c ? s / c : fallback;
}

std::vector<double> min_max(std::vector<double> v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double a = *lo, b = *hi;
  for (auto& x : v) x = b > a ? (x - a) / (b - a) : 1.0;
  return v;
}

}  // namespace

ReliabilityWeights compute_weights(std::span<const AgentReport> reports,
                                   std::span<const AgentEvidence> evidence,
                                   const ReliabilityCoefficients& coefficients) {
  if (reports.size() != evidence.size())
    throw std::invalid_argument("compute_weights: one evidence record per agent report required");
  if (reports.empty()) throw std::invalid_argument("compute_weights: no agents");
  for (double c : {coefficients.alpha, coefficients.beta, coefficients.gamma, coefficients.delta})
    if (!(c >= 0)) throw std::invalid_argument("compute_weights: coefficients must be non-negative");

  const std::size_t k = reports.size();
  ReliabilityWeights rw;
  rw.coefficients = coefficients;
  std::vector<std::optional<double>> cal(k), perf(k);
  for (std::size_t j = 0; j < k; ++j) {
    cal[j] = evidence[j].local_ece;
    perf[j] = evidence[j].local_accuracy;
  }
  const double cal_fill = mean_of_present(cal, 1.0);
  const double perf_fill = mean_of_present(perf, 0.5);

  for (std::size_t j = 0; j < k; ++j) {
    rw.dens.push_back(evidence[j].density);
    double cons = 1.0;
    if (k > 1) {
      double s = 0;
      for (std::size_t o = 0; o < k; ++o)
        if (o != j) s += std::abs(reports[j].p_hat - reports[o].p_hat);
      cons = 1.0 - s / static_cast<double>(k - 1);
    }
    rw.cons.push_back(cons);
    if (!cal[j]) rw.notes.push_back(reports[j].agent_id + ": no calibration history; using agent mean");
    if (!perf[j]) rw.notes.push_back(reports[j].agent_id + ": no performance history; using agent mean");
    rw.cal.push_back(std::max(cal[j].value_or(cal_fill), kCalibrationFloor));
    rw.perf.push_back(perf[j].value_or(perf_fill));
  }

  std::vector<double> inv_cal(k);
  for (std::size_t j = 0; j < k; ++j) inv_cal[j] = 1.0 / rw.cal[j];
  auto dens = rw.dens, cons = rw.cons, perf_v = rw.perf;
  if (coefficients.normalize) {
    dens = min_max(dens);
    cons = min_max(cons);
    inv_cal = min_max(inv_cal);
    perf_v = min_max(perf_v);
  }
  for (std::size_t j = 0; j < k; ++j) {
    rw.dens_term.push_back(coefficients.alpha * dens[j]);
    rw.cons_term.push_back(coefficients.beta * cons[j]);
    rw.cal_term.push_back(coefficients.gamma * inv_cal[j]);
    rw.perf_term.push_back(coefficients.delta * perf_v[j]);
    rw.w.push_back(rw.dens_term[j] + rw.cons_term[j] + rw.cal_term[j] + rw.perf_term[j]);
  }
  return rw;
}

LocalHistory::LocalHistory(std::vector<Point> points, std::vector<int> labels,
                           std::vector<std::vector<double>> agent_probs, int neighbors,
                           double half_life)
    : points_(std::move(points)),
      labels_(std::move(labels)),
      agent_probs_(std::move(agent_probs)),
      neighbors_(neighbors),
      half_life_(half_life) {
  if (points_.size() != labels_.size()) throw std::invalid_argument("history: length mismatch");
  for (const auto& a : agent_probs_)
    if (a.size() != points_.size()) throw std::invalid_argument("history: agent column length mismatch");
  if (neighbors_ < 1 || points_.empty()) throw std::invalid_argument("history: need rows and neighbours");
  if (!(half_life_ > 0)) throw std::invalid_argument("history: half-life must be positive");
}

std::vector<std::size_t> LocalHistory::nearest(const Point& x) const {
  const std::size_t n = points_.size();
  const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(neighbors_), n);
  std::vector<std::pair<double, std::size_t>> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = points_[i].x1 - x.x1, b = points_[i].x2 - x.x2;
    d[i] = {a * a + b * b, i};
  }
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(m), d.end());
  std::vector<std::size_t> out(m);
  for (std::size_t i = 0; i < m; ++i) out[i] = d[i].second;
  return out;
}

LocalHistory::Local LocalHistory::evaluate(const Point& x) const {
  const auto nb = nearest(x);
  Local out;
  const double newest = static_cast<double>(points_.size() - 1);
  std::vector<int> y(nb.size());
  std::vector<double> rec(nb.size());
  for (std::size_t k = 0; k < nb.size(); ++k) {
    y[k] = labels_[nb[k]];
    rec[k] = std::exp2(-(newest - static_cast<double>(nb[k])) / half_life_);
  }
  for (const auto& probs : agent_probs_) {
    std::vector<double> p(nb.size());
    double hit = 0, tot = 0;
    for (std::size_t k = 0; k < nb.size(); ++k) {
      p[k] = probs[nb[k]];
      hit += rec[k] * (static_cast<int>(p[k] >= 0.5) == y[k]);
      tot += rec[k];
    }
    out.ece.push_back(ece_quantile(p, y, 10).ece);
    out.accuracy.push_back(hit / tot);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stacker

const char* stacker_variant_name(StackerVariant v) {
  return v == StackerVariant::Generalized ? "generalized" : "reproduction";
}

std::vector<double> stacker_features(StackerVariant variant, std::span<const double> agent_probs,
                                     const MetaFeatures& meta,
                                     std::span<const double> agent_weights) {
  std::vector<double> f{1.0, variant == StackerVariant::Reproduction ? meta.rho : meta.atyp,
                        meta.disagree};
  if (variant == StackerVariant::Generalized) {
    if (agent_weights.size() != agent_probs.size())
      throw std::invalid_argument("stacker: generalized variant needs one weight per agent");
    for (std::size_t j = 0; j < agent_probs.size(); ++j) f.push_back(agent_weights[j] * agent_probs[j]);
  } else {
    f.insert(f.end(), agent_probs.begin(), agent_probs.end());
  }
  return f;
}

StackerFit fit_stacker(std::span<const int> outcomes,
                       std::span<const std::vector<double>> agent_probs,
                       std::span<const MetaFeatures> meta, StackerVariant variant,
                       const StackerFitOptions& options,
                       std::span<const std::vector<double>> agent_weights) {
  const std::size_t n = outcomes.size();
  if (n == 0 || agent_probs.size() != n || meta.size() != n)
    throw std::invalid_argument("stacker: outcomes, agent probabilities and meta-features must align");
  if (variant == StackerVariant::Generalized && agent_weights.size() != n)
    throw std::invalid_argument("stacker: generalized variant needs per-row agent weights");
  const std::size_t k = agent_probs[0].size();

  StackerFit fit;
  std::vector<double> rho(n);
  for (std::size_t i = 0; i < n; ++i) rho[i] = meta[i].rho;
  fit.density_cutoff = quantile(rho, options.low_density_quantile);
  fit.row_weights.assign(n, 1.0);
  for (std::size_t i = 0; i < n; ++i)
    if (rho[i] < fit.density_cutoff) {
      fit.row_weights[i] = options.tail_upweight;
      ++fit.upweighted_rows;
    }

  Eigen::MatrixXd design(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(3 + k));
  for (std::size_t i = 0; i < n; ++i) {
    if (agent_probs[i].size() != k) throw std::invalid_argument("stacker: ragged agent probabilities");
    const auto w = variant == StackerVariant::Generalized ? std::span<const double>(agent_weights[i])
                                                           : std::span<const double>();
    const auto f = stacker_features(variant, agent_probs[i], meta[i], w);
    for (std::size_t j = 0; j < f.size(); ++j)
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = f[j];
  }
  const LogisticFit lf = fit_logistic(design, outcomes, fit.row_weights, options.glm);
  fit.model.variant = variant;
  fit.model.a0 = lf.coefficients[0];
  fit.model.a1 = lf.coefficients[1];
  fit.model.a2 = lf.coefficients[2];
  for (std::size_t j = 0; j < k; ++j) fit.model.b.push_back(lf.coefficients[static_cast<Eigen::Index>(3 + j)]);
  fit.model.converged = lf.converged;
  return fit;
}

double stack_predict(const StackerModel& model, std::span<const double> agent_probs,
                     const MetaFeatures& meta, std::span<const double> agent_weights) {
  if (agent_probs.size() != model.b.size())
    throw std::invalid_argument("stack_predict: expected " + std::to_string(model.b.size()) +
                                " agent probabilities, got " + std::to_string(agent_probs.size()));
  const auto f = stacker_features(model.variant, agent_probs, meta, agent_weights);
  double eta = model.a0 * f[0] + model.a1 * f[1] + model.a2 * f[2];
  for (std::size_t j = 0; j < model.b.size(); ++j) eta += model.b[j] * f[3 + j];
  return clip_probability(sigmoid(eta));
}

// ---------------------------------------------------------------------------
// Policy, conformal, routing

void CoordinationPolicy::validate() const {
  if (!(abstain_atyp_threshold > 0) || !(abstain_disagree_threshold > 0))
    throw ConfigError("policy: abstention thresholds must be positive");
  if (!(conformal_alpha > 0 && conformal_alpha < 1))
    throw ConfigError("policy: conformal_alpha ∈ (0, 1)");
  if (!(critical_discord_factor > 0)) throw ConfigError("policy: critical_discord_factor must be positive");
}

bool should_abstain(const MetaFeatures& meta, const CoordinationPolicy& policy) {
  return policy.abstention_enabled && meta.atyp > policy.abstain_atyp_threshold &&
         meta.disagree > policy.abstain_disagree_threshold;
}

bool critical_discord(const MetaFeatures& meta, const CoordinationPolicy& policy) {
  return meta.disagree > policy.critical_discord_factor * policy.abstain_disagree_threshold;
}

double conformal_quantile(std::span<const double> residuals, double alpha) {
  if (residuals.empty()) throw std::invalid_argument("conformal: empty calibration set");
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("conformal: alpha must lie in (0, 1)");
  const auto n = residuals.size();
  const auto rank = static_cast<std::size_t>(std::ceil((1.0 - alpha) * static_cast<double>(n + 1) - 1e-9));
  if (rank > n) return 1.0;
  std::vector<double> s(residuals.begin(), residuals.end());
  std::nth_element(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(rank - 1), s.end());
  return s[rank - 1];
}

ConformalCalibrator::ConformalCalibrator(std::span<const int> outcomes,
                                         std::span<const double> predictions, double alpha)
    : alpha_(alpha), q_(1.0), n_(outcomes.size()) {
  if (outcomes.size() != predictions.size()) throw std::invalid_argument("conformal: length mismatch");
  std::vector<double> r(outcomes.size());
  for (std::size_t i = 0; i < r.size(); ++i) r[i] = std::abs(outcomes[i] - predictions[i]);
  q_ = conformal_quantile(r, alpha);
}

Interval ConformalCalibrator::interval(double p) const {
  return {std::max(0.0, p - q_), std::min(1.0, p + q_)};
}

Interval conformal_interval(std::span<const int> outcomes, std::span<const double> predictions,
                            double p_hat, double alpha) {
  return ConformalCalibrator(outcomes, predictions, alpha).interval(p_hat);
}

const char* route_name(Route r) {
  switch (r) {
    case Route::Specialist: return "SPECIALIST";
    case Route::Stacker: return "STACKER";
    case Route::Abstain: return "ABSTAIN";
  }
  return "?";
}

namespace {

std::vector<double> report_probs(std::span<const AgentReport> reports) {
  std::vector<double> p;
  for (const auto& r : reports) p.push_back(r.p_hat);
  return p;
}

}  // namespace

RoutingDecision route(const Patient& patient, std::span<const AgentReport> reports,
                      const SpecialistModel* specialist, const StackerModel& stacker,
                      const MetaFeatures& meta, const CoordinationPolicy& policy,
                      std::span<const double> agent_weights) {
  RoutingDecision d;
  if (policy.specialist_routing && patient.x3 && specialist) {
    d.route = Route::Specialist;
    d.fused = specialist->predict(*patient.x3);
    d.p = d.fused;
    return d;
  }
  d.fused = stack_predict(stacker, report_probs(reports), meta, agent_weights);
  if (should_abstain(meta, policy)) {
    d.route = Route::Abstain;
    return d;
  }
  d.route = Route::Stacker;
  d.p = d.fused;
  return d;
}

MetaFeatures compute_meta(const Patient& patient, std::span<const AgentReport> reports,
                          const MahalanobisModel& mahalanobis, const DensityEstimator& density) {
  MetaFeatures m;
  m.atyp = mahalanobis.score(patient.x);
  m.rho = density.density(patient.x);
  m.disagree = disagreement(report_probs(reports));
  return m;
}

DecisionPacket coordinate(const Patient& patient, std::span<const AgentReport> reports,
                          const CoordinationPolicy& policy, const CoordinationContext& ctx) {
  if (!ctx.mahalanobis) throw ConfigError("coordinate: missing fitted component 'mahalanobis'");
  if (!ctx.density) throw ConfigError("coordinate: missing fitted component 'density'");
  if (!ctx.history) throw ConfigError("coordinate: missing fitted component 'history'");
  if (!ctx.stacker) throw ConfigError("coordinate: missing fitted component 'stacker'");
  if (!ctx.conformal) throw ConfigError("coordinate: missing fitted component 'conformal'");
  if (policy.specialist_routing && !ctx.specialist)
    throw ConfigError("coordinate: missing fitted component 'specialist'");
  if (ctx.agent_density.size() != reports.size())
    throw ConfigError("coordinate: missing fitted component 'agent_density' for some agents");
  if (reports.empty()) throw std::invalid_argument("coordinate: no agent reports");

  DecisionPacket pk;
  pk.patient_id = patient.id;

  // 1) meta-features
  pk.meta = compute_meta(patient, reports, *ctx.mahalanobis, *ctx.density);

  // 2) local reliabilities
  const LocalHistory::Local local = ctx.history->evaluate(patient.x);
  std::vector<AgentEvidence> evidence(reports.size());
  for (std::size_t j = 0; j < reports.size(); ++j) {
    evidence[j].density = ctx.agent_density[j].density(patient.x);
    if (j < local.ece.size()) evidence[j].local_ece = local.ece[j];
    if (j < local.accuracy.size()) evidence[j].local_accuracy = local.accuracy[j];
  }
  pk.weights = compute_weights(reports, evidence, ctx.coefficients);

  // 3) routing and 4) abstention
  const RoutingDecision d = route(patient, reports, ctx.specialist, *ctx.stacker, pk.meta, policy,
                                  pk.weights.w);
  pk.route = d.route;
  pk.fused_p = d.fused;
  pk.p = d.p;
  pk.interval = ctx.conformal->interval(d.fused);

  // 5) package
  Explanation& e = pk.explanation;
  e.agents.assign(reports.begin(), reports.end());
  e.weights = pk.weights.w;
  e.specialist_available = patient.x3.has_value() && ctx.specialist;
  if (e.specialist_available) e.specialist_p = ctx.specialist->predict(*patient.x3);
  std::vector<std::size_t> order(reports.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return pk.weights.w[a] > pk.weights.w[b]; });
  for (std::size_t r = 0; r < std::min<std::size_t>(2, order.size()); ++r) {
    const auto& rep = reports[order[r]];
    e.top_rationales.push_back(rep.agent_id + " (" + rep.provenance.model_kind + ", w=" +
                               format_number(pk.weights.w[order[r]], 4) + ")");
  }
  double widest = -1;
  std::string widest_pair;
  for (std::size_t a = 0; a < reports.size(); ++a)
    for (std::size_t b = a + 1; b < reports.size(); ++b) {
      const double gap = std::abs(reports[a].p_hat - reports[b].p_hat);
      std::string text = reports[a].agent_id + " vs " + reports[b].agent_id + ": |dp|=" + format_number(gap, 4);
      if (gap > policy.abstain_disagree_threshold) e.key_disagreements.push_back(text);
      if (gap > widest) {
        widest = gap;
        widest_pair = std::move(text);
      }
    }
  if (e.key_disagreements.empty() && !widest_pair.empty()) e.key_disagreements.push_back(widest_pair);
  e.critical_discord = critical_discord(pk.meta, policy);
  e.notes = pk.weights.notes;
  if (pk.route == Route::Abstain) e.notes.push_back("escalated to clinician: atypical and discordant");
  return pk;
}

nlohmann::json packet_to_json(const DecisionPacket& pk, const Patient& patient) {
  using nlohmann::json;
  json agents = json::array();
  for (std::size_t j = 0; j < pk.explanation.agents.size(); ++j) {
    const auto& r = pk.explanation.agents[j];
    agents.push_back({{"agent_id", r.agent_id},
                      {"model_kind", r.provenance.model_kind},
                      {"model_version", r.provenance.model_version},
                      {"region_id", r.provenance.region_id},
                      {"features", r.provenance.features},
                      {"p_hat", r.p_hat},
                      {"uncertainty", r.uncertainty},
                      {"w", pk.weights.w[j]},
                      {"dens", pk.weights.dens[j]},
                      {"cons", pk.weights.cons[j]},
                      {"cal", pk.weights.cal[j]},
                      {"perf", pk.weights.perf[j]}});
  }
  json j;
  j["patient_id"] = patient.id;
  j["inputs"] = {{"x1", patient.x.x1}, {"x2", patient.x.x2},
                 {"x3", patient.x3 ? json(*patient.x3) : json(nullptr)}};
  j["meta"] = {{"atyp", pk.meta.atyp}, {"rho", pk.meta.rho}, {"disagree", pk.meta.disagree}};
  j["agents"] = std::move(agents);
  j["route"] = route_name(pk.route);
  j["p"] = pk.p ? json(*pk.p) : json(nullptr);
  j["fused_p"] = pk.fused_p;
  j["interval"] = {pk.interval.lower, pk.interval.upper};
  j["specialist_p"] = pk.explanation.specialist_p ? json(*pk.explanation.specialist_p) : json(nullptr);
  j["top_rationales"] = pk.explanation.top_rationales;
  j["key_disagreements"] = pk.explanation.key_disagreements;
  j["critical_discord"] = pk.explanation.critical_discord;
  j["notes"] = pk.explanation.notes;
  return j;
}

}  // namespace nof1
