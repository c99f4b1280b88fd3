#include "nof1/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nof1/parallel.hpp"

namespace nof1 {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::Monolith: return "Monolith";
    case Variant::MultiFull: return "Multi_full";
    case Variant::NoSpecialist: return "No_specialist";
    case Variant::NoStacking: return "No_stacking";
    case Variant::AgentsOnly: return "Agents_only";
  }
  return "?";
}

std::optional<Variant> parse_variant(std::string_view name) {
  for (Variant v : kAllVariants)
    if (name == variant_name(v)) return v;
  return std::nullopt;
}

const std::vector<double>& ScoredRows::scores(Variant v) const {
  switch (v) {
    case Variant::Monolith: return mono;
    case Variant::MultiFull: return multi;
    case Variant::NoSpecialist: return no_specialist;
    case Variant::NoStacking: return no_stacking;
    case Variant::AgentsOnly: return agents_only;
  }
  throw std::logic_error("unknown variant");
}

CoordinationContext FittedPipeline::context() const {
  CoordinationContext c;
  c.mahalanobis = &mahalanobis;
  c.density = density ? &*density : nullptr;
  c.agent_density = agent_density;
  c.history = history ? &*history : nullptr;
  c.specialist = &specialist;
  c.stacker = &stacker.model;
  c.conformal = conformal ? &*conformal : nullptr;
  c.coefficients = config.coefficients;
  return c;
}

std::vector<double> proximity_weights(std::span<const Point> centroids, const Point& x) {
  std::vector<double> w(centroids.size());
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double a = x.x1 - centroids[j].x1, b = x.x2 - centroids[j].x2;
    w[j] = a * a + b * b;
    best = std::min(best, w[j]);
  }
  double total = 0;
  for (auto& v : w) total += v = std::exp(-(v - best));
  for (auto& v : w) v /= total;
  return w;
}

double proximity_average(std::span<const RegionalAgent> agents, const Point& x) {
  std::vector<Point> c;
  for (const auto& a : agents) c.push_back(a.centroid);
  const auto w = proximity_weights(c, x);
  double p = 0;
  for (std::size_t j = 0; j < agents.size(); ++j) p += w[j] * agents[j].predict(x);
  return clip_probability(p);
}

Patient make_patient(const Individual& ind) { return {ind.id, ind.x, ind.x3}; }

std::vector<AgentReport> agent_reports(std::span<const RegionalAgent> agents, const Point& x,
                                       const LocalHistory* history) {
  std::optional<LocalHistory::Local> local;
  if (history) local = history->evaluate(x);
  std::vector<AgentReport> out;
  for (std::size_t j = 0; j < agents.size(); ++j) {
    const auto& a = agents[j];
    AgentReport r;
    r.agent_id = "region" + std::to_string(a.region_id);
    r.p_hat = a.predict(x);
    r.uncertainty = local ? local->ece[j] : 0.0;
    r.provenance = {model_kind_name(a.chosen_kind), kModelVersion, a.region_id, {"x1", "x2"}};
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

template <class F>
auto stage(StageTimings* t, const std::string& name, F&& f) {
  try {
    if (t) return t->time(name, std::forward<F>(f));
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

struct AgentView {
  std::vector<std::vector<double>> probs;  // [row][agent]
  std::vector<MetaFeatures> meta;
};

AgentView agent_view(const FittedPipeline& fp, const Dataset& data, std::span<const std::size_t> rows) {
  AgentView v;
  v.probs.resize(rows.size());
  v.meta.resize(rows.size());
  parallel_for(rows.size(), [&](std::size_t i) {
    const Individual& ind = data[rows[i]];
    const auto reports = agent_reports(fp.agents, ind.x, nullptr);
    for (const auto& r : reports) v.probs[i].push_back(r.p_hat);
    v.meta[i] = compute_meta(make_patient(ind), reports, fp.mahalanobis, *fp.density);
  });
  return v;
}

}  // namespace

FittedPipeline fit_pipeline(const Dataset& data, const SplitAssignment& split,
                            const PipelineConfig& config, std::uint64_t seed,
                            StageTimings* timings) {
  FittedPipeline fp;
  fp.config = config;
  std::vector<Point> tx;
  std::vector<int> ty;
  std::vector<std::optional<double>> tx3;
  for (auto i : split.train) {
    tx.push_back(data[i].x);
    ty.push_back(data[i].outcome);
    tx3.push_back(data[i].x3);
  }

  stage(timings, "fit_monolith", [&] {
    fp.monolith = fit_monolith(tx, ty, config.forest, derive_seed(seed, {tag("monolith")}), config.glm);
  });
  stage(timings, "fit_regions", [&] {
    fp.regions = kmeans_regions(tx, config.regions, derive_seed(seed, {tag("kmeans")}), config.kmeans);
  });
  stage(timings, "fit_agents", [&] {
    RegionalOptions ro;
    ro.folds = config.cv_folds;
    ro.forest = config.forest;
    ro.glm = config.glm;
    fp.agents = fit_regional_agents(tx, ty, fp.regions, derive_seed(seed, {tag("agents")}), ro);
  });
  stage(timings, "fit_specialist", [&] { fp.specialist = fit_specialist(tx3, ty, config.glm); });
  stage(timings, "fit_atypicality", [&] {
    fp.mahalanobis = fit_mahalanobis(tx);
    fp.density.emplace(tx, config.knn_k, config.density_epsilon);
    for (const auto& a : fp.agents) {
      std::vector<Point> ref;
      for (auto r : a.train_rows) ref.push_back(tx[r]);
      const int k = std::min<int>(config.knn_k, static_cast<int>(ref.size()));
      fp.agent_density.emplace_back(std::move(ref), std::max(1, k), config.density_epsilon);
    }
    std::vector<double> m(tx.size());
    for (std::size_t i = 0; i < tx.size(); ++i) m[i] = fp.mahalanobis.score(tx[i]);
    fp.policy = config.policy;
    fp.policy.abstain_atyp_threshold = quantile(m, config.abstain_atyp_quantile);
    fp.policy.validate();
  });

  stage(timings, "fit_stacker", [&] {
    const AgentView val = agent_view(fp, data, split.validation);
    std::vector<int> vy;
    std::vector<Point> vx;
    for (auto i : split.validation) {
      vy.push_back(data[i].outcome);
      vx.push_back(data[i].x);
    }
    fp.stacker = fit_stacker(vy, val.probs, val.meta, StackerVariant::Reproduction, config.stacker);

    std::vector<std::vector<double>> by_agent(fp.agents.size(), std::vector<double>(vy.size()));
    for (std::size_t i = 0; i < vy.size(); ++i)
      for (std::size_t j = 0; j < fp.agents.size(); ++j) by_agent[j][i] = val.probs[i][j];
    fp.history.emplace(vx, vy, std::move(by_agent), config.history_neighbors, config.history_half_life);
  });

  stage(timings, "fit_conformal", [&] {
    const ScoredRows val = score_rows(fp, data, split.validation);
    fp.conformal.emplace(val.y, val.multi, fp.policy.conformal_alpha);
  });
  return fp;
}

ScoredRows score_rows(const FittedPipeline& fp, const Dataset& data,
                      std::span<const std::size_t> rows) {
  if (!fp.density) throw ConfigError("score_rows: pipeline has no density estimator");
  ScoredRows s;
  s.rows.assign(rows.begin(), rows.end());
  const AgentView v = agent_view(fp, data, rows);
  s.agent_probs = v.probs;
  s.meta = v.meta;
  const std::size_t n = rows.size();
  s.y.resize(n);
  s.cluster.resize(n);
  s.x3_present.resize(n);
  s.mono.resize(n);
  s.multi.resize(n);
  s.no_specialist.resize(n);
  s.no_stacking.resize(n);
  s.agents_only.resize(n);
  CoordinationPolicy no_routing = fp.policy;
  no_routing.specialist_routing = false;
  CoordinationPolicy routing = fp.policy;
  routing.specialist_routing = true;
  routing.abstention_enabled = false;
  no_routing.abstention_enabled = false;
  parallel_for(n, [&](std::size_t i) {
    const Individual& ind = data[rows[i]];
    const Patient pt = make_patient(ind);
    s.y[i] = ind.outcome;
    s.cluster[i] = ind.cluster;
    s.x3_present[i] = ind.x3.has_value();
    s.mono[i] = fp.monolith.predict(ind.x);
    std::vector<AgentReport> reports(v.probs[i].size());
    for (std::size_t j = 0; j < reports.size(); ++j) reports[j].p_hat = v.probs[i][j];
    s.multi[i] = route(pt, reports, &fp.specialist, fp.stacker.model, v.meta[i], routing).fused;
    s.no_specialist[i] = route(pt, reports, &fp.specialist, fp.stacker.model, v.meta[i], no_routing).fused;
    s.agents_only[i] = proximity_average(fp.agents, ind.x);
    s.no_stacking[i] = ind.x3 ? fp.specialist.predict(*ind.x3) : s.agents_only[i];
  });
  return s;
}

std::vector<VariantMetrics> run_ablations(const ScoredRows& scored, double tail_fraction,
                                          std::span<const Variant> variants) {
  std::vector<double> m(scored.meta.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = scored.meta[i].atyp;
  const auto tail = select_tail(m, tail_fraction).indices;
  std::vector<int> yt;
  for (auto i : tail) yt.push_back(scored.y[i]);
  std::vector<VariantMetrics> out;
  for (Variant v : variants) {
    const auto& p = scored.scores(v);
    std::vector<double> pt;
    for (auto i : tail) pt.push_back(p[i]);
    VariantMetrics vm;
    vm.variant = v;
    vm.auc_overall = auc_value(p, scored.y);
    vm.acc_overall = accuracy(p, scored.y);
    vm.auc_tail = auc_value(pt, yt);
    vm.acc_tail = accuracy(pt, yt);
    out.push_back(vm);
  }
  return out;
}

}  // namespace nof1
