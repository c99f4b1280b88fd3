#include <cmath>

#include "doctest.h"
#include "fixture.hpp"
#include "nof1/model_io.hpp"
#include "nof1/parallel.hpp"

using namespace nof1;

TEST_SUITE("pipeline") {

TEST_CASE("fitted state") {
  const auto& f = testfx::fitted();
  CHECK(f.fp.agents.size() == 3);
  CHECK(f.fp.regions.centroids.size() == 3);
  CHECK(f.fp.agent_density.size() == 3);
  CHECK(f.fp.stacker.model.variant == StackerVariant::Reproduction);
  CHECK(f.fp.stacker.model.b.size() == 3);
  REQUIRE(f.fp.conformal.has_value());
  CHECK(f.fp.conformal->size() == f.split.validation.size());
  CHECK_FALSE(f.fp.policy.abstention_enabled);
  // threshold is the 99th percentile of training m(x)
  std::vector<double> m;
  for (auto i : f.split.train) m.push_back(f.fp.mahalanobis.score(f.data[i].x));
  CHECK(f.fp.policy.abstain_atyp_threshold == doctest::Approx(quantile(m, 0.99)));
}

TEST_CASE("packets: specialist supremacy and perturbation") {
  const auto& f = testfx::fitted();
  const auto ctx = f.fp.context();
  int d_rows = 0;
  for (auto row : f.split.test) {
    const auto& ind = f.data[row];
    if (!ind.x3) continue;
    ++d_rows;
    Patient pt = make_patient(ind);
    const auto pk = coordinate(pt, agent_reports(f.fp.agents, pt.x, ctx.history), f.fp.policy, ctx);
    CHECK(pk.route == Route::Specialist);
    CHECK(*pk.p == f.fp.specialist.predict(*ind.x3));
    pt.x = {pt.x.x1 + 3.7, pt.x.x2 - 5.1};
    const auto moved = coordinate(pt, agent_reports(f.fp.agents, pt.x, ctx.history), f.fp.policy, ctx);
    CHECK(*moved.p == *pk.p);
  }
  CHECK(d_rows == 80);
}

TEST_CASE("packets agree with batch scoring and carry a full explanation") {
  const auto& f = testfx::fitted();
  const auto ctx = f.fp.context();
  std::vector<std::size_t> rows(f.split.test.begin(), f.split.test.begin() + 300);
  const auto sc = score_rows(f.fp, f.data, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Patient pt = make_patient(f.data[rows[i]]);
    const auto reports = agent_reports(f.fp.agents, pt.x, ctx.history);
    const auto pk = coordinate(pt, reports, f.fp.policy, ctx);
    const auto again = coordinate(pt, reports, f.fp.policy, ctx);
    CHECK(pk.fused_p == sc.multi[i]);
    CHECK(again.fused_p == pk.fused_p);
    REQUIRE(pk.p.has_value());
    CHECK(pk.interval.lower <= *pk.p);
    CHECK(*pk.p <= pk.interval.upper);
    CHECK(pk.interval.lower >= 0.0);
    CHECK(pk.interval.upper <= 1.0);
    CHECK(pk.explanation.agents.size() == 3);
    CHECK(pk.explanation.weights.size() == 3);
    CHECK(pk.explanation.specialist_available == pt.x3.has_value());
    CHECK(pk.meta.atyp >= 0);
    CHECK(pk.meta.rho > 0);
    const auto j = packet_to_json(pk, pt);
    CHECK(j["agents"].size() == 3);
    CHECK(j["agents"][0].contains("w"));
    CHECK(j["agents"][0].contains("model_version"));
  }
}

TEST_CASE("missing components are named") {
  const auto& f = testfx::fitted();
  auto ctx = f.fp.context();
  const Patient pt = make_patient(f.data[f.split.test[0]]);
  const auto reports = agent_reports(f.fp.agents, pt.x, ctx.history);
  ctx.conformal = nullptr;
  try {
    coordinate(pt, reports, f.fp.policy, ctx);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("conformal") != std::string::npos);
  }
  ctx = f.fp.context();
  ctx.stacker = nullptr;
  CHECK_THROWS_WITH_AS(coordinate(pt, reports, f.fp.policy, ctx), doctest::Contains("stacker"), ConfigError);
}

TEST_CASE("abstention only touches non-specialist rows above both thresholds") {
  const auto& f = testfx::fitted();
  auto ctx = f.fp.context();
  CoordinationPolicy pol = f.fp.policy;
  pol.abstention_enabled = true;
  for (auto row : f.split.test) {
    const Patient pt = make_patient(f.data[row]);
    const auto pk = coordinate(pt, agent_reports(f.fp.agents, pt.x, ctx.history), pol, ctx);
    if (pk.route == Route::Abstain) {
      CHECK_FALSE(pt.x3.has_value());
      CHECK(pk.meta.atyp > pol.abstain_atyp_threshold);
      CHECK(pk.meta.disagree > pol.abstain_disagree_threshold);
      CHECK_FALSE(pk.p.has_value());
    }
  }
}

TEST_CASE("conformal coverage on the test split") {
  const auto& f = testfx::fitted();
  const auto sc = score_rows(f.fp, f.data, f.split.test);
  int covered = 0;
  for (std::size_t i = 0; i < sc.y.size(); ++i) {
    const auto iv = f.fp.conformal->interval(sc.multi[i]);
    covered += sc.y[i] >= iv.lower && sc.y[i] <= iv.upper;
  }
  CHECK(static_cast<double>(covered) / sc.y.size() >= 0.87);
}

TEST_CASE("ablation variants") {
  const auto& f = testfx::fitted();
  const auto sc = score_rows(f.fp, f.data, f.split.test);
  for (std::size_t i = 0; i < sc.y.size(); ++i) {
    if (sc.x3_present[i]) {
      CHECK(sc.no_stacking[i] == sc.multi[i]);
    } else {
      CHECK(sc.no_specialist[i] == sc.multi[i]);
      CHECK(sc.no_stacking[i] == sc.agents_only[i]);
    }
  }
  const auto ab = run_ablations(sc, 0.12);
  REQUIRE(ab.size() == 5);
  CHECK(ab[0].variant == Variant::Monolith);
  CHECK(ab[0].auc_overall == auc_value(sc.mono, sc.y));
  for (Variant v : kAllVariants) CHECK(parse_variant(variant_name(v)) == v);
  CHECK_FALSE(parse_variant("multi_full").has_value());
  const auto w = proximity_weights(f.fp.regions.centroids, {0.2, 0.1});
  double s = 0;
  for (double x : w) s += x;
  CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("fit is independent of the worker count") {
  const auto& f = testfx::fitted();
  set_thread_count(1);
  const auto one = fit_pipeline(f.data, f.split, testfx::small_pipeline(), 2025);
  set_thread_count(3);
  const auto three = fit_pipeline(f.data, f.split, testfx::small_pipeline(), 2025);
  set_thread_count(0);
  const auto a = score_rows(one, f.data, f.split.test), b = score_rows(three, f.data, f.split.test);
  CHECK(a.mono == b.mono);
  CHECK(a.multi == b.multi);
  CHECK(a.agents_only == b.agents_only);
}

}

TEST_SUITE("model_io") {

TEST_CASE("round trips") {
  const auto& f = testfx::fitted();
  const auto glm = read_model_file(
                       model_file("quadratic_glm", f.fp.monolith.glm, {"train", 2025, {}}), "quadratic_glm")
                       .get<QuadraticGlm>();
  CHECK(glm.coefficients == f.fp.monolith.glm.coefficients);

  const nlohmann::json fj = f.fp.monolith.forest;
  const auto forest = nlohmann::json::parse(fj.dump()).get<ForestModel>();
  for (auto row : f.split.test) CHECK(forest.predict(f.data[row].x) == f.fp.monolith.forest.predict(f.data[row].x));

  for (const auto& a : f.fp.agents) {
    const nlohmann::json j = a;
    const auto back = nlohmann::json::parse(j.dump()).get<RegionalAgent>();
    CHECK(back.chosen_kind == a.chosen_kind);
    CHECK(back.predict({0.3, -0.4}) == a.predict({0.3, -0.4}));
  }
  const nlohmann::json sj = f.fp.stacker.model;
  const auto st = sj.get<StackerModel>();
  CHECK(st.b == f.fp.stacker.model.b);
  CHECK(st.a1 == f.fp.stacker.model.a1);
  const nlohmann::json kj = f.fp.regions;
  CHECK(kj.get<KMeansResult>().centroids.size() == 3);
  const nlohmann::json spj = f.fp.specialist;
  CHECK(spj.get<SpecialistModel>().gamma == f.fp.specialist.gamma);

  const auto file = model_file("specialist", spj, {"train", 1, {}});
  CHECK(file["format_version"] == kModelFormatVersion);
  CHECK_THROWS(read_model_file(file, "stacker"));
  auto old = file;
  old["format_version"] = 99;
  CHECK_THROWS(read_model_file(old, "specialist"));
}

}
