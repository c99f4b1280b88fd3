#pragma once

// Shared reduced-size pipeline for the integration tests: the default
// population and split with a smaller forest and fewer k-means restarts.

#include "nof1/harness.hpp"
#include "nof1/pipeline.hpp"

namespace testfx {

inline nof1::PipelineConfig small_pipeline() {
  nof1::PipelineConfig pc;
  pc.forest.n_trees = 40;
  pc.kmeans.restarts = 4;
  return pc;
}

inline nof1::ExperimentConfig small_experiment(const std::string& out) {
  nof1::ExperimentConfig c;
  c.pipeline = small_pipeline();
  c.evaluation.bootstrap = 40;
  c.output_dir = out;
  return c;
}

struct Fitted {
  nof1::Dataset data;
  nof1::SplitAssignment split;
  nof1::FittedPipeline fp;
};

inline const Fitted& fitted() {
  static const Fitted f = [] {
    Fitted x;
    x.data = nof1::generate_population(nof1::PopulationConfig::defaults(), 2025);
    x.split = nof1::stratified_split(x.data, {}, nof1::derive_seed(2025, {nof1::tag("split")}));
    x.fp = nof1::fit_pipeline(x.data, x.split, small_pipeline(), 2025);
    return x;
  }();
  return f;
}

}  // namespace testfx
