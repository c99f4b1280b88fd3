#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nof1/synthgen.hpp"

namespace nof1 {

struct ForestParams {
  int n_trees = 600;
  int min_leaf = 10;
  int max_depth = 16;
  int features_per_split = 1;
  bool bootstrap = true;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // positive fraction of the (in-bag weighted) node
};

struct DecisionTree {
  std::vector<TreeNode> nodes;

  double predict(const Point& x) const;
  int depth() const;
};

struct ForestModel {
  std::vector<DecisionTree> trees;
  ForestParams params;
  std::uint64_t seed = 0;

  // Mean of leaf positive-fractions, clipped away from 0 and 1.
  double predict(const Point& x) const;
  // Unclipped mean.
  double raw_predict(const Point& x) const;
};

// Grows a single Gini tree on rows weighted by integer multiplicities
// (bootstrap in-bag counts). Split candidates are midpoints between distinct
// feature values; x <= threshold goes left.
DecisionTree grow_tree(std::span<const Point> features, std::span<const int> labels,
                       std::span<const std::uint32_t> multiplicity, const ForestParams& params,
                       Rng& rng);

// Tree t uses the substream derive_seed(seed, {t}). Trees are grown in
// parallel; the result does not depend on the worker count.
ForestModel fit_forest(std::span<const Point> features, std::span<const int> labels,
                       const ForestParams& params, std::uint64_t seed);

}  // namespace nof1
