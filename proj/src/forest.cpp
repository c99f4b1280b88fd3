#include "nof1/forest.hpp"

#include <algorithm>
#include <array>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nof1/glm.hpp"
#include "nof1/parallel.hpp"

namespace nof1 {

namespace {

double coord(const Point& p, int f) { return f == 0 ? p.x1 : p.x2; }

struct Frame {
  int node;
  std::size_t begin;
  std::size_t end;
  int depth;
};

struct SplitCandidate {
  bool found = false;
  int feature = -1;
  double threshold = 0.0;
  double score = 0.0;  // sum over children of positives^2 / weight
};

class TreeGrower {
 public:
  TreeGrower(std::span<const Point> x, std::span<const int> y,
             std::span<const std::uint32_t> mult, const ForestParams& params, Rng& rng)
      : x_(x), y_(y), mult_(mult), params_(params), rng_(rng), goes_left_(x.size(), 0) {
    std::vector<std::uint32_t> rows;
    for (std::size_t i = 0; i < x.size(); ++i)
      if (mult[i] > 0) rows.push_back(static_cast<std::uint32_t>(i));
    for (int f = 0; f < 2; ++f) {
      order_[f] = rows;
      std::stable_sort(order_[f].begin(), order_[f].end(), [&](auto a, auto b) {
        return coord(x_[a], f) < coord(x_[b], f);
      });
    }
    buffer_.resize(rows.size());
  }

  DecisionTree grow() {
    DecisionTree tree;
    tree.nodes.emplace_back();
    std::vector<Frame> stack{{0, 0, order_[0].size(), 0}};
    while (!stack.empty()) {
      const Frame fr = stack.back();
      stack.pop_back();
      double w = 0, pos = 0;
      for (std::size_t k = fr.begin; k < fr.end; ++k) {
        const auto r = order_[0][k];
        w += mult_[r];
        pos += mult_[r] * y_[r];
      }
      tree.nodes[fr.node].value = w > 0 ? pos / w : 0.0;
      if (fr.depth >= params_.max_depth || pos == 0 || pos == w || w < 2.0 * params_.min_leaf)
        continue;
      const SplitCandidate best = find_split(fr, w, pos);
      if (!best.found) continue;

      for (std::size_t k = fr.begin; k < fr.end; ++k) {
        const auto r = order_[0][k];
        goes_left_[r] = coord(x_[r], best.feature) <= best.threshold;
      }
      std::size_t mid = fr.begin;
      for (int f = 0; f < 2; ++f) mid = partition(order_[f], fr.begin, fr.end);

      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.emplace_back();
      tree.nodes.emplace_back();
      TreeNode& node = tree.nodes[fr.node];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.left = left;
      node.right = left + 1;
      stack.push_back({left + 1, mid, fr.end, fr.depth + 1});
      stack.push_back({left, fr.begin, mid, fr.depth + 1});
    }
    return tree;
  }

 private:
  // Stable partition of order[begin, end) by goes_left_; returns the split point.
  std::size_t partition(std::vector<std::uint32_t>& order, std::size_t begin, std::size_t end) {
    std::size_t out = begin;
    std::size_t spill = 0;
    for (std::size_t k = begin; k < end; ++k) {
      const auto r = order[k];
      if (goes_left_[r])
        order[out++] = r;
      else
        buffer_[spill++] = r;
    }
    std::copy(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(spill),
              order.begin() + static_cast<std::ptrdiff_t>(out));
    return out;
  }

  SplitCandidate best_on_feature(int f, const Frame& fr, double w, double pos) const {
    SplitCandidate best;
    const auto& ord = order_[f];
    const double parent = pos * pos / w;
    double wl = 0, pl = 0;
    for (std::size_t k = fr.begin; k + 1 < fr.end; ++k) {
      const auto r = ord[k];
      wl += mult_[r];
      pl += mult_[r] * y_[r];
      const double v = coord(x_[r], f);
      const double next = coord(x_[ord[k + 1]], f);
      if (!(v < next)) continue;
      const double wr = w - wl;
      if (wl < params_.min_leaf || wr < params_.min_leaf) continue;
      const double pr = pos - pl;
      const double score = pl * pl / wl + pr * pr / wr;
      if (score > parent + 1e-12 && (!best.found || score > best.score)) {
        best.found = true;
        best.feature = f;
        best.score = score;
        double t = 0.5 * (v + next);
        if (!(t < next)) t = v;
        best.threshold = t;
      }
    }
    return best;
  }

  bool constant_on(int f, const Frame& fr) const {
    return coord(x_[order_[f][fr.begin]], f) == coord(x_[order_[f][fr.end - 1]], f);
  }

  SplitCandidate find_split(const Frame& fr, double w, double pos) {
    std::array<int, 2> features{0, 1};
    rng_.shuffle(std::span<int>(features));
    SplitCandidate best;
    int evaluated = 0;
    for (int f : features) {
      if (evaluated >= params_.features_per_split) break;
      if (constant_on(f, fr)) continue;
      ++evaluated;
      const SplitCandidate c = best_on_feature(f, fr, w, pos);
      if (c.found && (!best.found || c.score > best.score)) best = c;
    }
    return best;
  }

  std::span<const Point> x_;
  std::span<const int> y_;
  std::span<const std::uint32_t> mult_;
  const ForestParams& params_;
  Rng& rng_;
  std::array<std::vector<std::uint32_t>, 2> order_;
  std::vector<std::uint32_t> buffer_;
  std::vector<unsigned char> goes_left_;
};

}  // namespace

double DecisionTree::predict(const Point& x) const {
  int i = 0;
  while (nodes[i].feature >= 0)
    i = coord(x, nodes[i].feature) <= nodes[i].threshold ? nodes[i].left : nodes[i].right;
  return nodes[i].value;
}

int DecisionTree::depth() const {
  std::vector<int> d(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, d[i]);
    if (nodes[i].feature >= 0) d[nodes[i].left] = d[nodes[i].right] = d[i] + 1;
  }
  return best;
}

double ForestModel::raw_predict(const Point& x) const {
  double s = 0.0;
  for (const auto& t : trees) s += t.predict(x);
  return trees.empty() ? 0.5 : s / static_cast<double>(trees.size());
}

double ForestModel::predict(const Point& x) const { return clip_probability(raw_predict(x)); }

DecisionTree grow_tree(std::span<const Point> features, std::span<const int> labels,
                       std::span<const std::uint32_t> multiplicity, const ForestParams& params,
                       Rng& rng) {
  TreeGrower grower(features, labels, multiplicity, params, rng);
  return grower.grow();
}

ForestModel fit_forest(std::span<const Point> features, std::span<const int> labels,
                       const ForestParams& params, std::uint64_t seed) {
  if (features.size() != labels.size())
    throw std::invalid_argument("forest: feature and label counts differ");
  if (features.size() < 20)
    throw std::invalid_argument("forest needs at least 20 rows, got " +
                                std::to_string(features.size()));
  if (params.n_trees < 1 || params.min_leaf < 1 || params.max_depth < 0 ||
      params.features_per_split < 1)
    throw std::invalid_argument("forest: invalid hyperparameters");

  ForestModel model;
  model.params = params;
  model.seed = seed;
  model.trees.resize(static_cast<std::size_t>(params.n_trees));
  const std::size_t n = features.size();
  parallel_for(model.trees.size(), [&](std::size_t t) {
    Rng rng(derive_seed(seed, {t}));
    std::vector<std::uint32_t> mult(n, params.bootstrap ? 0u : 1u);
    if (params.bootstrap)
      for (std::size_t i = 0; i < n; ++i) ++mult[rng.index(n)];
    model.trees[t] = grow_tree(features, labels, mult, params, rng);
  });
  return model;
}

}  // namespace nof1
