#include "nof1/kmeans.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>

#include "nof1/parallel.hpp"

namespace nof1 {

namespace {

double sq_dist(const Point& a, const Point& b) {
  const double d1 = a.x1 - b.x1, d2 = a.x2 - b.x2;
  return d1 * d1 + d2 * d2;
}

std::vector<Point> plus_plus_init(std::span<const Point> pts, int k, Rng& rng) {
  std::vector<Point> c{pts[rng.index(pts.size())]};
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = sq_dist(pts[i], c[0]);
  while (static_cast<int>(c.size()) < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = 0;
    if (total > 0) {
      double u = rng.uniform() * total;
      for (pick = 0; pick + 1 < pts.size(); ++pick) {
        u -= d2[pick];
        if (u < 0) break;
      }
    } else {
      pick = rng.index(pts.size());
    }
    c.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = std::min(d2[i], sq_dist(pts[i], c.back()));
  }
  return c;
}

KMeansResult lloyd(std::span<const Point> pts, std::vector<Point> centroids, int max_iter) {
  const auto k = centroids.size();
  KMeansResult r;
  r.assignment.assign(pts.size(), -1);
  for (int iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const int a = nearest_centroid(centroids, pts[i]);
      if (a != r.assignment[i]) {
        r.assignment[i] = a;
        changed = true;
      }
    }
    std::vector<Point> sum(k);
    std::vector<std::size_t> cnt(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      const auto a = static_cast<std::size_t>(r.assignment[i]);
      sum[a].x1 += pts[i].x1;
      sum[a].x2 += pts[i].x2;
      ++cnt[a];
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (cnt[j] == 0) {
        // Re-seed at the point worst served by its current centroid.
        std::size_t far = 0;
        double best = -1;
        for (std::size_t i = 0; i < pts.size(); ++i) {
          const double d = sq_dist(pts[i], centroids[static_cast<std::size_t>(r.assignment[i])]);
          if (d > best) {
            best = d;
            far = i;
          }
        }
        centroids[j] = pts[far];
        r.assignment[far] = static_cast<int>(j);
        changed = true;
        continue;
      }
      centroids[j] = {sum[j].x1 / static_cast<double>(cnt[j]), sum[j].x2 / static_cast<double>(cnt[j])};
    }
    if (!changed) break;
  }
  for (std::size_t i = 0; i < pts.size(); ++i) r.assignment[i] = nearest_centroid(centroids, pts[i]);
  r.centroids = std::move(centroids);
  r.wcss = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    r.wcss += sq_dist(pts[i], r.centroids[static_cast<std::size_t>(r.assignment[i])]);
  return r;
}

}  // namespace

int nearest_centroid(std::span<const Point> centroids, const Point& x) {
  int best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = sq_dist(centroids[j], x);
    if (d < bd) {
      bd = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

KMeansResult kmeans_regions(std::span<const Point> points, int k, std::uint64_t seed,
                            const KMeansOptions& options) {
  if (k < 1) throw std::invalid_argument("kmeans: k must be >= 1");
  if (points.size() < static_cast<std::size_t>(k))
    throw std::invalid_argument("kmeans: n = " + std::to_string(points.size()) + " < k = " +
                                std::to_string(k));
  const int restarts = std::max(1, options.restarts);
  std::vector<KMeansResult> runs(static_cast<std::size_t>(restarts));
  parallel_for(runs.size(), [&](std::size_t r) {
    Rng rng(derive_seed(seed, {r}));
    runs[r] = lloyd(points, plus_plus_init(points, k, rng), options.max_iterations);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r)
    if (runs[r].wcss < runs[best].wcss) best = r;
  KMeansResult out = std::move(runs[best]);

  std::vector<int> perm(static_cast<std::size_t>(k));
  std::iota(perm.begin(), perm.end(), 0);
  std::sort(perm.begin(), perm.end(), [&](int a, int b) {
    const auto& pa = out.centroids[static_cast<std::size_t>(a)];
    const auto& pb = out.centroids[static_cast<std::size_t>(b)];
    return pa.x1 != pb.x1 ? pa.x1 < pb.x1 : pa.x2 < pb.x2;
  });
  std::vector<int> rank(static_cast<std::size_t>(k));
  std::vector<Point> sorted(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) {
    rank[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])] = j;
    sorted[static_cast<std::size_t>(j)] = out.centroids[static_cast<std::size_t>(perm[static_cast<std::size_t>(j)])];
  }
  for (auto& a : out.assignment) a = rank[static_cast<std::size_t>(a)];
  out.centroids = std::move(sorted);
  return out;
}

}  // namespace nof1
