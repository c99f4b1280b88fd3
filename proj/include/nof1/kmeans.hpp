#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "nof1/synthgen.hpp"

namespace nof1 {

struct KMeansOptions {
  int restarts = 25;
  int max_iterations = 300;
};

struct KMeansResult {
  std::vector<Point> centroids;  // sorted by (x1, x2) so region ids are stable
  std::vector<int> assignment;
  double wcss = 0.0;
};

int nearest_centroid(std::span<const Point> centroids, const Point& x);

// Lloyd's algorithm from k-means++ seeds; best of `restarts` runs by
// within-cluster sum of squares. Restart r seeds from derive_seed(seed, {r}).
// An emptied cluster is re-seeded at the point farthest from its centroid.
KMeansResult kmeans_regions(std::span<const Point> points, int k, std::uint64_t seed,
                            const KMeansOptions& options = {});

}  // namespace nof1
