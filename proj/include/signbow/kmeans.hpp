#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "signbow/common.hpp"
#include "signbow/parallel.hpp"
#include "signbow/random.hpp"

namespace signbow {

struct KMeansResult {
  std::vector<std::vector<double>> centroids;
  std::vector<int> assignments;
  double inertia = 0.0;
  std::vector<double> inertia_trace;  // after each assignment step
  int iterations = 0;
};

namespace detail {

inline double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// Nearest centroid, ties resolved toward the lowest index.
inline int nearest_centroid(const std::vector<double>& p,
                            const std::vector<std::vector<double>>& centroids) {
  int best = 0;
  double best_d = std::numeric_limits<double>::max();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = sq_dist(p, centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(j);
    }
  }
  return best;
}

}  // namespace detail

/// Lloyd's algorithm with k-means++ seeding. Runs at most max_iters rounds or
/// until the relative inertia change drops below rel_tol; an emptied cluster
/// is reseeded with the point farthest from its assigned centroid.
/// Deterministic for a fixed seed at any thread count.
inline KMeansResult kmeans_fit(const std::vector<std::vector<double>>& points, int k,
                               std::uint64_t seed, int max_iters = 100, double rel_tol = 1e-6,
                               unsigned threads = 1) {
  const std::size_t n = points.size();
  if (k < 1) throw std::invalid_argument("kmeans_fit: k must be >= 1");
  if (n < static_cast<std::size_t>(k))
    throw std::invalid_argument("kmeans_fit: fewer points than clusters");

  Rng rng(seed);
  KMeansResult r;
  r.centroids.push_back(points[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(n) - 1))]);
  std::vector<double> d2(n, 0.0);
  while (static_cast<int>(r.centroids.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::max();
      for (const auto& c : r.centroids) best = std::min(best, detail::sq_dist(points[i], c));
      d2[i] = best;
      total += best;
    }
    if (!(total > 0.0)) {
      // Every point already coincides with a centroid; duplicate seeds are
      // repaired by the empty-cluster rule below, but distinct inputs never
      // reach this branch with k <= distinct point count.
      r.centroids.push_back(points[r.centroids.size() % n]);
      continue;
    }
    r.centroids.push_back(points[rng.categorical(d2)]);
  }

  r.assignments.assign(n, 0);
  double prev_inertia = std::numeric_limits<double>::max();
  for (int iter = 0; iter < max_iters; ++iter) {
    // Assignment
    std::vector<double> point_d2(n);
    parallel_for(n, threads, [&](std::size_t i) {
      const int j = detail::nearest_centroid(points[i], r.centroids);
      r.assignments[i] = j;
      point_d2[i] = detail::sq_dist(points[i], r.centroids[static_cast<std::size_t>(j)]);
    });
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) inertia += point_d2[i];
    r.inertia_trace.push_back(inertia);
    r.inertia = inertia;
    r.iterations = iter + 1;

    // Update
    const std::size_t dim = points[0].size();
    std::vector<std::vector<double>> sums(static_cast<std::size_t>(k),
                                          std::vector<double>(dim, 0.0));
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = sums[static_cast<std::size_t>(r.assignments[i])];
      for (std::size_t d = 0; d < dim; ++d) s[d] += points[i][d];
      ++counts[static_cast<std::size_t>(r.assignments[i])];
    }
    for (int j = 0; j < k; ++j) {
      if (counts[static_cast<std::size_t>(j)] == 0) {
        // Reseed with the point farthest from its current centroid.
        std::size_t far = 0;
        for (std::size_t i = 1; i < n; ++i)
          if (point_d2[i] > point_d2[far]) far = i;
        r.centroids[static_cast<std::size_t>(j)] = points[far];
        point_d2[far] = 0.0;
        continue;
      }
      auto& c = r.centroids[static_cast<std::size_t>(j)];
      for (std::size_t d = 0; d < dim; ++d)
        c[d] = sums[static_cast<std::size_t>(j)][d] /
               static_cast<double>(counts[static_cast<std::size_t>(j)]);
    }

    if (iter > 0 && prev_inertia - inertia < rel_tol * std::max(prev_inertia, 1e-300)) break;
    prev_inertia = inertia;
  }
  return r;
}

}  // namespace signbow
