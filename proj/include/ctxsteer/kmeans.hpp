#pragma once

// Lloyd's k-means with k-means++ seeding and best-of-n restarts.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "ctxsteer/error.hpp"
#include "ctxsteer/matrix.hpp"
#include "ctxsteer/rng.hpp"

namespace ctxsteer {

struct KMeansConfig {
  std::size_t k = 2;
  std::size_t restarts = 10;
  std::size_t max_iterations = 300;
  std::uint64_t seed = 0;
};

struct KMeansResult {
  std::vector<int> labels;
  Matrix centers;
  double inertia = 0.0;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

inline KMeansResult kmeans_once(const Matrix& x, std::size_t k, std::size_t max_iterations, Rng& rng) {
  const std::size_t n = x.rows(), d = x.cols();
  Matrix centers(k, d);
  std::vector<double> closest(n, std::numeric_limits<double>::infinity());
  std::size_t pick = static_cast<std::size_t>(rng.below(n));
  for (std::size_t c = 0; c < k; ++c) {
    if (c > 0) {
      double total = 0.0;
      for (double v : closest) total += v;
      if (total <= 0.0) {
        pick = static_cast<std::size_t>(rng.below(n));
      } else {
        double u = rng.uniform() * total;
        pick = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          u -= closest[i];
          if (u < 0.0) {
            pick = i;
            break;
          }
        }
      }
    }
    std::copy(x.row(pick).begin(), x.row(pick).end(), centers.row(c).begin());
    for (std::size_t i = 0; i < n; ++i) closest[i] = std::min(closest[i], squared_distance(x.row(i), centers.row(c)));
  }

  std::vector<int> labels(n, -1);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int best = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dd = squared_distance(x.row(i), centers.row(c));
        if (dd < bd) {
          bd = dd;
          best = static_cast<int>(c);
        }
      }
      if (labels[i] != best) {
        labels[i] = best;
        changed = true;
      }
    }
    // An empty cluster takes the point farthest from its current center.
    std::vector<std::size_t> size(k, 0);
    for (int l : labels) ++size[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k; ++c) {
      if (size[c] > 0) continue;
      std::size_t far = 0;
      double fd = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (size[static_cast<std::size_t>(labels[i])] <= 1) continue;
        const double dd = squared_distance(x.row(i), centers.row(static_cast<std::size_t>(labels[i])));
        if (dd > fd) {
          fd = dd;
          far = i;
        }
      }
      --size[static_cast<std::size_t>(labels[far])];
      labels[far] = static_cast<int>(c);
      size[c] = 1;
      changed = true;
    }
    Matrix next(k, d);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < d; ++j) next(static_cast<std::size_t>(labels[i]), j) += x(i, j);
    for (std::size_t c = 0; c < k; ++c)
      for (std::size_t j = 0; j < d; ++j) next(c, j) /= static_cast<double>(size[c]);
    centers = std::move(next);
    if (!changed) break;
  }
  double inertia = 0.0;
  for (std::size_t i = 0; i < n; ++i) inertia += squared_distance(x.row(i), centers.row(static_cast<std::size_t>(labels[i])));
  return {std::move(labels), std::move(centers), inertia};
}

}  // namespace detail

/// Lowest-inertia run over `restarts` seeded k-means++ initializations.
inline KMeansResult kmeans(const Matrix& x, const KMeansConfig& config) {
  require(config.k >= 1 && config.k <= x.rows(), Errc::invalid_count,
          "k-means: k=" + std::to_string(config.k) + " with " + std::to_string(x.rows()) + " rows");
  require(x.cols() >= 1, Errc::dimension_error, "k-means: no features");
  KMeansResult best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(1, config.restarts); ++r) {
    Rng rng(mix_seed(config.seed, r));
    KMeansResult run = detail::kmeans_once(x, config.k, config.max_iterations, rng);
    if (run.inertia < best.inertia) best = std::move(run);
  }
  return best;
}

}  // namespace ctxsteer
