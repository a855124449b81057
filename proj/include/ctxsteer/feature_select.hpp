#pragma once

// Univariate column scores against class labels and top-F selection.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <span>
#include <string_view>
#include <vector>

#include "ctxsteer/error.hpp"
#include "ctxsteer/matrix.hpp"

namespace ctxsteer {

enum class FeatureScore { anova, chi2, mutual_information };

inline constexpr std::size_t kMiBins = 16;

namespace detail {

inline std::vector<double> column(const Matrix& x, std::size_t j) {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = x(i, j);
  return out;
}

/// One-way ANOVA F statistic. A column with zero within-class variance
/// scores +inf if the class means differ and 0 otherwise.
inline double anova_f(std::span<const double> v, std::span<const std::size_t> y, std::size_t classes) {
  const std::size_t n = v.size();
  std::vector<double> sum(classes, 0.0);
  std::vector<std::size_t> count(classes, 0);
  for (std::size_t i = 0; i < n; ++i) {
    sum[y[i]] += v[i];
    ++count[y[i]];
  }
  const double grand = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  double ssb = 0.0, ssw = 0.0;
  std::size_t present = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    if (!count[c]) continue;
    ++present;
    const double m = sum[c] / static_cast<double>(count[c]);
    ssb += static_cast<double>(count[c]) * (m - grand) * (m - grand);
  }
  for (std::size_t i = 0; i < n; ++i) {
    const double m = sum[y[i]] / static_cast<double>(count[y[i]]);
    ssw += (v[i] - m) * (v[i] - m);
  }
  if (present < 2 || n <= present) return 0.0;
  const double between = ssb / static_cast<double>(present - 1);
  const double within = ssw / static_cast<double>(n - present);
  if (within <= 0.0) return between > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return between / within;
}

/// Chi-square of class-summed feature mass against the class-prior
/// expectation, on the column min-max scaled to [0, 1].
inline double chi2(std::span<const double> v, std::span<const std::size_t> y, std::size_t classes) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return 0.0;
  std::vector<double> observed(classes, 0.0);
  std::vector<std::size_t> count(classes, 0);
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double s = (v[i] - *lo) / range;
    observed[y[i]] += s;
    ++count[y[i]];
    total += s;
  }
  double stat = 0.0;
  for (std::size_t c = 0; c < classes; ++c) {
    const double expected = total * static_cast<double>(count[c]) / static_cast<double>(v.size());
    if (expected > 0.0) stat += (observed[c] - expected) * (observed[c] - expected) / expected;
  }
  return stat;
}

/// Mutual information (nats) between the column discretized into equal-width
/// bins and the label.
inline double mutual_information(std::span<const double> v, std::span<const std::size_t> y, std::size_t classes,
                                 std::size_t bins = kMiBins) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double range = *hi - *lo;
  if (range <= 0.0) return 0.0;
  const double n = static_cast<double>(v.size());
  std::vector<double> joint(bins * classes, 0.0), pb(bins, 0.0), pc(classes, 0.0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    auto b = static_cast<std::size_t>((v[i] - *lo) / range * static_cast<double>(bins));
    b = std::min(b, bins - 1);
    joint[b * classes + y[i]] += 1.0;
    pb[b] += 1.0;
    pc[y[i]] += 1.0;
  }
  double mi = 0.0;
  for (std::size_t b = 0; b < bins; ++b)
    for (std::size_t c = 0; c < classes; ++c) {
      const double j = joint[b * classes + c];
      if (j > 0.0) mi += (j / n) * std::log(j * n / (pb[b] * pc[c]));
    }
  return std::max(mi, 0.0);
}

}  // namespace detail

inline std::vector<double> score_columns(const Matrix& x, std::span<const std::size_t> y, std::size_t classes,
                                         FeatureScore score) {
  require(x.rows() == y.size() && x.rows() > 0, Errc::dimension_error, "feature scoring: row/label mismatch");
  std::vector<double> out(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) {
    const auto v = detail::column(x, j);
    switch (score) {
      case FeatureScore::anova: out[j] = detail::anova_f(v, y, classes); break;
      case FeatureScore::chi2: out[j] = detail::chi2(v, y, classes); break;
      case FeatureScore::mutual_information: out[j] = detail::mutual_information(v, y, classes); break;
    }
  }
  return out;
}

/// Indices of the f highest scores, best first; ties keep the lower index.
inline std::vector<std::size_t> top_columns(std::span<const double> scores, std::size_t f) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  order.resize(std::min(f, order.size()));
  return order;
}

}  // namespace ctxsteer
