#pragma once

// Bagged CART classifier: Gini splits, ceil(sqrt(d)) candidate features per
// split, unlimited depth, leaves of one sample allowed. Each tree draws from
// its own generator seeded by (seed, tree index), so the fitted forest does
// not depend on the worker count.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <vector>

#include "ctxsteer/error.hpp"
#include "ctxsteer/matrix.hpp"
#include "ctxsteer/parallel.hpp"
#include "ctxsteer/rng.hpp"

namespace ctxsteer {

struct ForestConfig {
  std::size_t trees = 100;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
};

class DecisionTree {
 public:
  /// `classes` is the number of distinct class indices; y[i] < classes.
  void fit(const Matrix& x, std::span<const std::size_t> y, std::size_t classes, std::span<const std::size_t> sample,
           Rng& rng) {
    classes_ = classes;
    nodes_.clear();
    std::vector<std::size_t> idx(sample.begin(), sample.end());
    mtry_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(x.cols())))));
    build(x, y, idx, rng);
  }

  std::size_t predict(std::span<const double> row) const {
    std::size_t n = 0;
    while (nodes_[n].feature >= 0)
      n = row[static_cast<std::size_t>(nodes_[n].feature)] <= nodes_[n].threshold ? nodes_[n].left : nodes_[n].right;
    return nodes_[n].label;
  }

  std::size_t node_count() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    std::size_t left = 0, right = 0;
    std::size_t label = 0;
  };

  static double gini(std::span<const std::size_t> counts, double total) {
    double s = 1.0;
    for (auto c : counts) s -= (static_cast<double>(c) / total) * (static_cast<double>(c) / total);
    return s;
  }

  std::size_t build(const Matrix& x, std::span<const std::size_t> y, std::vector<std::size_t>& idx, Rng& rng) {
    const std::size_t self = nodes_.size();
    nodes_.emplace_back();
    std::vector<std::size_t> counts(classes_, 0);
    for (auto i : idx) ++counts[y[i]];
    nodes_[self].label = static_cast<std::size_t>(std::max_element(counts.begin(), counts.end()) - counts.begin());
    const std::size_t distinct = static_cast<std::size_t>(std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }));
    if (distinct <= 1) return self;

    // Features are tried in random order; constant ones do not use up the
    // mtry budget, so a split is found whenever one exists.
    std::vector<std::size_t> features(x.cols());
    std::iota(features.begin(), features.end(), std::size_t{0});
    rng.shuffle(features);

    const double total = static_cast<double>(idx.size());
    double best_impurity = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::size_t tried = 0;
    std::vector<std::size_t> order(idx);
    std::vector<std::size_t> left(classes_), right(classes_);
    for (std::size_t f : features) {
      if (tried == mtry_) break;
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x(a, f) < x(b, f); });
      if (x(order.front(), f) == x(order.back(), f)) continue;
      ++tried;
      std::fill(left.begin(), left.end(), 0);
      right = counts;
      for (std::size_t p = 0; p + 1 < order.size(); ++p) {
        ++left[y[order[p]]];
        --right[y[order[p]]];
        const double lo = x(order[p], f), hi = x(order[p + 1], f);
        if (lo == hi) continue;
        const double nl = static_cast<double>(p + 1), nr = total - nl;
        const double impurity = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          best_threshold = lo + (hi - lo) / 2.0;
          if (best_threshold >= hi) best_threshold = lo;
        }
      }
    }
    if (best_feature < 0) return self;

    std::vector<std::size_t> li, ri;
    for (auto i : idx) (x(i, static_cast<std::size_t>(best_feature)) <= best_threshold ? li : ri).push_back(i);
    idx.clear();
    idx.shrink_to_fit();
    nodes_[self].feature = best_feature;
    nodes_[self].threshold = best_threshold;
    const std::size_t l = build(x, y, li, rng);
    nodes_[self].left = l;
    const std::size_t r = build(x, y, ri, rng);
    nodes_[self].right = r;
    return self;
  }

  std::size_t classes_ = 0;
  std::size_t mtry_ = 1;
  std::vector<Node> nodes_;
};

class RandomForest {
 public:
  explicit RandomForest(ForestConfig config = {}) : config_(config) {}

  void fit(const Matrix& x, std::span<const std::size_t> y, std::size_t classes) {
    require(x.rows() == y.size() && x.rows() > 0, Errc::dimension_error, "forest: row count differs from label count");
    require(x.cols() >= 1, Errc::dimension_error, "forest: feature dimension must be >= 1");
    require(std::any_of(y.begin(), y.end(), [&](auto v) { return v != y[0]; }), Errc::degenerate_labels,
            "forest: training labels contain a single class");
    classes_ = classes;
    trees_.assign(config_.trees, DecisionTree{});
    parallel_for(config_.trees, config_.workers, [&](std::size_t t) {
      Rng rng(mix_seed(config_.seed, t));
      std::vector<std::size_t> sample(x.rows());
      for (auto& s : sample) s = static_cast<std::size_t>(rng.below(x.rows()));
      trees_[t].fit(x, y, classes, sample, rng);
    });
  }

  /// Fraction of trees voting for each class.
  std::vector<double> predict_proba(std::span<const double> row) const {
    std::vector<double> p(classes_, 0.0);
    for (const auto& t : trees_) p[t.predict(row)] += 1.0;
    for (auto& v : p) v /= static_cast<double>(trees_.size());
    return p;
  }

  /// Most-voted class; ties go to the smaller class index.
  std::size_t predict(std::span<const double> row) const {
    const auto p = predict_proba(row);
    return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  }

  std::size_t classes() const noexcept { return classes_; }
  const std::vector<DecisionTree>& trees() const noexcept { return trees_; }

 private:
  ForestConfig config_;
  std::size_t classes_ = 0;
  std::vector<DecisionTree> trees_;
};

}  // namespace ctxsteer
