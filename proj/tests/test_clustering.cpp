#include <gtest/gtest.h>

#include "ctxsteer/clustering.hpp"
#include "oracles.hpp"

using namespace ctxsteer;

namespace {

Matrix line_distances(const std::vector<double>& x) {
  Matrix m(x.size(), x.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < x.size(); ++j) m(i, j) = std::abs(x[i] - x[j]);
  return m;
}

Dendrogram ward(const Matrix& square) { return linkage(CondensedDistances::from_square(square)); }

std::vector<double> v(std::initializer_list<double> l) { return l; }

}  // namespace

TEST(BehaviorDistance, Examples) {
  EXPECT_EQ(behavior_distance(v({1, 2, 3}), v({1, 2, 3})), 0.0);
  EXPECT_DOUBLE_EQ(behavior_distance(v({0, 0}), v({3, 4})), 5.0);
  EXPECT_THROW(behavior_distance(v({1}), v({1, 2})), Error);
}

TEST(BehaviorDistance, MatchesLoopOracle) {
  Rng rng(1);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> p(10), q(10);
    double ss = 0;
    for (int i = 0; i < 10; ++i) {
      p[i] = rng.uniform() * 4 - 2;
      q[i] = rng.uniform() * 4 - 2;
      ss += (p[i] - q[i]) * (p[i] - q[i]);
    }
    EXPECT_NEAR(behavior_distance(p, q), std::sqrt(ss), 1e-12);
  }
}

TEST(ClassGroupedDistance, Examples) {
  const std::vector<std::string> two = {"a", "a", "b", "b"};
  const auto map = ClassIndexMap::from_labels(two);
  EXPECT_DOUBLE_EQ(class_grouped_distance(v({3, 4, 3, 4}), v({0, 0, 0, 0}), map), 10.0);
  EXPECT_NEAR(behavior_distance(v({3, 4, 3, 4}), v({0, 0, 0, 0})), 7.0710678, 1e-7);
  EXPECT_EQ(class_grouped_distance(v({1, 2, 3, 4}), v({1, 2, 3, 4}), map), 0.0);

  const std::vector<std::string> one = {"a", "a", "a"};
  const auto single = ClassIndexMap::from_labels(one);
  EXPECT_NEAR(class_grouped_distance(v({1, 5, 2}), v({0, 1, 7}), single),
              behavior_distance(v({1, 5, 2}), v({0, 1, 7})), 1e-12);
}

TEST(ClassGroupedDistance, BadMapsRejected) {
  ClassIndexMap dup{{"a", "b"}, {{0, 1}, {1}}};
  ClassIndexMap gap{{"a"}, {{0}}};
  for (const auto& m : {dup, gap}) {
    try {
      (void)class_grouped_distance(v({1, 2}), v({0, 0}), m);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::invalid_partition);
    }
  }
}

TEST(ClassGroupedDistance, MetricProperties) {
  Rng rng(2);
  const std::vector<std::string> labels = {"a", "b", "a", "c", "b", "c"};
  const auto map = ClassIndexMap::from_labels(labels);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> p(6), q(6);
    for (int i = 0; i < 6; ++i) {
      p[i] = rng.uniform();
      q[i] = rng.uniform();
    }
    const double pq = class_grouped_distance(p, q, map);
    EXPECT_EQ(pq, class_grouped_distance(q, p, map));
    EXPECT_GT(pq, 0.0);
    EXPECT_GE(pq, behavior_distance(p, q));
  }
}

TEST(Linkage, ThreePointsOnALine) {
  const auto t = ward(line_distances({0, 1, 10}));
  ASSERT_EQ(t.merges.size(), 2u);
  EXPECT_EQ(t.merges[0].left, 0u);
  EXPECT_EQ(t.merges[0].right, 1u);
  EXPECT_DOUBLE_EQ(t.merges[0].height, 1.0);
  EXPECT_EQ(t.merges[1].left, 2u);
  EXPECT_EQ(t.merges[1].right, 3u);
  EXPECT_EQ(t.merges[1].size, 3u);
}

TEST(Linkage, TwoPoints) {
  const auto t = ward(line_distances({0, 2.5}));
  ASSERT_EQ(t.merges.size(), 1u);
  EXPECT_DOUBLE_EQ(t.merges[0].height, 2.5);
}

TEST(Linkage, RejectsBadDistances) {
  for (double bad : {-1.0, std::nan("")}) {
    CondensedDistances d{3, {1.0, bad, 2.0}};
    try {
      (void)linkage(d);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::invalid_distance);
    }
  }
}

TEST(Linkage, MatchesNaiveWard) {
  Rng rng(42);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(11);
    const auto d = oracle::random_distances(n, rng, t % 4 == 0);
    const auto got = ward(d);
    const auto want = oracle::naive_ward(d);
    ASSERT_EQ(got.merges, want.merges) << "matrix " << t;
  }
}

TEST(Linkage, HeightsNonDecreasing) {
  Rng rng(7);
  for (int t = 0; t < 100; ++t) {
    const auto tree = ward(oracle::random_distances(3 + rng.below(20), rng));
    for (std::size_t i = 1; i < tree.merges.size(); ++i)
      EXPECT_GE(tree.merges[i].height, tree.merges[i - 1].height);
  }
}

TEST(Partitions, Counts) {
  Rng rng(3);
  EXPECT_EQ(enumerate_partitions(ward(oracle::random_distances(3, rng))).size(), 1u);
  const auto six = enumerate_partitions(ward(oracle::random_distances(6, rng)));
  ASSERT_EQ(six.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(six[i].k, i + 2);
  try {
    (void)enumerate_partitions(ward(oracle::random_distances(2, rng)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::too_few_leaves);
  }
}

TEST(Partitions, LabelsMatchTopDownSplitting) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const auto tree = ward(oracle::random_distances(3 + rng.below(13), rng));
    for (const auto& p : enumerate_partitions(tree)) {
      EXPECT_EQ(p.labels, oracle::labels_by_splitting(tree, p.k));
      EXPECT_EQ(static_cast<std::size_t>(*std::max_element(p.labels.begin(), p.labels.end())) + 1, p.k);
    }
  }
}

TEST(Silhouette, TwoTightPairs) {
  const std::vector<int> labels = {0, 0, 1, 1};
  EXPECT_NEAR(silhouette(labels, line_distances({0, 0.1, 10, 10.1})).mean, 0.990, 1e-3);
}

TEST(Silhouette, Singletons) {
  const std::vector<int> labels = {0, 1};
  EXPECT_EQ(silhouette(labels, line_distances({0, 3})).mean, 0.0);
}

TEST(Silhouette, SingleClusterUndefined) {
  const std::vector<int> labels = {0, 0, 0};
  try {
    (void)silhouette(labels, line_distances({0, 1, 2}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::undefined_silhouette);
  }
}

TEST(Silhouette, MatchesDefinitionAndStaysInRange) {
  Rng rng(5);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = 2 + rng.below(12);
    const auto d = oracle::random_distances(n, rng);
    std::vector<int> labels(n);
    for (auto& l : labels) l = static_cast<int>(rng.below(3));
    labels[0] = 0;
    labels[1] = 1;
    const double s = silhouette(labels, d).mean;
    EXPECT_NEAR(s, oracle::silhouette_mean(labels, d), 1e-12);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Silhouette, TrueLabelsBeatRandomRelabelings) {
  Rng rng(6);
  std::vector<double> x;
  std::vector<int> truth;
  for (int i = 0; i < 10; ++i) {
    x.push_back(rng.uniform());
    truth.push_back(0);
    x.push_back(20 + rng.uniform());
    truth.push_back(1);
  }
  const auto d = line_distances(x);
  const double best = silhouette(truth, d).mean;
  for (int t = 0; t < 50; ++t) {
    auto labels = truth;
    rng.shuffle(labels);
    EXPECT_LE(silhouette(labels, d).mean, best);
  }
}

TEST(BestPartition, TwoBlobs) {
  const auto d = line_distances({0, 0.2, 0.5, 0.7, 1.0, 50, 50.3, 50.4, 50.8, 51});
  const auto p = best_partition(ward(d), d);
  EXPECT_EQ(p.k, 2u);
  EXPECT_EQ(p.labels, (std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}));
}

TEST(BestPartition, EquidistantPointsPickSmallestK) {
  Matrix d(3, 3);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) d(i, j) = i == j ? 0.0 : 1.0;
  const auto p = best_partition(ward(d), d);
  EXPECT_EQ(p.k, 2u);
}

TEST(BestPartition, EqualsExhaustiveMaximum) {
  Rng rng(8);
  for (int t = 0; t < 100; ++t) {
    const auto d = oracle::random_distances(3 + rng.below(13), rng);
    const auto tree = ward(d);
    double best = -2;
    for (std::size_t k = 2; k < d.rows(); ++k)
      best = std::max(best, oracle::silhouette_mean(oracle::labels_by_splitting(tree, k), d));
    EXPECT_NEAR(best_partition(tree, d).mean_silhouette, best, 1e-12);
  }
}

TEST(BestPartition, ScaleInvariant) {
  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    auto d = oracle::random_distances(4 + rng.below(10), rng);
    const auto a = best_partition(ward(d), d);
    for (std::size_t i = 0; i < d.rows(); ++i)
      for (std::size_t j = 0; j < d.cols(); ++j) d(i, j) *= 7.5;
    const auto b = best_partition(ward(d), d);
    EXPECT_EQ(a.labels, b.labels);
  }
}

TEST(Export, NewickAndJson) {
  Dendrogram t = ward(line_distances({0, 1, 10}));
  t.leaves = {"a", "b", "c"};
  auto fmt = [](double x) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
  };
  const double h = t.merges[1].height;
  EXPECT_EQ(to_newick(t), "(c:" + fmt(h) + ",(a:1,b:1):" + fmt(h - 1.0) + ");");
  const auto back = dendrogram_from_json(to_json(t));
  EXPECT_EQ(back.leaves, t.leaves);
  EXPECT_EQ(back.merges, t.merges);
}

TEST(Cophenetic, LowestCommonAncestorHeight) {
  const auto t = ward(line_distances({0, 1, 10}));
  const auto c = cophenetic_matrix(t);
  EXPECT_DOUBLE_EQ(c(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(c(0, 2), t.merges[1].height);
  EXPECT_EQ(c(2, 2), 0.0);
}
