#include <gtest/gtest.h>

#include "ctxsteer/evaluation.hpp"
#include "ctxsteer/steering.hpp"
#include "ctxsteer/synthetic.hpp"
#include "oracles.hpp"

using namespace ctxsteer;

namespace {

Matrix rows_of(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.begin()->size());
  std::size_t i = 0;
  for (const auto& r : rows) {
    std::size_t j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

Partition scored(std::vector<double> per_cluster, double mean) {
  Partition p;
  p.k = per_cluster.size();
  p.per_cluster_silhouette = std::move(per_cluster);
  p.mean_silhouette = mean;
  return p;
}

struct Fixture {
  std::vector<CorpusObject> corpus;
  DistanceMatrix matrix;
  BehaviorMatrix train;
};

Fixture synthetic_fixture(std::size_t classes, std::size_t docs, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.classes = classes;
  spec.docs_per_class = docs;
  spec.doc_bytes = 600;
  spec.class_weight = 0.6;
  spec.seed = seed;
  Fixture f;
  f.corpus = synthetic_corpus(spec);
  f.matrix = build_distance_matrix(f.corpus, Measure::ncd, Codec::deflate, 4);
  f.train = select_rows(mask_columns(f.matrix, f.matrix.ids), f.matrix.ids);
  return f;
}

}  // namespace

TEST(Norm01, Examples) {
  EXPECT_EQ(norm01(std::vector<double>{2, 4, 6}), (std::vector<double>{0, 0.5, 1}));
  EXPECT_EQ(norm01(std::vector<double>{5, 5, 5}), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(norm01(std::vector<double>{0, 0.3}), (std::vector<double>{0, 0.3}));
}

TEST(Aggregate, AllKinds) {
  const std::vector<double> v = {3, 1, 4, 2};
  EXPECT_EQ(aggregate(v, Aggregate::min), 1.0);
  EXPECT_EQ(aggregate(v, Aggregate::max), 4.0);
  EXPECT_EQ(aggregate(v, Aggregate::mean), 2.5);
  EXPECT_EQ(aggregate(v, Aggregate::median), 2.5);
  EXPECT_DOUBLE_EQ(aggregate(v, Aggregate::l2), std::sqrt(30.0));
}

TEST(SelectClusters, AboveAverageAndTopN) {
  const auto p = scored({0.8, 0.3, -0.1}, 0.33);
  const auto above = select_clusters(p, SelectionPolicy::above_average());
  ASSERT_EQ(above.size(), 1u);
  EXPECT_EQ(above[0].cluster, 0);
  const auto top2 = select_clusters(p, SelectionPolicy::top(2));
  ASSERT_EQ(top2.size(), 2u);
  EXPECT_EQ(top2[0].cluster, 0);
  EXPECT_EQ(top2[1].cluster, 1);
  EXPECT_EQ(select_clusters(p, SelectionPolicy::top(9)).size(), 3u);
}

TEST(SelectClusters, FloorKeepsTheBest) {
  const auto p = scored({0.1, 0.7}, 0.4);
  const auto none = select_clusters(p, SelectionPolicy::top(0));
  ASSERT_EQ(none.size(), 1u);
  EXPECT_EQ(none[0].cluster, 1);
  EXPECT_EQ(none[0].rank, 0u);
}

TEST(SelectReferences, ExhaustionAndSingleton) {
  Rng rng(1);
  const auto sub = oracle::random_distances(5, rng);
  for (auto s : {ReferenceStrategy::centroid_closest, ReferenceStrategy::iterative_farthest}) {
    auto all = select_references(sub, s, 5);
    std::sort(all.begin(), all.end());
    EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
    EXPECT_EQ(select_references(Matrix(1, 1), s, 1), (std::vector<std::size_t>{0}));
    try {
      (void)select_references(sub, s, 6);
      FAIL();
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::invalid_count);
    }
  }
}

TEST(SelectReferences, FarthestMatchesBruteForce) {
  Rng rng(2);
  for (int t = 0; t < 100; ++t) {
    const auto sub = oracle::random_distances(5, rng);
    for (std::size_t r = 1; r <= 5; ++r)
      EXPECT_EQ(select_references(sub, ReferenceStrategy::iterative_farthest, r), oracle::farthest_first(sub, r));
  }
}

TEST(SelectReferences, CentroidSelectionIsAPrefixChain) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    const std::size_t c = 2 + rng.below(8);
    const auto sub = oracle::random_distances(c, rng);
    const auto full = select_references(sub, ReferenceStrategy::centroid_closest, c);
    for (std::size_t r = 1; r <= c; ++r) {
      const auto part = select_references(sub, ReferenceStrategy::centroid_closest, r);
      EXPECT_TRUE(std::equal(part.begin(), part.end(), full.begin()));
    }
  }
}

TEST(SelectReferences, CentroidStartsAtTheMedoid) {
  // Row 1 sits between rows 0 and 2, so it is nearest the row mean.
  const auto sub = rows_of({{0, 1, 2}, {1, 0, 1}, {2, 1, 0}});
  EXPECT_EQ(select_references(sub, ReferenceStrategy::centroid_closest, 1), (std::vector<std::size_t>{1}));
}

TEST(ReferenceWeights, Examples) {
  EXPECT_EQ(reference_weights(Matrix(1, 1), 0), (std::vector<double>{1}));
  const auto three = rows_of({{0, 0, 0}, {2, 0, 0}, {4, 0, 0}});
  EXPECT_EQ(reference_weights(three, 0), (std::vector<double>{1, 0.5, 0}));
  const auto two = rows_of({{0, 0}, {0.4, 0}});
  const auto w = reference_weights(two, 0);
  EXPECT_DOUBLE_EQ(w[0], 1.0);
  EXPECT_DOUBLE_EQ(w[1], 0.6);
}

TEST(ReferenceWeights, RangeAndSelfWeight) {
  Rng rng(4);
  for (int t = 0; t < 100; ++t) {
    const std::size_t c = 1 + rng.below(8);
    const auto sub = oracle::random_distances(c, rng);
    const std::size_t r = rng.below(c);
    const auto w = reference_weights(sub, r);
    EXPECT_EQ(w[r], 1.0);
    for (double x : w) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 1.0);
    }
  }
}

TEST(EmbedFeature, HandComputedRowScale) {
  const auto sub = rows_of({{0, 1, 2}, {1, 0, 3}, {2, 3, 0}});
  const std::vector<double> omega = {1, 0.5, 0}, s = {1, 1, 1};
  // Member rows scaled by omega: (0,1,2), (0.5,0,1.5), (0,0,0).
  const double d1 = std::sqrt(1.0 + 0.0 + 1.0);
  const double d2 = std::sqrt(0.25 + 1.0 + 0.25);
  const double d3 = std::sqrt(3.0);
  EXPECT_NEAR(embed_feature(s, sub, omega, WeightingMode::row_scale, Aggregate::mean), (d1 + d2 + d3) / 3.0, 1e-12);
  EXPECT_NEAR(embed_feature(s, sub, omega, WeightingMode::row_scale, Aggregate::mean), 1.457003080, 1e-9);
}

TEST(EmbedFeature, SampleEqualToReferenceRow) {
  const auto sub = rows_of({{0, 1, 2}, {1, 0, 3}, {2, 3, 0}});
  const std::vector<double> ones = {1, 1, 1};
  const auto s = sub.row(1);
  EXPECT_EQ(embed_feature(s, sub, ones, WeightingMode::row_scale, Aggregate::min), 0.0);
}

TEST(EmbedFeature, SingleMemberModesCoincide) {
  const auto sub = rows_of({{0.0}});
  const std::vector<double> omega = {1}, s = {0.7};
  for (auto how : {Aggregate::min, Aggregate::max, Aggregate::mean, Aggregate::median, Aggregate::l2}) {
    EXPECT_DOUBLE_EQ(embed_feature(s, sub, omega, WeightingMode::row_scale, how), 0.7);
    EXPECT_DOUBLE_EQ(embed_feature(s, sub, omega, WeightingMode::distance_scale, how), 0.7);
  }
}

TEST(EmbedFeature, DimensionChecked) {
  const auto sub = rows_of({{0, 1}, {1, 0}});
  const std::vector<double> omega = {1, 1}, s = {1};
  EXPECT_THROW(embed_feature(s, sub, omega, WeightingMode::row_scale, Aggregate::mean), Error);
}

TEST(EmbedFeature, PermutationInvariant) {
  Rng rng(5);
  for (int t = 0; t < 50; ++t) {
    const std::size_t c = 2 + rng.below(6);
    const auto sub = oracle::random_distances(c, rng);
    std::vector<double> s(c);
    for (auto& x : s) x = rng.uniform();
    const auto omega = reference_weights(sub, 0);
    std::vector<std::size_t> perm(c);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    rng.shuffle(perm);
    const Matrix psub = sub.select(perm, perm);
    std::vector<double> ps(c), pomega(c);
    for (std::size_t i = 0; i < c; ++i) {
      ps[i] = s[perm[i]];
      pomega[i] = omega[perm[i]];
    }
    for (auto mode : {WeightingMode::row_scale, WeightingMode::distance_scale})
      for (auto how : {Aggregate::min, Aggregate::max, Aggregate::mean, Aggregate::median, Aggregate::l2})
        EXPECT_NEAR(embed_feature(s, sub, omega, mode, how), embed_feature(ps, psub, pomega, mode, how), 1e-12);
  }
}

TEST(Model, TopOneWithOneReferenceGivesOneFeaturePerClass) {
  const auto f = synthetic_fixture(2, 8, 3);
  SteeringConfig cfg;
  cfg.policy = SelectionPolicy::top(1);
  cfg.refs = 1;
  const auto model = build_embedding_model(f.train, cfg);
  EXPECT_EQ(model.feature_count(), 2u);
  EXPECT_EQ(model.clusters.size(), 2u);
}

TEST(Model, FeatureCountIsClustersTimesReferences) {
  const auto f = synthetic_fixture(3, 9, 4);
  for (std::size_t refs : {1u, 2u, 3u}) {
    SteeringConfig cfg;
    cfg.refs = refs;
    cfg.policy = SelectionPolicy::top(2);
    const auto model = build_embedding_model(f.train, cfg);
    std::size_t expect = 0;
    for (const auto& c : model.clusters) {
      expect += std::min(refs, c.members.size());
      for (const auto& r : c.references) {
        EXPECT_NE(std::find(c.members.begin(), c.members.end(), r.id), c.members.end());
        EXPECT_EQ(r.omega.size(), c.members.size());
        EXPECT_EQ(*std::max_element(r.omega.begin(), r.omega.end()), 1.0);
      }
    }
    EXPECT_EQ(model.feature_count(), expect);
  }
}

TEST(Model, ClustersAreDisjointAndSingleClass) {
  const auto f = synthetic_fixture(3, 10, 5);
  SteeringConfig cfg;
  cfg.policy = SelectionPolicy::top(5);
  const auto model = build_embedding_model(f.train, cfg);
  std::map<std::string, std::string> label_of;
  for (std::size_t i = 0; i < f.matrix.size(); ++i) label_of[f.matrix.ids[i]] = f.matrix.labels[i];
  std::set<std::string> seen;
  for (const auto& c : model.clusters)
    for (const auto& m : c.members) {
      EXPECT_EQ(label_of.at(m), c.label);
      EXPECT_TRUE(seen.insert(m).second);
    }
}

TEST(Model, SerializationIsDeterministicAndRoundTrips) {
  const auto f = synthetic_fixture(2, 8, 6);
  SteeringConfig cfg;
  cfg.refs = 2;
  const auto a = to_json(build_embedding_model(f.train, cfg)).dump();
  const auto b = to_json(build_embedding_model(f.train, cfg)).dump();
  EXPECT_EQ(a, b);
  const auto back = model_from_json(nlohmann::json::parse(a));
  EXPECT_EQ(to_json(back).dump(), a);
}

TEST(Model, InductivePathMatchesStoredRows) {
  const auto f = synthetic_fixture(2, 8, 7);
  const auto model = build_embedding_model(f.train, SteeringConfig{});
  std::map<std::string, CorpusObject> members;
  for (const auto& o : f.corpus) members.emplace(o.id, o);
  std::vector<std::size_t> rows(f.train.row_ids.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const Matrix stored = embed_rows(model, f.train, rows);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto fresh = embed_object(model, f.corpus[i], members);
    const auto row = stored.row(i);
    EXPECT_TRUE(std::equal(fresh.begin(), fresh.end(), row.begin())) << f.corpus[i].id;
  }
}

TEST(Model, LeaveSelfOutOnlyChangesMembers) {
  const auto f = synthetic_fixture(2, 8, 8);
  const auto model = build_embedding_model(f.train, SteeringConfig{});
  const auto ids = model.member_ids();
  for (std::size_t i = 0; i < f.train.row_ids.size(); ++i) {
    const std::vector<std::size_t> one = {i};
    const Matrix plain = embed_rows(model, f.train, one);
    const Matrix lso = embed_rows(model, f.train, one, true);
    const bool member = std::find(ids.begin(), ids.end(), f.train.row_ids[i]) != ids.end();
    if (!member) {
      EXPECT_EQ(plain.data(), lso.data());
    }
    for (double v : lso.data()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Model, MissingMemberDistance) {
  const auto f = synthetic_fixture(2, 6, 9);
  const auto model = build_embedding_model(f.train, SteeringConfig{});
  try {
    (void)embed(model, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::incomplete_row);
  }
}

TEST(Model, SingleClassDegeneratesGracefully) {
  const auto f = synthetic_fixture(1, 6, 10);
  const auto model = build_embedding_model(f.train, SteeringConfig{});
  ASSERT_GE(model.feature_count(), 1u);
  std::vector<std::size_t> rows(f.train.row_ids.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  for (double v : embed_rows(model, f.train, rows).data()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Model, SmallClassRejected) {
  const auto f = synthetic_fixture(2, 2, 11);
  try {
    (void)build_embedding_model(f.train, SteeringConfig{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::class_too_small);
  }
}

TEST(Config, Parsers) {
  EXPECT_EQ(parse_policy("top:3").n, 3u);
  EXPECT_EQ(parse_policy("above-avg").kind, SelectionPolicyKind::above_tree_average);
  EXPECT_EQ(parse_strategy("farthest"), ReferenceStrategy::iterative_farthest);
  EXPECT_EQ(parse_aggregate("l2"), Aggregate::l2);
  EXPECT_EQ(parse_weighting("distance"), WeightingMode::distance_scale);
  EXPECT_THROW(parse_policy("best"), Error);
}
