#pragma once

// Context steering: per-class trees over behavior distances, silhouette-driven
// cluster selection, in-cluster references with weight vectors, and the
// inductive embedding that turns a sample's distances to the selected cluster
// members into one feature per reference.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "ctxsteer/clustering.hpp"
#include "ctxsteer/distances.hpp"
#include "ctxsteer/error.hpp"
#include "ctxsteer/matrix.hpp"
#include "ctxsteer/matrix_io.hpp"

namespace ctxsteer {

enum class SelectionPolicyKind { top_n, above_tree_average };

struct SelectionPolicy {
  SelectionPolicyKind kind = SelectionPolicyKind::above_tree_average;
  std::size_t n = 1;

  static SelectionPolicy top(std::size_t n) { return {SelectionPolicyKind::top_n, n}; }
  static SelectionPolicy above_average() { return {SelectionPolicyKind::above_tree_average, 0}; }

  friend bool operator==(const SelectionPolicy&, const SelectionPolicy&) = default;
};

enum class ReferenceStrategy { centroid_closest, iterative_farthest };
enum class Aggregate { min, max, mean, median, l2 };
enum class WeightingMode { row_scale, distance_scale };
enum class SilhouetteSpace { feature, cophenetic };

inline std::string to_string(const SelectionPolicy& p) {
  return p.kind == SelectionPolicyKind::top_n ? "top:" + std::to_string(p.n) : "above-avg";
}
constexpr std::string_view to_string(ReferenceStrategy s) noexcept {
  return s == ReferenceStrategy::centroid_closest ? "centroid" : "farthest";
}
constexpr std::string_view to_string(Aggregate a) noexcept {
  switch (a) {
    case Aggregate::min: return "min";
    case Aggregate::max: return "max";
    case Aggregate::mean: return "mean";
    case Aggregate::median: return "median";
    case Aggregate::l2: return "l2";
  }
  return "?";
}
constexpr std::string_view to_string(WeightingMode w) noexcept {
  return w == WeightingMode::row_scale ? "row" : "distance";
}

inline SelectionPolicy parse_policy(std::string_view s) {
  if (s == "above-avg" || s == "above_tree_average") return SelectionPolicy::above_average();
  if (s.starts_with("top:")) {
    const std::string digits(s.substr(4));
    require(!digits.empty() && digits.find_first_not_of("0123456789") == std::string::npos, Errc::invalid_input,
            "bad policy '" + std::string(s) + "'");
    return SelectionPolicy::top(std::stoul(digits));
  }
  fail(Errc::invalid_input, "unknown policy '" + std::string(s) + "'");
}
inline ReferenceStrategy parse_strategy(std::string_view s) {
  if (s == "centroid" || s == "centroid_closest") return ReferenceStrategy::centroid_closest;
  if (s == "farthest" || s == "iterative_farthest") return ReferenceStrategy::iterative_farthest;
  fail(Errc::invalid_input, "unknown reference strategy '" + std::string(s) + "'");
}
inline Aggregate parse_aggregate(std::string_view s) {
  if (s == "min") return Aggregate::min;
  if (s == "max") return Aggregate::max;
  if (s == "mean") return Aggregate::mean;
  if (s == "median") return Aggregate::median;
  if (s == "l2" || s == "euclidean_norm") return Aggregate::l2;
  fail(Errc::invalid_input, "unknown aggregate '" + std::string(s) + "'");
}
inline WeightingMode parse_weighting(std::string_view s) {
  if (s == "row" || s == "row_scale") return WeightingMode::row_scale;
  if (s == "distance" || s == "distance_scale") return WeightingMode::distance_scale;
  fail(Errc::invalid_input, "unknown weighting mode '" + std::string(s) + "'");
}

struct SteeringConfig {
  SelectionPolicy policy = SelectionPolicy::above_average();
  std::size_t refs = 1;
  ReferenceStrategy strategy = ReferenceStrategy::centroid_closest;
  Aggregate aggregate = Aggregate::mean;
  WeightingMode weighting = WeightingMode::row_scale;
  SilhouetteSpace silhouette_space = SilhouetteSpace::feature;
};

// --- primitives -------------------------------------------------------------

/// (v - min) / max(max - min, 1)
inline std::vector<double> norm01(std::span<const double> v) {
  require(!v.empty(), Errc::invalid_input, "norm01 of an empty vector");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double min = *lo;
  const double denom = std::max(*hi - *lo, 1.0);
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = (v[i] - min) / denom;
  return out;
}

inline double aggregate(std::vector<double> values, Aggregate how) {
  require(!values.empty(), Errc::invalid_input, "aggregate of an empty set");
  switch (how) {
    case Aggregate::min: return *std::min_element(values.begin(), values.end());
    case Aggregate::max: return *std::max_element(values.begin(), values.end());
    case Aggregate::mean: {
      double s = 0.0;
      for (double v : values) s += v;
      return s / static_cast<double>(values.size());
    }
    case Aggregate::median: {
      std::sort(values.begin(), values.end());
      const std::size_t m = values.size() / 2;
      return values.size() % 2 ? values[m] : (values[m - 1] + values[m]) / 2.0;
    }
    case Aggregate::l2: {
      double ss = 0.0;
      for (double v : values) ss += v * v;
      return std::sqrt(ss);
    }
  }
  return 0.0;
}

struct RankedCluster {
  int cluster = 0;
  double silhouette = 0.0;
  std::size_t rank = 0;  // 0 = best
};

/// Clusters of one class's partition ranked by per-cluster silhouette
/// (descending, ties by cluster id), filtered by the policy. The best-ranked
/// cluster is always kept.
inline std::vector<RankedCluster> select_clusters(const Partition& partition, const SelectionPolicy& policy) {
  require(partition.per_cluster_silhouette.size() == partition.k && partition.k > 0, Errc::invalid_input,
          "partition carries no per-cluster silhouettes");
  std::vector<RankedCluster> ranked;
  for (std::size_t c = 0; c < partition.k; ++c)
    ranked.push_back({static_cast<int>(c), partition.per_cluster_silhouette[c], 0});
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedCluster& a, const RankedCluster& b) { return a.silhouette > b.silhouette; });
  for (std::size_t i = 0; i < ranked.size(); ++i) ranked[i].rank = i;

  std::vector<RankedCluster> kept;
  for (const auto& rc : ranked) {
    const bool keep = policy.kind == SelectionPolicyKind::top_n ? rc.rank < policy.n
                                                                : rc.silhouette > partition.mean_silhouette;
    if (keep) kept.push_back(rc);
  }
  if (kept.empty()) kept.push_back(ranked.front());
  return kept;
}

/// Ordered local indices of the references inside a cluster, whose rows are
/// the rows of the cluster submatrix.
inline std::vector<std::size_t> select_references(const Matrix& submatrix, ReferenceStrategy strategy, std::size_t r) {
  const std::size_t c = submatrix.rows();
  require(submatrix.cols() == c && c >= 1, Errc::dimension_error, "cluster submatrix must be square and non-empty");
  require(r >= 1 && r <= c, Errc::invalid_count,
          "cannot pick " + std::to_string(r) + " references from a cluster of " + std::to_string(c));
  const Matrix rowdist = pairwise_distances(submatrix);
  std::vector<std::size_t> out;

  if (strategy == ReferenceStrategy::centroid_closest) {
    std::vector<double> centroid(c, 0.0);
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t j = 0; j < c; ++j) centroid[j] += submatrix(i, j) / static_cast<double>(c);
    std::size_t medoid = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < c; ++i) {
      const double d = behavior_distance(submatrix.row(i), centroid);
      if (d < best) {
        best = d;
        medoid = i;
      }
    }
    std::vector<std::size_t> order(c);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (a == medoid || b == medoid) return a == medoid && b != medoid;
      return rowdist(medoid, a) < rowdist(medoid, b);
    });
    out.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(r));
    return out;
  }

  std::size_t first = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < c; ++i) {
    double sum = 0.0;
    for (std::size_t j = 0; j < c; ++j) sum += rowdist(i, j);
    if (sum > best) {
      best = sum;
      first = i;
    }
  }
  out.push_back(first);
  std::vector<double> min_to_selected(c);
  for (std::size_t i = 0; i < c; ++i) min_to_selected[i] = rowdist(first, i);
  std::vector<char> chosen(c, 0);
  chosen[first] = 1;
  while (out.size() < r) {
    std::size_t pick = c;
    for (std::size_t i = 0; i < c; ++i)
      if (!chosen[i] && (pick == c || min_to_selected[i] > min_to_selected[pick])) pick = i;
    out.push_back(pick);
    chosen[pick] = 1;
    for (std::size_t i = 0; i < c; ++i) min_to_selected[i] = std::min(min_to_selected[i], rowdist(pick, i));
  }
  return out;
}

/// omega = 1 - norm01(d), with d the Euclidean distances from the reference
/// row to every member row of the submatrix.
inline std::vector<double> reference_weights(const Matrix& submatrix, std::span<const double> reference_row) {
  std::vector<double> d(submatrix.rows());
  for (std::size_t m = 0; m < submatrix.rows(); ++m) d[m] = behavior_distance(reference_row, submatrix.row(m));
  std::vector<double> w = norm01(d);
  for (auto& x : w) x = 1.0 - x;
  return w;
}

inline std::vector<double> reference_weights(const Matrix& submatrix, std::size_t ref_index) {
  require(ref_index < submatrix.rows(), Errc::invalid_input, "reference is not a cluster member");
  return reference_weights(submatrix, submatrix.row(ref_index));
}

/// One feature value: aggregate over members m of the distance between the
/// sample's member distances `s` and member m's row, weighted by omega_m
/// either on the row (row_scale) or on the resulting distance
/// (distance_scale). Member `skip` (if < c) is left out of the aggregate.
inline double embed_feature(std::span<const double> s, const Matrix& submatrix, std::span<const double> omega,
                            WeightingMode mode, Aggregate how, std::size_t skip = static_cast<std::size_t>(-1)) {
  const std::size_t c = submatrix.rows();
  require(s.size() == c && omega.size() == c, Errc::dimension_error, "sample row does not match cluster size");
  std::vector<double> d;
  d.reserve(c);
  for (std::size_t m = 0; m < c; ++m) {
    if (m == skip) continue;
    const auto row = submatrix.row(m);
    double ss = 0.0;
    if (mode == WeightingMode::row_scale) {
      for (std::size_t b = 0; b < c; ++b) ss += (s[b] - omega[m] * row[b]) * (s[b] - omega[m] * row[b]);
      d.push_back(std::sqrt(ss));
    } else {
      for (std::size_t b = 0; b < c; ++b) ss += (s[b] - row[b]) * (s[b] - row[b]);
      d.push_back(omega[m] * std::sqrt(ss));
    }
  }
  return aggregate(std::move(d), how);
}

// --- model ------------------------------------------------------------------

struct ModelReference {
  std::string id;
  std::vector<double> omega;
};

struct ModelCluster {
  std::string label;                 // class the cluster was drawn from
  std::vector<std::string> members;  // column objects, submatrix order
  Matrix submatrix;                  // symmetrized compression distances among members
  std::vector<ModelReference> references;
  double silhouette = 0.0;
  std::size_t rank = 0;
};

struct EmbeddingModel {
  Measure measure = Measure::ncd;
  Codec codec = Codec::deflate;
  WeightingMode weighting = WeightingMode::row_scale;
  Aggregate aggregate = Aggregate::mean;
  std::optional<RowStats> row_stats;
  std::vector<ModelCluster> clusters;

  std::size_t feature_count() const {
    std::size_t n = 0;
    for (const auto& c : clusters) n += c.references.size();
    return n;
  }

  /// Every member id the model needs a distance to, without duplicates.
  std::vector<std::string> member_ids() const {
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (const auto& c : clusters)
      for (const auto& m : c.members)
        if (seen.insert(m).second) out.push_back(m);
    return out;
  }
};

inline nlohmann::json to_json(const EmbeddingModel& model) {
  nlohmann::json clusters = nlohmann::json::array();
  for (const auto& c : model.clusters) {
    nlohmann::json sub = nlohmann::json::array();
    for (std::size_t i = 0; i < c.submatrix.rows(); ++i) {
      const auto row = c.submatrix.row(i);
      sub.push_back(std::vector<double>(row.begin(), row.end()));
    }
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& r : c.references) refs.push_back({{"id", r.id}, {"omega", r.omega}});
    clusters.push_back({{"class", c.label},
                        {"members", c.members},
                        {"submatrix", sub},
                        {"references", refs},
                        {"silhouette", c.silhouette},
                        {"rank", c.rank}});
  }
  nlohmann::json j = {{"measure", std::string(to_string(model.measure))},
                      {"codec", std::string(to_string(model.codec))},
                      {"weighting_mode", std::string(to_string(model.weighting))},
                      {"f_aggregate", std::string(to_string(model.aggregate))},
                      {"clusters", clusters}};
  if (model.row_stats) j["row_stats"] = row_stats_to_json(*model.row_stats);
  return j;
}

inline EmbeddingModel model_from_json(const nlohmann::json& j) {
  EmbeddingModel m;
  m.measure = parse_measure(j.at("measure").get<std::string>());
  m.codec = parse_codec(j.at("codec").get<std::string>());
  m.weighting = parse_weighting(j.at("weighting_mode").get<std::string>());
  m.aggregate = parse_aggregate(j.at("f_aggregate").get<std::string>());
  if (j.contains("row_stats")) m.row_stats = row_stats_from_json(j.at("row_stats"));
  for (const auto& jc : j.at("clusters")) {
    ModelCluster c;
    c.label = jc.at("class").get<std::string>();
    c.members = jc.at("members").get<std::vector<std::string>>();
    const auto rows = jc.at("submatrix").get<std::vector<std::vector<double>>>();
    c.submatrix = Matrix(rows.size(), rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      require(rows[i].size() == rows.size(), Errc::invalid_input, "model submatrix is not square");
      for (std::size_t k = 0; k < rows.size(); ++k) c.submatrix(i, k) = rows[i][k];
    }
    for (const auto& jr : jc.at("references"))
      c.references.push_back({jr.at("id").get<std::string>(), jr.at("omega").get<std::vector<double>>()});
    c.silhouette = jc.value("silhouette", 0.0);
    c.rank = jc.value("rank", std::size_t{0});
    require(c.members.size() == c.submatrix.rows(), Errc::invalid_input, "model member count mismatch");
    m.clusters.push_back(std::move(c));
  }
  return m;
}

// --- embedding --------------------------------------------------------------

/// Feature vector from a lookup of the sample's distance to each member id.
/// Features are ordered cluster by cluster, reference by reference.
/// `exclude` names a sample that is itself a member (a training row): its
/// self-distance is replaced by its mean distance to the other members and
/// its own row is left out of the aggregate, so training rows look like
/// unseen samples rather than standing out through a near-zero entry.
template <class Lookup>
std::vector<double> embed_lookup(const EmbeddingModel& model, Lookup&& distance_to, std::string_view exclude = {}) {
  std::vector<double> features;
  features.reserve(model.feature_count());
  std::vector<double> s;
  for (const auto& c : model.clusters) {
    const std::size_t size = c.members.size();
    std::size_t skip = size;
    if (!exclude.empty() && size > 1)
      skip = static_cast<std::size_t>(std::find(c.members.begin(), c.members.end(), exclude) - c.members.begin());
    s.assign(size, 0.0);
    double others = 0.0;
    for (std::size_t m = 0; m < size; ++m) {
      if (m == skip) continue;
      const std::optional<double> v = distance_to(c.members[m]);
      require(v.has_value(), Errc::incomplete_row, "no distance to cluster member '" + c.members[m] + "'");
      s[m] = *v;
      others += *v;
    }
    if (skip < size) s[skip] = others / static_cast<double>(size - 1);
    for (const auto& r : c.references)
      features.push_back(embed_feature(s, c.submatrix, r.omega, model.weighting, model.aggregate, skip));
  }
  return features;
}

inline std::vector<double> embed(const EmbeddingModel& model, const std::map<std::string, double>& distances) {
  return embed_lookup(model, [&](const std::string& id) -> std::optional<double> {
    auto it = distances.find(id);
    return it == distances.end() ? std::nullopt : std::optional<double>(it->second);
  });
}

/// Embeds the given rows of a behavior matrix (member ids must be columns).
/// With `leave_self_out`, each row is embedded as if it were not a cluster
/// member.
inline Matrix embed_rows(const EmbeddingModel& model, const BehaviorMatrix& bm, std::span<const std::size_t> rows,
                         bool leave_self_out = false) {
  std::map<std::string, std::size_t> col;
  for (std::size_t j = 0; j < bm.col_ids.size(); ++j) col.emplace(bm.col_ids[j], j);
  Matrix out(rows.size(), model.feature_count());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto row = bm.values.row(rows[i]);
    const auto f = embed_lookup(model, [&](const std::string& id) -> std::optional<double> {
      auto it = col.find(id);
      return it == col.end() ? std::nullopt : std::optional<double>(row[it->second]);
    }, leave_self_out ? std::string_view(bm.row_ids[rows[i]]) : std::string_view{});
    std::copy(f.begin(), f.end(), out.row(i).begin());
  }
  return out;
}

/// Inductive path for an object outside the matrix: computes its distances
/// to the cluster members with the model's measure and codec, standardizes
/// them when the model was built on standardized NRC, then embeds.
inline std::vector<double> embed_object(const EmbeddingModel& model, const CorpusObject& sample,
                                        const std::map<std::string, CorpusObject>& members,
                                        const std::optional<RowStat>& sample_stats = std::nullopt) {
  std::map<std::string, double> distances;
  std::vector<std::string> ids = model.member_ids();
  std::vector<double> raw;
  for (const auto& id : ids) {
    auto it = members.find(id);
    require(it != members.end(), Errc::incomplete_row, "member object '" + id + "' not supplied");
    raw.push_back(model.measure == Measure::ncd ? ncd(sample, it->second, model.codec) : nrc(sample, it->second));
  }
  if (model.measure == Measure::nrc_standardized) {
    std::optional<RowStat> st = sample_stats;
    if (!st && model.row_stats) {
      auto it = model.row_stats->rows.find(sample.id);
      if (it != model.row_stats->rows.end()) st = it->second;
    }
    require(st.has_value(), Errc::missing_stats, "no row statistics for '" + sample.id + "'");
    raw = standardize_values(raw, *st);
  }
  for (std::size_t i = 0; i < ids.size(); ++i) distances[ids[i]] = raw[i];
  return embed(model, distances);
}

// --- model construction -----------------------------------------------------

/// Per-class step-1 output: tree over the class's samples and the distances
/// it was built from.
struct ClassTree {
  std::string label;
  std::vector<std::string> ids;
  Matrix distances;  // symmetrized class-grouped behavior distances (E_k)
  Dendrogram tree;
};

inline std::vector<std::string> sorted_labels(std::span<const std::string> labels) {
  std::set<std::string> s(labels.begin(), labels.end());
  return {s.begin(), s.end()};
}

/// Step 1: class-grouped behavior distances over all training rows, then one
/// Ward tree per class on its own block.
inline std::vector<ClassTree> build_class_trees(const BehaviorMatrix& train) {
  require(train.values.rows() == train.row_ids.size() && train.values.cols() == train.col_ids.size(),
          Errc::dimension_error, "behavior matrix shape does not match its ids");
  const Matrix e = pairwise_distances(train.values, &train.class_index_map);
  std::vector<ClassTree> out;
  for (const auto& label : sorted_labels(train.row_labels)) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < train.row_labels.size(); ++i)
      if (train.row_labels[i] == label) idx.push_back(i);
    require(idx.size() >= 3, Errc::class_too_small,
            "class '" + label + "' has " + std::to_string(idx.size()) + " training samples (need >= 3)");
    ClassTree ct;
    ct.label = label;
    for (std::size_t i : idx) ct.ids.push_back(train.row_ids[i]);
    ct.distances = e.select(idx, idx).symmetrized();
    ct.tree = linkage(CondensedDistances::from_square(ct.distances), LinkageCriterion::ward, ct.ids);
    out.push_back(std::move(ct));
  }
  return out;
}

/// A cluster handed to model assembly: members and the reference objects
/// whose weight vectors define its features.
struct ClusterSpec {
  std::string label;
  std::vector<std::string> members;
  std::vector<std::string> references;
  double silhouette = 0.0;
  std::size_t rank = 0;
};

/// Step 3 for arbitrary clusters: stores each cluster's symmetrized
/// compression-distance submatrix and one weight vector per reference. A
/// reference outside its cluster (baselines) is described by its symmetrized
/// distances to the members.
inline EmbeddingModel assemble_model(const BehaviorMatrix& train, const std::vector<ClusterSpec>& specs,
                                     const SteeringConfig& config, Measure measure, Codec codec,
                                     std::optional<RowStats> row_stats = std::nullopt) {
  EmbeddingModel model;
  model.measure = measure;
  model.codec = codec;
  model.weighting = config.weighting;
  model.aggregate = config.aggregate;
  model.row_stats = std::move(row_stats);
  auto sym = [&](const std::string& a, const std::string& b) {
    return (train.values(train.row_index(a), train.col_index(b)) + train.values(train.row_index(b), train.col_index(a))) /
           2.0;
  };
  for (const auto& spec : specs) {
    require(!spec.members.empty(), Errc::invalid_input, "cluster without members");
    ModelCluster c;
    c.label = spec.label;
    c.members = spec.members;
    c.silhouette = spec.silhouette;
    c.rank = spec.rank;
    const std::size_t size = spec.members.size();
    c.submatrix = Matrix(size, size);
    for (std::size_t a = 0; a < size; ++a)
      for (std::size_t b = 0; b < size; ++b) c.submatrix(a, b) = sym(spec.members[a], spec.members[b]);
    for (const auto& ref : spec.references) {
      auto it = std::find(spec.members.begin(), spec.members.end(), ref);
      std::vector<double> omega;
      if (it != spec.members.end()) {
        omega = reference_weights(c.submatrix, static_cast<std::size_t>(it - spec.members.begin()));
      } else {
        std::vector<double> row(size);
        for (std::size_t b = 0; b < size; ++b) row[b] = sym(ref, spec.members[b]);
        omega = reference_weights(c.submatrix, row);
      }
      c.references.push_back({ref, std::move(omega)});
    }
    model.clusters.push_back(std::move(c));
  }
  return model;
}

/// Steps 1-3 on a training behavior matrix whose rows are the training
/// samples and whose columns are the (same) training objects. A cluster
/// smaller than `refs` contributes all of its members as references.
inline EmbeddingModel build_embedding_model(const BehaviorMatrix& train, const SteeringConfig& config,
                                            Measure measure = Measure::ncd, Codec codec = Codec::deflate,
                                            std::optional<RowStats> row_stats = std::nullopt) {
  require(config.refs >= 1, Errc::invalid_count, "at least one reference per cluster is required");
  std::vector<ClusterSpec> specs;
  for (const auto& ct : build_class_trees(train)) {
    const Matrix scoring = config.silhouette_space == SilhouetteSpace::cophenetic ? cophenetic_matrix(ct.tree)
                                                                                 : ct.distances;
    const Partition best = best_partition(ct.tree, scoring);
    for (const auto& rc : select_clusters(best, config.policy)) {
      ClusterSpec spec;
      spec.label = ct.label;
      spec.silhouette = rc.silhouette;
      spec.rank = rc.rank;
      for (std::size_t i = 0; i < best.labels.size(); ++i)
        if (best.labels[i] == rc.cluster) spec.members.push_back(ct.ids[i]);
      Matrix sub(spec.members.size(), spec.members.size());
      for (std::size_t a = 0; a < spec.members.size(); ++a)
        for (std::size_t b = 0; b < spec.members.size(); ++b)
          sub(a, b) = (train.values(train.row_index(spec.members[a]), train.col_index(spec.members[b])) +
                       train.values(train.row_index(spec.members[b]), train.col_index(spec.members[a]))) /
                      2.0;
      const std::size_t r = std::min(config.refs, spec.members.size());
      for (std::size_t local : select_references(sub, config.strategy, r)) spec.references.push_back(spec.members[local]);
      specs.push_back(std::move(spec));
    }
  }
  return assemble_model(train, specs, config, measure, codec, std::move(row_stats));
}

}  // namespace ctxsteer
