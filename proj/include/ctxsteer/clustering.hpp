#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxsteer/error.hpp"
#include "ctxsteer/matrix.hpp"

namespace ctxsteer {

// --- behavior space ---------------------------------------------------------

/// Partition of feature (column) indices by the class of the reference object
/// behind each column.
struct ClassIndexMap {
  std::vector<std::string> labels;               // sorted class labels
  std::vector<std::vector<std::size_t>> indices;  // column indices per label

  static ClassIndexMap from_labels(std::span<const std::string> column_labels) {
    std::map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < column_labels.size(); ++i) groups[column_labels[i]].push_back(i);
    ClassIndexMap out;
    for (auto& [label, idx] : groups) {
      out.labels.push_back(label);
      out.indices.push_back(std::move(idx));
    }
    return out;
  }

  /// Throws InvalidPartition unless every index in [0, n) appears exactly once.
  void validate(std::size_t n) const {
    std::vector<char> seen(n, 0);
    for (const auto& block : indices)
      for (std::size_t i : block) {
        require(i < n, Errc::invalid_partition, "class index " + std::to_string(i) + " out of range");
        require(!seen[i], Errc::invalid_partition, "class index " + std::to_string(i) + " appears twice");
        seen[i] = 1;
      }
    for (std::size_t i = 0; i < n; ++i)
      require(seen[i], Errc::invalid_partition, "class index " + std::to_string(i) + " not covered");
  }
};

/// Rows are samples, columns are reference objects (a subset of the training
/// objects once test columns are masked).
struct BehaviorMatrix {
  std::vector<std::string> row_ids;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_ids;
  std::vector<std::string> col_labels;
  Matrix values;
  ClassIndexMap class_index_map;

  std::size_t row_index(const std::string& id) const {
    auto it = std::find(row_ids.begin(), row_ids.end(), id);
    require(it != row_ids.end(), Errc::invalid_input, "unknown row id '" + id + "'");
    return static_cast<std::size_t>(it - row_ids.begin());
  }
  std::size_t col_index(const std::string& id) const {
    auto it = std::find(col_ids.begin(), col_ids.end(), id);
    require(it != col_ids.end(), Errc::invalid_input, "unknown column id '" + id + "'");
    return static_cast<std::size_t>(it - col_ids.begin());
  }
};

/// Euclidean distance between two behavior profiles.
inline double behavior_distance(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size() && !p.empty(), Errc::dimension_error,
          "behavior rows differ in length (" + std::to_string(p.size()) + " vs " + std::to_string(q.size()) + ")");
  double ss = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) ss += (p[i] - q[i]) * (p[i] - q[i]);
  return std::sqrt(ss);
}

namespace detail {
inline double grouped_distance_unchecked(std::span<const double> p, std::span<const double> q,
                                         const ClassIndexMap& map) {
  double total = 0.0;
  for (const auto& block : map.indices) {
    double ss = 0.0;
    for (std::size_t x : block) ss += (p[x] - q[x]) * (p[x] - q[x]);
    total += std::sqrt(ss);
  }
  return total;
}
}  // namespace detail

/// Sum over classes of the Euclidean norm of the per-class difference block.
inline double class_grouped_distance(std::span<const double> p, std::span<const double> q,
                                     const ClassIndexMap& map) {
  require(p.size() == q.size(), Errc::dimension_error, "behavior rows differ in length");
  map.validate(p.size());
  return detail::grouped_distance_unchecked(p, q, map);
}

/// All-pairs distances between the given rows, class-grouped when `map` is
/// non-null, plain Euclidean otherwise.
inline Matrix pairwise_distances(const Matrix& rows, const ClassIndexMap* map = nullptr) {
  if (map) map->validate(rows.cols());
  const std::size_t n = rows.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = map ? detail::grouped_distance_unchecked(rows.row(i), rows.row(j), *map)
                           : behavior_distance(rows.row(i), rows.row(j));
      out(i, j) = out(j, i) = d;
    }
  return out;
}

// --- condensed distances and linkage ---------------------------------------

/// Upper triangle of a symmetric n x n distance matrix, row by row.
struct CondensedDistances {
  std::size_t n = 0;
  std::vector<double> d;

  double operator()(std::size_t i, std::size_t j) const {
    if (i > j) std::swap(i, j);
    return d[n * i - i * (i + 1) / 2 + (j - i - 1)];
  }

  /// Averages (a_ij + a_ji) / 2 when the input is not symmetric.
  static CondensedDistances from_square(const Matrix& a) {
    require(a.rows() == a.cols(), Errc::dimension_error, "distance matrix must be square");
    CondensedDistances out;
    out.n = a.rows();
    out.d.reserve(out.n * (out.n - 1) / 2);
    for (std::size_t i = 0; i < out.n; ++i)
      for (std::size_t j = i + 1; j < out.n; ++j) out.d.push_back((a(i, j) + a(j, i)) / 2.0);
    return out;
  }

  Matrix to_square() const {
    Matrix out(n, n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) out(i, j) = out(j, i) = (*this)(i, j);
    return out;
  }
};

enum class LinkageCriterion { ward, single, complete, average };

struct Merge {
  std::size_t left = 0;   // older node id (leaves are 0..n-1, merge k creates n+k)
  std::size_t right = 0;  // younger node id
  double height = 0.0;
  std::size_t size = 0;
  friend bool operator==(const Merge&, const Merge&) = default;
};

struct Dendrogram {
  std::vector<std::string> leaves;
  std::vector<Merge> merges;

  std::size_t leaf_count() const noexcept { return leaves.size(); }
};

/// Lance-Williams update for Ward linkage on (non-squared) distances:
/// d(s+t, v)^2 = ((nv+ns) d(s,v)^2 + (nv+nt) d(t,v)^2 - nv d(s,t)^2) / (ns+nt+nv)
inline double ward_update(double d_sv, double d_tv, double d_st, double ns, double nt, double nv) {
  const double num = (nv + ns) * d_sv * d_sv + (nv + nt) * d_tv * d_tv - nv * d_st * d_st;
  return std::sqrt(std::max(0.0, num / (ns + nt + nv)));
}

/// Agglomerative clustering on precomputed distances (Ward only). Each step
/// merges the closest pair; ties go to the smallest (older id, younger id).
/// Nearest-neighbour lists keep the typical cost near O(n^2).
inline Dendrogram linkage(const CondensedDistances& dist, LinkageCriterion criterion = LinkageCriterion::ward,
                          std::vector<std::string> leaves = {}) {
  require(criterion == LinkageCriterion::ward, Errc::invalid_input, "only Ward linkage is implemented");
  const std::size_t n = dist.n;
  require(n >= 2, Errc::invalid_input, "linkage needs at least 2 observations");
  require(dist.d.size() == n * (n - 1) / 2, Errc::dimension_error, "condensed distance vector has wrong length");
  for (double v : dist.d)
    require(std::isfinite(v) && v >= 0.0, Errc::invalid_distance, "distances must be finite and non-negative");
  if (leaves.empty())
    for (std::size_t i = 0; i < n; ++i) leaves.push_back(std::to_string(i));
  require(leaves.size() == n, Errc::dimension_error, "leaf name count differs from matrix size");

  constexpr double inf = std::numeric_limits<double>::infinity();
  constexpr std::size_t none = std::numeric_limits<std::size_t>::max();
  Matrix d = dist.to_square();
  std::vector<std::size_t> id(n), size(n, 1), nn(n, none);
  std::vector<double> nn_dist(n, inf);
  std::vector<char> active(n, 1);
  std::iota(id.begin(), id.end(), std::size_t{0});

  // nn[a]: closest active slot whose cluster id is younger than a's.
  auto refresh = [&](std::size_t a) {
    nn[a] = none;
    nn_dist[a] = inf;
    for (std::size_t b = 0; b < n; ++b) {
      if (!active[b] || id[b] <= id[a]) continue;
      if (d(a, b) < nn_dist[a] || (nn[a] != none && d(a, b) == nn_dist[a] && id[b] < id[nn[a]])) {
        nn[a] = b;
        nn_dist[a] = d(a, b);
      }
    }
  };
  for (std::size_t a = 0; a < n; ++a) refresh(a);

  Dendrogram tree;
  tree.leaves = std::move(leaves);
  tree.merges.reserve(n - 1);
  for (std::size_t step = 0; step + 1 < n; ++step) {
    std::size_t s = none;
    for (std::size_t a = 0; a < n; ++a) {
      if (!active[a] || nn[a] == none) continue;
      if (s == none || nn_dist[a] < nn_dist[s] || (nn_dist[a] == nn_dist[s] && id[a] < id[s])) s = a;
    }
    const std::size_t t = nn[s];
    const double h = d(s, t);
    const auto ns = static_cast<double>(size[s]), nt = static_cast<double>(size[t]);
    tree.merges.push_back({id[s], id[t], h, size[s] + size[t]});

    for (std::size_t v = 0; v < n; ++v) {
      if (!active[v] || v == s || v == t) continue;
      d(s, v) = d(v, s) = ward_update(d(s, v), d(t, v), h, ns, nt, static_cast<double>(size[v]));
    }
    active[t] = 0;
    size[s] += size[t];
    id[s] = n + step;

    nn[s] = none;  // youngest cluster: nothing younger to pair with
    nn_dist[s] = inf;
    for (std::size_t v = 0; v < n; ++v) {
      if (!active[v] || v == s) continue;
      if (nn[v] == s || nn[v] == t) {
        refresh(v);
      } else if (d(v, s) < nn_dist[v]) {
        nn[v] = s;
        nn_dist[v] = d(v, s);
      }
    }
  }
  return tree;
}

// --- partitions and silhouette ---------------------------------------------

struct Partition {
  std::vector<int> labels;  // cluster id per leaf, 0..k-1 in order of first appearance
  std::size_t k = 0;
  double mean_silhouette = 0.0;
  std::vector<double> per_cluster_silhouette;  // indexed by cluster id
};

/// Flat clustering with exactly k clusters: the state after the first n-k merges.
inline std::vector<int> cut_tree(const Dendrogram& tree, std::size_t k) {
  const std::size_t n = tree.leaf_count();
  require(k >= 1 && k <= n, Errc::invalid_input, "cut size out of range");
  std::vector<std::size_t> parent(2 * n - 1);
  std::iota(parent.begin(), parent.end(), std::size_t{0});
  for (std::size_t m = 0; m < n - k; ++m) parent[tree.merges[m].left] = parent[tree.merges[m].right] = n + m;
  auto root = [&](std::size_t x) {
    while (parent[x] != x) x = parent[x];
    return x;
  };
  std::map<std::size_t, int> relabel;
  std::vector<int> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto [it, inserted] = relabel.try_emplace(root(i), static_cast<int>(relabel.size()));
    labels[i] = it->second;
  }
  return labels;
}

/// One partition per k in [2, n-1] (n-2 partitions), unscored.
inline std::vector<Partition> enumerate_partitions(const Dendrogram& tree) {
  const std::size_t n = tree.leaf_count();
  require(n >= 3, Errc::too_few_leaves, "partition enumeration needs at least 3 leaves");
  require(tree.merges.size() == n - 1, Errc::invalid_input, "dendrogram must have n-1 merges");
  std::vector<Partition> out;
  for (std::size_t k = 2; k <= n - 1; ++k) {
    Partition p;
    p.labels = cut_tree(tree, k);
    p.k = k;
    out.push_back(std::move(p));
  }
  return out;
}

struct SilhouetteResult {
  double mean = 0.0;
  std::map<int, double> per_cluster;
};

/// Standard silhouette over a square distance matrix. Members of singleton
/// clusters score 0, as does any point with a(i) = b(i) = 0.
inline SilhouetteResult silhouette(std::span<const int> labels, const Matrix& pairwise) {
  const std::size_t n = labels.size();
  require(pairwise.rows() == n && pairwise.cols() == n, Errc::dimension_error,
          "silhouette: distance matrix does not match label count");
  std::map<int, std::vector<std::size_t>> clusters;
  for (std::size_t i = 0; i < n; ++i) clusters[labels[i]].push_back(i);
  require(clusters.size() >= 2, Errc::undefined_silhouette, "silhouette needs at least 2 clusters");

  std::vector<double> s(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& own = clusters[labels[i]];
    if (own.size() == 1) continue;
    double a = 0.0;
    for (std::size_t j : own)
      if (j != i) a += pairwise(i, j);
    a /= static_cast<double>(own.size() - 1);
    double b = std::numeric_limits<double>::infinity();
    for (const auto& [label, members] : clusters) {
      if (label == labels[i]) continue;
      double sum = 0.0;
      for (std::size_t j : members) sum += pairwise(i, j);
      b = std::min(b, sum / static_cast<double>(members.size()));
    }
    const double denom = std::max(a, b);
    s[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }

  SilhouetteResult out;
  out.mean = std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(n);
  for (const auto& [label, members] : clusters) {
    double sum = 0.0;
    for (std::size_t j : members) sum += s[j];
    out.per_cluster[label] = sum / static_cast<double>(members.size());
  }
  return out;
}

inline void score_partition(Partition& p, const Matrix& pairwise) {
  const SilhouetteResult r = silhouette(p.labels, pairwise);
  p.mean_silhouette = r.mean;
  p.per_cluster_silhouette.assign(p.k, 0.0);
  for (const auto& [label, value] : r.per_cluster) p.per_cluster_silhouette[static_cast<std::size_t>(label)] = value;
}

/// The enumerated partition with the highest mean silhouette; ties keep the
/// smaller k.
inline Partition best_partition(const Dendrogram& tree, const Matrix& pairwise) {
  std::vector<Partition> candidates = enumerate_partitions(tree);
  std::size_t best = 0;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    score_partition(candidates[i], pairwise);
    if (candidates[i].mean_silhouette > candidates[best].mean_silhouette) best = i;
  }
  return std::move(candidates[best]);
}

/// Cophenetic distances: merge height of the lowest common ancestor.
inline Matrix cophenetic_matrix(const Dendrogram& tree) {
  const std::size_t n = tree.leaf_count();
  Matrix out(n, n);
  std::vector<std::vector<std::size_t>> members(2 * n - 1);
  for (std::size_t i = 0; i < n; ++i) members[i] = {i};
  for (std::size_t m = 0; m < tree.merges.size(); ++m) {
    const auto& mg = tree.merges[m];
    for (std::size_t a : members[mg.left])
      for (std::size_t b : members[mg.right]) out(a, b) = out(b, a) = mg.height;
    auto& dst = members[n + m];
    dst = std::move(members[mg.left]);
    dst.insert(dst.end(), members[mg.right].begin(), members[mg.right].end());
    members[mg.right].clear();
  }
  return out;
}

// --- export -----------------------------------------------------------------

namespace detail {
inline std::string newick_label(const std::string& name) {
  if (name.find_first_of("()[]':;, \t\n") == std::string::npos) return name;
  std::string quoted = "'";
  for (char c : name) {
    if (c == '\'') quoted += '\'';
    quoted += c;
  }
  return quoted + "'";
}
}  // namespace detail

/// Newick string; each branch length is the parent's merge height minus the
/// child's (leaves sit at height 0), so node depths equal merge heights.
inline std::string to_newick(const Dendrogram& tree) {
  const std::size_t n = tree.leaf_count();
  auto height = [&](std::size_t node) { return node < n ? 0.0 : tree.merges[node - n].height; };
  std::string out;
  auto emit = [&](auto&& self, std::size_t node, double parent_height) -> void {
    if (node < n) {
      out += detail::newick_label(tree.leaves[node]);
    } else {
      const auto& m = tree.merges[node - n];
      out += '(';
      self(self, m.left, m.height);
      out += ',';
      self(self, m.right, m.height);
      out += ')';
    }
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, std::max(0.0, parent_height - height(node)));
    out += ':';
    out.append(buf, res.ptr);
  };
  if (n == 1) return detail::newick_label(tree.leaves[0]) + ";";
  const auto& m = tree.merges.back();
  out += '(';
  emit(emit, m.left, m.height);
  out += ',';
  emit(emit, m.right, m.height);
  out += ");";
  return out;
}

inline nlohmann::json to_json(const Dendrogram& tree) {
  nlohmann::json merges = nlohmann::json::array();
  for (const auto& m : tree.merges) merges.push_back({m.left, m.right, m.height, m.size});
  return {{"leaves", tree.leaves}, {"merges", merges}};
}

inline Dendrogram dendrogram_from_json(const nlohmann::json& j) {
  Dendrogram t;
  t.leaves = j.at("leaves").get<std::vector<std::string>>();
  for (const auto& m : j.at("merges"))
    t.merges.push_back({m.at(0).get<std::size_t>(), m.at(1).get<std::size_t>(), m.at(2).get<double>(),
                        m.at(3).get<std::size_t>()});
  return t;
}

}  // namespace ctxsteer
