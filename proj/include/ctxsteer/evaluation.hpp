#pragma once

// Cross-validated comparison of context-selection methods. Every fold masks
// the test objects out of the column space before anything is fitted, so no
// statistic, cluster, reference or classifier ever sees a test column.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "ctxsteer/clustering.hpp"
#include "ctxsteer/distances.hpp"
#include "ctxsteer/error.hpp"
#include "ctxsteer/feature_select.hpp"
#include "ctxsteer/forest.hpp"
#include "ctxsteer/kmeans.hpp"
#include "ctxsteer/metrics.hpp"
#include "ctxsteer/parallel.hpp"
#include "ctxsteer/rng.hpp"
#include "ctxsteer/steering.hpp"

namespace ctxsteer {

// --- folds ------------------------------------------------------------------

struct Fold {
  std::vector<std::string> train_ids;
  std::vector<std::string> test_ids;
};

struct FoldPlan {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  bool stratified = true;
  bool grouped = false;  // folds drawn over file groups, fragments follow their file
  std::vector<Fold> folds;
};

namespace detail {

/// Fold index per item: each class is shuffled with its own stream and dealt
/// round-robin starting where the previous class stopped, so per-class fold
/// sizes differ by at most one and overall sizes stay balanced.
inline std::vector<std::size_t> assign_folds(std::span<const std::string> labels, std::size_t k, std::uint64_t seed) {
  require(k >= 2, Errc::invalid_fold, "fold count must be >= 2");
  std::map<std::string, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);
  std::vector<std::size_t> fold(labels.size(), 0);
  std::size_t offset = 0, stream = 0;
  for (auto& [label, members] : by_class) {
    require(members.size() >= k, Errc::class_too_small,
            "class '" + label + "' has " + std::to_string(members.size()) + " samples, fewer than " +
                std::to_string(k) + " folds");
    Rng rng(mix_seed(seed, stream++));
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j) fold[members[j]] = (offset + j) % k;
    offset = (offset + members.size()) % k;
  }
  return fold;
}

}  // namespace detail

/// Stratified, seeded K-fold plan over the given ids.
inline FoldPlan make_folds(std::span<const std::string> ids, std::span<const std::string> labels, std::size_t k,
                           std::uint64_t seed) {
  require(ids.size() == labels.size(), Errc::dimension_error, "ids and labels differ in length");
  const auto fold = detail::assign_folds(labels, k, seed);
  FoldPlan plan{k, seed, true, false, std::vector<Fold>(k)};
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (std::size_t f = 0; f < k; ++f) (fold[i] == f ? plan.folds[f].test_ids : plan.folds[f].train_ids).push_back(ids[i]);
  return plan;
}

/// Folds over file groups (stratified by the files' labels); every fragment
/// lands in the fold of its file.
inline FoldPlan make_group_folds(std::span<const std::string> ids, std::span<const std::string> labels,
                                 std::span<const std::string> groups, std::size_t k, std::uint64_t seed) {
  require(ids.size() == labels.size() && ids.size() == groups.size(), Errc::dimension_error,
          "ids, labels and groups differ in length");
  std::vector<std::string> files, file_labels;
  std::map<std::string, std::size_t> file_index;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    auto [it, inserted] = file_index.try_emplace(groups[i], files.size());
    if (inserted) {
      files.push_back(groups[i]);
      file_labels.push_back(labels[i]);
    } else {
      require(file_labels[it->second] == labels[i], Errc::invalid_input,
              "fragments of '" + groups[i] + "' carry different labels");
    }
  }
  const auto fold = detail::assign_folds(file_labels, k, seed);
  FoldPlan plan{k, seed, true, true, std::vector<Fold>(k)};
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::size_t f_i = fold[file_index.at(groups[i])];
    for (std::size_t f = 0; f < k; ++f) (f_i == f ? plan.folds[f].test_ids : plan.folds[f].train_ids).push_back(ids[i]);
  }
  return plan;
}

/// Plain or group-aware folds, depending on whether the matrix carries
/// fragment groups.
inline FoldPlan make_folds(const DistanceMatrix& m, std::size_t k, std::uint64_t seed) {
  return m.groups.empty() ? make_folds(m.ids, m.labels, k, seed) : make_group_folds(m.ids, m.labels, m.groups, k, seed);
}

// --- masking ----------------------------------------------------------------

/// All rows, only the training columns.
inline BehaviorMatrix mask_columns(const DistanceMatrix& m, std::span<const std::string> train_ids) {
  require(!train_ids.empty(), Errc::invalid_fold, "empty training set");
  const std::set<std::string> keep(train_ids.begin(), train_ids.end());
  for (const auto& id : keep) (void)m.index_of(id);
  std::vector<std::size_t> rows(m.size()), cols;
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  BehaviorMatrix bm;
  bm.row_ids = m.ids;
  bm.row_labels = m.labels;
  for (std::size_t j = 0; j < m.size(); ++j)
    if (keep.count(m.ids[j])) {
      cols.push_back(j);
      bm.col_ids.push_back(m.ids[j]);
      bm.col_labels.push_back(m.labels[j]);
    }
  bm.values = m.values.select(rows, cols);
  bm.class_index_map = ClassIndexMap::from_labels(bm.col_labels);
  return bm;
}

/// Keeps the listed rows (in the given order) and every column.
inline BehaviorMatrix select_rows(const BehaviorMatrix& bm, std::span<const std::string> ids) {
  std::vector<std::size_t> rows, cols(bm.col_ids.size());
  std::iota(cols.begin(), cols.end(), std::size_t{0});
  BehaviorMatrix out;
  for (const auto& id : ids) {
    rows.push_back(bm.row_index(id));
    out.row_ids.push_back(id);
    out.row_labels.push_back(bm.row_labels[rows.back()]);
  }
  out.col_ids = bm.col_ids;
  out.col_labels = bm.col_labels;
  out.values = bm.values.select(rows, cols);
  out.class_index_map = bm.class_index_map;
  return out;
}

// --- methods ----------------------------------------------------------------

enum class Method { ours, random, dummy, kbest_anova, kbest_chi2, kbest_mi, knn };

constexpr std::string_view to_string(Method m) noexcept {
  switch (m) {
    case Method::ours: return "ours";
    case Method::random: return "random";
    case Method::dummy: return "dummy";
    case Method::kbest_anova: return "kbest-anova";
    case Method::kbest_chi2: return "kbest-chi2";
    case Method::kbest_mi: return "kbest-mi";
    case Method::knn: return "knn";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  for (Method m : {Method::ours, Method::random, Method::dummy, Method::kbest_anova, Method::kbest_chi2,
                   Method::kbest_mi, Method::knn})
    if (s == to_string(m)) return m;
  fail(Errc::invalid_input, "unknown method '" + std::string(s) + "'");
}

constexpr bool is_randomized(Method m) noexcept { return m == Method::random || m == Method::dummy; }

struct MethodConfig {
  Method method = Method::ours;
  SteeringConfig steering;
  std::size_t feature_count = 0;  // baselines; 0 = number of training classes
  std::size_t knn_k = 1;
  std::size_t iterations = 10;  // random and dummy
  std::uint64_t seed = 0;
  std::size_t trees = 100;
};

inline nlohmann::json to_json(const MethodConfig& c) {
  return {{"method", std::string(to_string(c.method))},
          {"policy", to_string(c.steering.policy)},
          {"refs", c.steering.refs},
          {"ref_strategy", std::string(to_string(c.steering.strategy))},
          {"aggregate", std::string(to_string(c.steering.aggregate))},
          {"weighting", std::string(to_string(c.steering.weighting))},
          {"silhouette_space", c.steering.silhouette_space == SilhouetteSpace::feature ? "feature" : "cophenetic"},
          {"feature_count", c.feature_count},
          {"knn_k", c.knn_k},
          {"iterations", c.iterations},
          {"seed", c.seed},
          {"trees", c.trees}};
}

namespace detail {

/// f split over `buckets` as evenly as possible, earlier buckets first.
inline std::vector<std::size_t> spread(std::size_t f, std::size_t buckets) {
  std::vector<std::size_t> out(buckets, f / buckets);
  for (std::size_t i = 0; i < f % buckets; ++i) ++out[i];
  return out;
}

inline std::map<std::string, std::vector<std::string>> ids_by_class(const BehaviorMatrix& train) {
  std::map<std::string, std::vector<std::string>> out;
  for (std::size_t i = 0; i < train.row_ids.size(); ++i) out[train.row_labels[i]].push_back(train.row_ids[i]);
  return out;
}

}  // namespace detail

/// Clusters and references for a baseline method on the training rows.
/// `train` rows and columns are both the training objects.
inline std::vector<ClusterSpec> baseline_context(const MethodConfig& method, const BehaviorMatrix& train,
                                                 std::uint64_t seed, std::vector<std::string>* warnings = nullptr) {
  require(method.method != Method::ours && method.method != Method::knn, Errc::invalid_input,
          "baseline_context is for baseline methods only");
  const auto classes = detail::ids_by_class(train);
  std::size_t f = method.feature_count ? method.feature_count : classes.size();
  Rng rng(seed);
  std::vector<ClusterSpec> specs;

  if (method.method == Method::random) {
    // Random stand-in for steps 2-3: a random partition of each class with
    // k drawn from the same [2, n-1] range the silhouette search covers,
    // random clusters from it, and a random reference in each.
    const auto share = detail::spread(f, classes.size());
    std::size_t c = 0;
    for (const auto& [label, ids] : classes) {
      const std::size_t n = ids.size();
      const std::size_t k = n >= 3 ? 2 + static_cast<std::size_t>(rng.below(n - 2)) : n;
      std::vector<std::string> order = ids;
      rng.shuffle(order);
      std::vector<ClusterSpec> local(k);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t slot = j < k ? j : static_cast<std::size_t>(rng.below(k));
        local[slot].members.push_back(order[j]);
      }
      rng.shuffle(local);
      const std::size_t keep = std::min(share[c++], k);
      for (std::size_t j = 0; j < keep; ++j) {
        ClusterSpec& s = local[j];
        s.label = label;
        s.references.push_back(s.members[static_cast<std::size_t>(rng.below(s.members.size()))]);
        specs.push_back(std::move(s));
      }
    }
    return specs;
  }

  if (method.method == Method::dummy) {
    if (f > train.row_ids.size()) {
      if (warnings) warnings->push_back("dummy: feature count clipped to " + std::to_string(train.row_ids.size()));
      f = train.row_ids.size();
    }
    std::vector<std::string> pool = train.row_ids;
    rng.shuffle(pool);
    const auto share = detail::spread(f, classes.size());
    std::size_t c = 0, next = 0;
    for (const auto& [label, ids] : classes) {
      ClusterSpec s;
      s.label = label;
      s.members = ids;
      for (std::size_t j = 0; j < share[c]; ++j) s.references.push_back(pool[next++]);
      ++c;
      if (!s.references.empty()) specs.push_back(std::move(s));
    }
    return specs;
  }

  // kbest: column scores against the row labels, then k-means on the kept columns.
  if (f > train.col_ids.size() || f > train.row_ids.size()) {
    f = std::min(train.col_ids.size(), train.row_ids.size());
    if (warnings) warnings->push_back("kbest: feature count clipped to " + std::to_string(f));
  }
  const LabelEncoder enc(train.row_labels);
  const auto y = enc.encode(train.row_labels);
  const FeatureScore score = method.method == Method::kbest_anova ? FeatureScore::anova
                             : method.method == Method::kbest_chi2 ? FeatureScore::chi2
                                                                   : FeatureScore::mutual_information;
  const auto top = top_columns(score_columns(train.values, y, enc.size(), score), f);
  std::vector<std::size_t> rows(train.row_ids.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  const KMeansResult km = kmeans(train.values.select(rows, top), {top.size(), 10, 300, seed});
  for (std::size_t j = 0; j < top.size(); ++j) {
    ClusterSpec s;
    s.label = "kmeans-" + std::to_string(j);
    for (std::size_t i = 0; i < rows.size(); ++i)
      if (km.labels[i] == static_cast<int>(j)) s.members.push_back(train.row_ids[i]);
    s.references.push_back(train.col_ids[top[j]]);
    specs.push_back(std::move(s));
  }
  return specs;
}

// --- classifiers ------------------------------------------------------------

/// Neighbor vote fractions per class (encoder order) for each test row.
inline std::vector<std::vector<double>> knn_proba(const Matrix& train, std::span<const std::string> train_labels,
                                                  const Matrix& test, std::size_t k, const LabelEncoder& enc,
                                                  std::vector<std::string>* warnings = nullptr) {
  require(train.cols() == test.cols(), Errc::dimension_error, "knn: train and test columns differ");
  require(k >= 1, Errc::invalid_count, "knn: k must be >= 1");
  require(train.rows() == train_labels.size() && train.rows() > 0, Errc::dimension_error, "knn: bad training set");
  if (k > train.rows()) {
    if (warnings) warnings->push_back("knn: k clipped to " + std::to_string(train.rows()));
    k = train.rows();
  }
  std::vector<std::vector<double>> out;
  std::vector<std::pair<double, std::size_t>> d(train.rows());
  for (std::size_t t = 0; t < test.rows(); ++t) {
    for (std::size_t i = 0; i < train.rows(); ++i) d[i] = {behavior_distance(test.row(t), train.row(i)), i};
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::vector<double> votes(enc.size(), 0.0);
    for (std::size_t j = 0; j < k; ++j) votes[enc.encode(train_labels[d[j].second])] += 1.0 / static_cast<double>(k);
    out.push_back(std::move(votes));
  }
  return out;
}

/// Majority vote of the k nearest training rows; ties go to the label whose
/// tied neighbors are closer on average, then to the smaller label.
inline std::vector<std::string> knn_predict(const Matrix& train, std::span<const std::string> train_labels,
                                            const Matrix& test, std::size_t k,
                                            std::vector<std::string>* warnings = nullptr) {
  require(train.cols() == test.cols(), Errc::dimension_error, "knn: train and test columns differ");
  require(k >= 1, Errc::invalid_count, "knn: k must be >= 1");
  require(train.rows() == train_labels.size() && train.rows() > 0, Errc::dimension_error, "knn: bad training set");
  if (k > train.rows()) {
    if (warnings) warnings->push_back("knn: k clipped to " + std::to_string(train.rows()));
    k = train.rows();
  }
  std::vector<std::string> out;
  std::vector<std::pair<double, std::size_t>> d(train.rows());
  for (std::size_t t = 0; t < test.rows(); ++t) {
    for (std::size_t i = 0; i < train.rows(); ++i) d[i] = {behavior_distance(test.row(t), train.row(i)), i};
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(k), d.end());
    std::map<std::string, std::pair<std::size_t, double>> tally;  // votes, summed distance
    for (std::size_t j = 0; j < k; ++j) {
      auto& e = tally[train_labels[d[j].second]];
      ++e.first;
      e.second += d[j].first;
    }
    const std::string* best = nullptr;
    std::pair<std::size_t, double> best_e{0, 0.0};
    for (const auto& [label, e] : tally) {  // map order = lexicographic
      const double mean = e.second / static_cast<double>(e.first);
      const double best_mean = best ? best_e.second / static_cast<double>(best_e.first) : 0.0;
      if (!best || e.first > best_e.first || (e.first == best_e.first && mean < best_mean)) {
        best = &label;
        best_e = e;
      }
    }
    out.push_back(*best);
  }
  return out;
}

struct ClassifierScores {
  double train_f1 = 0.0;
  double test_f1 = 0.0;
  std::vector<std::vector<double>> train_proba;
  std::vector<std::vector<double>> test_proba;  // per test row, encoder class order
  std::vector<std::string> classes;
};

inline std::vector<std::string> argmax_labels(const std::vector<std::vector<double>>& proba,
                                              const std::vector<std::string>& classes) {
  std::vector<std::string> out;
  for (const auto& p : proba)
    out.push_back(classes[static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin())]);
  return out;
}

/// Fits the forest on the training features and scores macro-F1 on both
/// splits.
inline ClassifierScores train_score_classifier(const Matrix& x_train, std::span<const std::string> y_train,
                                               const Matrix& x_test, std::span<const std::string> y_test,
                                               ForestConfig config = {}) {
  require(x_train.cols() >= 1 && x_train.cols() == x_test.cols(), Errc::dimension_error,
          "classifier: feature dimension must be >= 1 and equal on both splits");
  require(x_test.rows() == y_test.size(), Errc::dimension_error, "classifier: test rows differ from labels");
  const LabelEncoder enc(y_train);
  require(enc.size() >= 2, Errc::degenerate_labels, "classifier: training labels contain a single class");
  RandomForest forest(config);
  forest.fit(x_train, enc.encode(y_train), enc.size());
  ClassifierScores out;
  out.classes = enc.classes();
  for (std::size_t i = 0; i < x_train.rows(); ++i) out.train_proba.push_back(forest.predict_proba(x_train.row(i)));
  for (std::size_t i = 0; i < x_test.rows(); ++i) out.test_proba.push_back(forest.predict_proba(x_test.row(i)));
  out.train_f1 = macro_f1(y_train, argmax_labels(out.train_proba, out.classes));
  if (!y_test.empty()) out.test_f1 = macro_f1(y_test, argmax_labels(out.test_proba, out.classes));
  return out;
}

// --- fragment voting --------------------------------------------------------

struct FileVote {
  std::string file;
  std::string label;
  double probability = 0.0;
  std::size_t fragment = 0;  // index of the deciding fragment
};

/// Per file (in the order given), the top class of its most confident
/// fragment; ties go to the earliest fragment.
inline std::vector<FileVote> fragment_vote(const std::vector<std::vector<double>>& fragment_probs,
                                           std::span<const std::string> fragment_file,
                                           const std::vector<std::string>& classes,
                                           std::span<const std::string> files) {
  require(fragment_probs.size() == fragment_file.size(), Errc::dimension_error,
          "fragment_vote: one file id per fragment is required");
  std::vector<FileVote> out;
  for (const auto& file : files) {
    std::optional<FileVote> best;
    for (std::size_t i = 0; i < fragment_file.size(); ++i) {
      if (fragment_file[i] != file) continue;
      const auto& p = fragment_probs[i];
      require(p.size() == classes.size(), Errc::dimension_error, "fragment_vote: probability width mismatch");
      const auto top = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
      if (!best || p[top] > best->probability) best = FileVote{file, classes[top], p[top], i};
    }
    require(best.has_value(), Errc::missing_fragments, "file '" + file + "' has no fragments");
    out.push_back(*best);
  }
  return out;
}

/// Files in order of first appearance.
inline std::vector<FileVote> fragment_vote(const std::vector<std::vector<double>>& fragment_probs,
                                           std::span<const std::string> fragment_file,
                                           const std::vector<std::string>& classes) {
  std::vector<std::string> files;
  std::set<std::string> seen;
  for (const auto& f : fragment_file)
    if (seen.insert(f).second) files.push_back(f);
  return fragment_vote(fragment_probs, fragment_file, classes, files);
}

// --- experiment -------------------------------------------------------------

enum class Standardize { none, pipeline };

struct ExperimentOptions {
  Standardize standardize = Standardize::none;
  std::size_t workers = 1;
};

struct FoldResult {
  std::size_t fold = 0;
  double train_f1 = 0.0;
  double test_f1 = 0.0;
  double train_silhouette = std::numeric_limits<double>::quiet_NaN();
  double test_silhouette = std::numeric_limits<double>::quiet_NaN();
  double feature_count = 0.0;  // mean over iterations for randomized methods
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t retained_columns = 0;
  double seconds = 0.0;
  std::vector<std::string> warnings;
};

struct EvalReport {
  MethodConfig method;
  Measure measure = Measure::ncd;
  Codec codec = Codec::deflate;
  Standardize standardize = Standardize::none;
  std::vector<std::string> classes;
  std::uint64_t fold_seed = 0;
  std::vector<FoldResult> folds;

  double mean_of(double FoldResult::*field) const {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& f : folds)
      if (!std::isnan(f.*field)) {
        s += f.*field;
        ++n;
      }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
  }
  double train_f1_mean() const { return mean_of(&FoldResult::train_f1); }
  double test_f1_mean() const { return mean_of(&FoldResult::test_f1); }
  double train_silhouette_mean() const { return mean_of(&FoldResult::train_silhouette); }
  double test_silhouette_mean() const { return mean_of(&FoldResult::test_silhouette); }
  double feature_count_mean() const { return mean_of(&FoldResult::feature_count); }
};

namespace detail {

inline double feature_silhouette(const Matrix& features, std::span<const std::string> labels) {
  if (features.rows() < 2 || std::set<std::string>(labels.begin(), labels.end()).size() < 2) return std::nan("");
  const LabelEncoder enc(labels);
  std::vector<int> y;
  for (const auto& l : labels) y.push_back(static_cast<int>(enc.encode(l)));
  return silhouette(y, pairwise_distances(features)).mean;
}

/// Macro-F1 of the class predictions, at file level when fragments are grouped.
inline double split_f1(const std::vector<std::vector<double>>& proba, const std::vector<std::string>& classes,
                       std::span<const std::string> truth, const std::vector<std::string>* groups) {
  if (truth.empty()) return std::nan("");
  if (!groups) return macro_f1(truth, argmax_labels(proba, classes));
  const auto votes = fragment_vote(proba, *groups, classes);
  std::map<std::string, std::string> file_truth;
  for (std::size_t i = 0; i < groups->size(); ++i) file_truth.emplace((*groups)[i], truth[i]);
  std::vector<std::string> t, p;
  for (const auto& v : votes) {
    t.push_back(file_truth.at(v.file));
    p.push_back(v.label);
  }
  return macro_f1(t, p);
}

struct SplitFeatures {
  Matrix train, test;
};

inline std::vector<std::string> groups_of(const DistanceMatrix& m, std::span<const std::string> ids) {
  std::vector<std::string> out;
  for (const auto& id : ids) out.push_back(m.groups[m.index_of(id)]);
  return out;
}

}  // namespace detail

/// One fold of one method. `m` is the (possibly already standardized) matrix.
inline FoldResult run_fold(const DistanceMatrix& raw, const MethodConfig& method, const Fold& fold, std::size_t index,
                           const ExperimentOptions& options) {
  const auto start = std::chrono::steady_clock::now();
  FoldResult r;
  r.fold = index;
  r.train_size = fold.train_ids.size();
  r.test_size = fold.test_ids.size();

  DistanceMatrix m_std;
  const DistanceMatrix* m = &raw;
  if (options.standardize == Standardize::pipeline) {
    m_std = standardize_rows(raw, row_stats_from_matrix(raw, fold.train_ids, StatsProvenance::pipeline));
    m = &m_std;
  }
  const BehaviorMatrix masked = mask_columns(*m, fold.train_ids);
  r.retained_columns = masked.col_ids.size();
  const BehaviorMatrix train = select_rows(masked, fold.train_ids);
  const BehaviorMatrix test = select_rows(masked, fold.test_ids);

  std::vector<std::string> train_groups, test_groups;
  const bool grouped = !m->groups.empty();
  if (grouped) {
    train_groups = detail::groups_of(*m, fold.train_ids);
    test_groups = detail::groups_of(*m, fold.test_ids);
  }

  const std::size_t iterations = is_randomized(method.method) ? std::max<std::size_t>(1, method.iterations) : 1;
  double train_f1 = 0.0, test_f1 = 0.0, train_sil = 0.0, test_sil = 0.0, features = 0.0;
  std::size_t train_sil_n = 0, test_sil_n = 0;
  for (std::size_t it = 0; it < iterations; ++it) {
    const std::uint64_t seed = mix_seed(method.seed, index * 1000003ULL + it);
    Matrix xtr, xte;
    std::vector<std::vector<double>> ptr, pte;
    std::vector<std::string> classes;
    if (method.method == Method::knn) {
      xtr = train.values;
      xte = test.values;
      const LabelEncoder enc(train.row_labels);
      classes = enc.classes();
      ptr = knn_proba(xtr, train.row_labels, xtr, method.knn_k, enc, &r.warnings);
      pte = knn_proba(xtr, train.row_labels, xte, method.knn_k, enc, &r.warnings);
      if (!grouped) {
        // Deterministic tie rule instead of plain argmax.
        const auto ytr = knn_predict(xtr, train.row_labels, xtr, method.knn_k);
        const auto yte = knn_predict(xtr, train.row_labels, xte, method.knn_k);
        train_f1 += macro_f1(train.row_labels, ytr);
        test_f1 += test.row_labels.empty() ? 0.0 : macro_f1(test.row_labels, yte);
      }
    } else {
      const BehaviorMatrix square = [&] {
        // Rows and columns are both the training objects, in the same order.
        BehaviorMatrix sq = train;
        std::vector<std::size_t> cols;
        for (const auto& id : train.row_ids) cols.push_back(masked.col_index(id));
        std::vector<std::size_t> rows(train.row_ids.size());
        std::iota(rows.begin(), rows.end(), std::size_t{0});
        sq.values = train.values.select(rows, cols);
        sq.col_ids = train.row_ids;
        sq.col_labels = train.row_labels;
        sq.class_index_map = ClassIndexMap::from_labels(sq.col_labels);
        return sq;
      }();
      std::optional<RowStats> stats = m->row_stats;
      const EmbeddingModel model =
          method.method == Method::ours
              ? build_embedding_model(square, method.steering, m->measure, m->codec, stats)
              : assemble_model(square, baseline_context(method, square, seed, &r.warnings), method.steering,
                               m->measure, m->codec, stats);
      std::vector<std::size_t> tr_rows, te_rows;
      for (const auto& id : fold.train_ids) tr_rows.push_back(masked.row_index(id));
      for (const auto& id : fold.test_ids) te_rows.push_back(masked.row_index(id));
      xtr = embed_rows(model, masked, tr_rows, true);
      xte = embed_rows(model, masked, te_rows);
      ForestConfig fc{method.trees, mix_seed(seed, 0xf0e57), 1};
      auto scores = train_score_classifier(xtr, train.row_labels, xte, test.row_labels, fc);
      ptr = std::move(scores.train_proba);
      pte = std::move(scores.test_proba);
      classes = std::move(scores.classes);
      if (!grouped) {
        train_f1 += scores.train_f1;
        test_f1 += scores.test_f1;
      }
    }
    if (grouped) {
      train_f1 += detail::split_f1(ptr, classes, train.row_labels, &train_groups);
      test_f1 += detail::split_f1(pte, classes, test.row_labels, &test_groups);
    }
    features += static_cast<double>(xtr.cols());
    if (const double s = detail::feature_silhouette(xtr, train.row_labels); !std::isnan(s)) {
      train_sil += s;
      ++train_sil_n;
    }
    if (const double s = detail::feature_silhouette(xte, test.row_labels); !std::isnan(s)) {
      test_sil += s;
      ++test_sil_n;
    }
  }
  const auto n = static_cast<double>(iterations);
  r.train_f1 = train_f1 / n;
  r.test_f1 = test_f1 / n;
  r.feature_count = features / n;
  if (train_sil_n) r.train_silhouette = train_sil / static_cast<double>(train_sil_n);
  if (test_sil_n) r.test_silhouette = test_sil / static_cast<double>(test_sil_n);
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

/// All folds of one method; folds run as independent jobs and are reduced in
/// fold order. Errors carry the fold index.
inline EvalReport run_experiment(const DistanceMatrix& m, const MethodConfig& method, const FoldPlan& plan,
                                 const ExperimentOptions& options = {}) {
  require(m.labels.size() == m.size() && m.values.rows() == m.size() && m.values.cols() == m.size(),
          Errc::dimension_error, "distance matrix shape does not match its ids");
  require(!plan.folds.empty(), Errc::invalid_fold, "empty fold plan");
  EvalReport report;
  report.method = method;
  report.measure = options.standardize == Standardize::pipeline ? Measure::nrc_standardized : m.measure;
  report.codec = m.codec;
  report.standardize = options.standardize;
  report.classes = sorted_labels(m.labels);
  report.fold_seed = plan.seed;
  report.folds.resize(plan.folds.size());
  parallel_for(plan.folds.size(), options.workers, [&](std::size_t f) {
    try {
      report.folds[f] = run_fold(m, method, plan.folds[f], f, options);
    } catch (const Error& e) {
      throw Error(e.code(), "fold " + std::to_string(f) + ": " + e.what());
    }
  });
  return report;
}

// --- report I/O -------------------------------------------------------------

namespace detail {
inline nlohmann::json num(double v) { return std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v); }
inline std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? std::string(1, sep) : "") + v[i];
  return out;
}
}  // namespace detail

inline constexpr std::string_view to_string(Standardize s) noexcept {
  return s == Standardize::none ? "none" : "pipeline";
}

/// Array of per-fold records followed by one aggregate record. Wall-clock
/// times are the only non-deterministic fields.
inline nlohmann::json report_to_json(const EvalReport& r, const nlohmann::json& manifest = nlohmann::json::object()) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& f : r.folds) {
    out.push_back({{"record", "fold"},
                   {"fold", f.fold},
                   {"train_f1", f.train_f1},
                   {"test_f1", f.test_f1},
                   {"train_silhouette", detail::num(f.train_silhouette)},
                   {"test_silhouette", detail::num(f.test_silhouette)},
                   {"feature_count", f.feature_count},
                   {"train_size", f.train_size},
                   {"test_size", f.test_size},
                   {"retained_columns", f.retained_columns},
                   {"seconds", f.seconds},
                   {"warnings", f.warnings}});
  }
  nlohmann::json agg = {{"record", "aggregate"},
                        {"method", to_json(r.method)},
                        {"measure", std::string(to_string(r.measure))},
                        {"codec", std::string(to_string(r.codec))},
                        {"standardize", std::string(to_string(r.standardize))},
                        {"classes", r.classes},
                        {"folds", r.folds.size()},
                        {"fold_seed", r.fold_seed},
                        {"train_f1_mean", detail::num(r.train_f1_mean())},
                        {"test_f1_mean", detail::num(r.test_f1_mean())},
                        {"train_silhouette_mean", detail::num(r.train_silhouette_mean())},
                        {"test_silhouette_mean", detail::num(r.test_silhouette_mean())},
                        {"feature_count_mean", detail::num(r.feature_count_mean())}};
  if (!manifest.empty()) agg["manifest"] = manifest;
  out.push_back(std::move(agg));
  return out;
}

inline std::string report_csv_header() {
  return "method,codec,measure,classes,feature_count,test_f1_mean,test_sil_mean\n";
}

inline std::string report_csv_row(const EvalReport& r) {
  auto fmt = [](double v) { return std::isnan(v) ? std::string() : format_double(v); };
  return std::string(to_string(r.method.method)) + "," + std::string(to_string(r.codec)) + "," +
         std::string(to_string(r.measure)) + "," + detail::join(r.classes, ';') + "," + fmt(r.feature_count_mean()) +
         "," + fmt(r.test_f1_mean()) + "," + fmt(r.test_silhouette_mean()) + "\n";
}

// --- sweeps -----------------------------------------------------------------

struct SubsetResult {
  std::vector<std::string> classes;
  EvalReport report;
};

struct SubsetSweep {
  std::vector<SubsetResult> subsets;
  std::map<std::size_t, double> median_test_f1;  // by class count

  static double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : (v[h - 1] + v[h]) / 2.0;
  }
};

/// Every subset of the matrix's classes with size in [min_size, max_size]
/// (lexicographic order), each evaluated on its own fold plan.
inline SubsetSweep class_subset_sweep(const DistanceMatrix& m, const MethodConfig& method, std::size_t min_size,
                                      std::size_t max_size, std::size_t folds, std::uint64_t fold_seed,
                                      const ExperimentOptions& options = {}) {
  const auto labels = sorted_labels(m.labels);
  require(min_size >= 2 && min_size <= max_size && max_size <= labels.size(), Errc::invalid_count,
          "subset sizes must satisfy 2 <= min <= max <= class count");
  SubsetSweep out;
  std::map<std::size_t, std::vector<double>> by_size;
  for (std::size_t size = min_size; size <= max_size; ++size) {
    std::vector<char> pick(labels.size(), 0);
    std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(size), 1);
    do {
      std::vector<std::string> subset;
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (pick[i]) subset.push_back(labels[i]);
      const std::set<std::string> keep(subset.begin(), subset.end());
      std::vector<std::string> ids;
      for (std::size_t i = 0; i < m.size(); ++i)
        if (keep.count(m.labels[i])) ids.push_back(m.ids[i]);
      const DistanceMatrix sub = submatrix(m, ids);
      EvalReport rep = run_experiment(sub, method, make_folds(sub, folds, fold_seed), options);
      by_size[size].push_back(rep.test_f1_mean());
      out.subsets.push_back({std::move(subset), std::move(rep)});
    } while (std::prev_permutation(pick.begin(), pick.end()));
  }
  for (auto& [size, values] : by_size) out.median_test_f1[size] = SubsetSweep::median(values);
  return out;
}

/// Flat grid: one report per method config, all on the same fold plan.
inline std::vector<EvalReport> grid_sweep(const DistanceMatrix& m, const std::vector<MethodConfig>& grid,
                                          const FoldPlan& plan, const ExperimentOptions& options = {}) {
  std::vector<EvalReport> out;
  for (const auto& cfg : grid) out.push_back(run_experiment(m, cfg, plan, options));
  return out;
}

}  // namespace ctxsteer
