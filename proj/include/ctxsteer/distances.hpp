#pragma once

#include <cmath>
#include <concepts>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "ctxsteer/compressors.hpp"
#include "ctxsteer/error.hpp"
#include "ctxsteer/matrix.hpp"
#include "ctxsteer/parallel.hpp"
#include "ctxsteer/rlz.hpp"

namespace ctxsteer {

struct CorpusObject {
  std::string id;
  std::string label;
  Bytes payload;
  int alphabet_size = 2;
  std::string group;  // file group for fragment corpora; defaults to id
};

/// Builds an object, deriving the alphabet size from the distinct symbols of
/// the payload (floored at 2) unless `alphabet_override` is given.
inline CorpusObject make_object(std::string id, std::string label, Bytes payload,
                                std::optional<int> alphabet_override = std::nullopt) {
  require(!payload.empty(), Errc::invalid_input, "object '" + id + "' has an empty payload");
  const int alphabet = alphabet_override ? *alphabet_override : distinct_symbols(payload);
  require(alphabet >= 2, Errc::invalid_input, "object '" + id + "' alphabet_size < 2");
  std::string group = id;
  return {std::move(id), std::move(label), std::move(payload), alphabet, std::move(group)};
}

enum class Measure { ncd, nrc, nrc_standardized };

constexpr std::string_view to_string(Measure m) noexcept {
  switch (m) {
    case Measure::ncd: return "ncd";
    case Measure::nrc: return "nrc";
    case Measure::nrc_standardized: return "nrc-standardized";
  }
  return "?";
}

inline Measure parse_measure(std::string_view s) {
  if (s == "ncd") return Measure::ncd;
  if (s == "nrc") return Measure::nrc;
  if (s == "nrc-standardized") return Measure::nrc_standardized;
  fail(Errc::invalid_input, "unknown measure '" + std::string(s) + "'");
}

enum class StatsProvenance { external, pipeline };

constexpr std::string_view to_string(StatsProvenance p) noexcept {
  return p == StatsProvenance::external ? "external" : "pipeline";
}

inline constexpr double kStdFloor = 1e-12;

struct RowStat {
  double mean = 0.0;
  double std = 1.0;
  friend bool operator==(const RowStat&, const RowStat&) = default;
};

struct RowStats {
  std::map<std::string, RowStat> rows;
  StatsProvenance provenance = StatsProvenance::pipeline;
  std::vector<std::string> reference_ids;  // objects the statistics were estimated from
  friend bool operator==(const RowStats&, const RowStats&) = default;
};

struct DistanceMatrix {
  std::vector<std::string> ids;
  std::vector<std::string> labels;
  std::vector<std::string> groups;  // empty, or one file-group id per row
  Matrix values;
  Measure measure = Measure::ncd;
  Codec codec = Codec::deflate;
  std::optional<RowStats> row_stats;

  std::size_t size() const noexcept { return ids.size(); }

  std::size_t index_of(const std::string& id) const {
    for (std::size_t i = 0; i < ids.size(); ++i)
      if (ids[i] == id) return i;
    fail(Errc::invalid_input, "unknown object id '" + id + "'");
  }
};

// --- single distances -------------------------------------------------------

/// Anything that reports C(x) and C(xy).
template <class O>
concept SizeOracle = requires(const O& o, ByteView a) {
  { o.size(a) } -> std::convertible_to<double>;
  { o.concat_size(a, a) } -> std::convertible_to<double>;
};

struct CodecOracle {
  Codec codec;
  std::size_t size(ByteView x) const { return compressed_size(x, codec); }
  std::size_t concat_size(ByteView x, ByteView y) const { return concat_compressed_size(x, y, codec); }
};

/// (C(xy) - min(C(x), C(y))) / max(C(x), C(y)), clamped below at 0.
inline double ncd_from_sizes(double cx, double cy, double cxy) {
  const double value = (cxy - std::min(cx, cy)) / std::max(cx, cy);
  return std::max(0.0, value);
}

template <SizeOracle O>
double ncd(const CorpusObject& x, const CorpusObject& y, const O& oracle) {
  try {
    return ncd_from_sizes(static_cast<double>(oracle.size(x.payload)), static_cast<double>(oracle.size(y.payload)),
                          static_cast<double>(oracle.concat_size(x.payload, y.payload)));
  } catch (const Error& e) {
    if (e.code() == Errc::wrong_codec_family) throw;
    fail(Errc::codec_error, "ncd(" + x.id + ", " + y.id + "): " + e.what());
  }
}

inline double ncd(const CorpusObject& x, const CorpusObject& y, Codec codec) {
  require(is_general_purpose(codec), Errc::wrong_codec_family, "ncd needs a general-purpose codec");
  return ncd(x, y, CodecOracle{codec});
}

/// bits / (|x| * log2 |A|)
inline double nrc_from_bits(double bits, std::size_t target_length, int alphabet_size) {
  require(alphabet_size >= 2, Errc::invalid_input, "alphabet_size must be >= 2");
  require(target_length > 0, Errc::invalid_input, "target must be non-empty");
  return bits / (static_cast<double>(target_length) * std::log2(static_cast<double>(alphabet_size)));
}

inline double nrc(const CorpusObject& x, const RlzIndex& reference) {
  require(x.alphabet_size >= 2, Errc::invalid_input, "object '" + x.id + "' alphabet_size < 2");
  const RlzParse parse = reference.factorize(x.payload, x.alphabet_size);
  return nrc_from_bits(static_cast<double>(parse.total_cost_bits), x.payload.size(), x.alphabet_size);
}

/// NRC(x || reference).
inline double nrc(const CorpusObject& x, const CorpusObject& reference) {
  require(!x.payload.empty() && !reference.payload.empty(), Errc::invalid_input, "nrc operands must be non-empty");
  return nrc(x, RlzIndex(reference.payload));
}

// --- matrices ---------------------------------------------------------------

namespace detail {

inline void check_corpus(const std::vector<CorpusObject>& corpus) {
  require(corpus.size() >= 2, Errc::invalid_input, "a distance matrix needs at least 2 objects");
  std::set<std::string> seen;
  for (const auto& o : corpus) {
    require(!o.payload.empty(), Errc::invalid_input, "object '" + o.id + "' has an empty payload");
    require(seen.insert(o.id).second, Errc::invalid_input, "duplicate object id '" + o.id + "'");
  }
}

}  // namespace detail

/// values(i, j) = ncd(i, j) (order i then j) or nrc(i || j). Both orderings
/// are computed; nothing is symmetrized here. Output is independent of the
/// worker count.
inline DistanceMatrix build_distance_matrix(const std::vector<CorpusObject>& corpus, Measure measure, Codec codec,
                                            std::size_t workers = 1) {
  detail::check_corpus(corpus);
  const std::size_t n = corpus.size();
  DistanceMatrix out;
  out.measure = measure;
  out.codec = codec;
  out.values = Matrix(n, n);
  bool any_group = false;
  for (const auto& o : corpus) {
    out.ids.push_back(o.id);
    out.labels.push_back(o.label);
    out.groups.push_back(o.group.empty() ? o.id : o.group);
    any_group |= !o.group.empty() && o.group != o.id;
  }
  if (!any_group) out.groups.clear();

  auto pair_error = [&](std::size_t i, std::size_t j, const std::exception& e) -> Error {
    return Error(Errc::codec_error, "pair (" + corpus[i].id + ", " + corpus[j].id + "): " + e.what());
  };

  if (measure == Measure::ncd) {
    require(is_general_purpose(codec), Errc::wrong_codec_family, "ncd matrices need a general-purpose codec");
    std::vector<double> single(n);
    parallel_for(n, workers, [&](std::size_t i) {
      try {
        single[i] = static_cast<double>(compressed_size(corpus[i].payload, codec));
      } catch (const std::exception& e) {
        throw pair_error(i, i, e);
      }
    });
    parallel_for(n * n, workers, [&](std::size_t k) {
      const std::size_t i = k / n, j = k % n;
      try {
        const auto cxy = static_cast<double>(concat_compressed_size(corpus[i].payload, corpus[j].payload, codec));
        out.values(i, j) = ncd_from_sizes(single[i], single[j], cxy);
      } catch (const std::exception& e) {
        throw pair_error(i, j, e);
      }
    });
  } else if (measure == Measure::nrc) {
    require(codec == Codec::rlz, Errc::wrong_codec_family, "nrc matrices need the rlz codec");
    parallel_for(n, workers, [&](std::size_t j) {
      const RlzIndex index(corpus[j].payload);
      for (std::size_t i = 0; i < n; ++i) {
        try {
          out.values(i, j) = nrc(corpus[i], index);
        } catch (const std::exception& e) {
          throw pair_error(i, j, e);
        }
      }
    });
  } else {
    fail(Errc::measure_mismatch, "build_distance_matrix computes ncd or nrc only");
  }
  return out;
}

// --- hex encoding -----------------------------------------------------------

inline Bytes hex_encode(ByteView data) {
  static constexpr char digits[] = "0123456789abcdef";
  Bytes out;
  out.reserve(data.size() * 2);
  for (auto b : data) {
    out.push_back(static_cast<std::uint8_t>(digits[b >> 4]));
    out.push_back(static_cast<std::uint8_t>(digits[b & 0xf]));
  }
  return out;
}

inline Bytes hex_decode(ByteView hex) {
  require(hex.size() % 2 == 0, Errc::invalid_input, "hex input has odd length");
  auto nibble = [](std::uint8_t c) -> std::uint8_t {
    if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
    fail(Errc::invalid_input, "invalid hex digit");
  };
  Bytes out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  return out;
}

// --- row standardization ----------------------------------------------------

/// Population mean/std with the std floored at kStdFloor.
inline RowStat population_stats(std::span<const double> values) {
  require(!values.empty(), Errc::insufficient_references, "no values to estimate statistics from");
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / static_cast<double>(values.size()));
  return {mean, std::max(sd, kStdFloor)};
}

/// Per-target mean/std of nrc(target || r) over the references, skipping the
/// target itself when it appears among them.
inline RowStats compute_row_stats(const std::vector<CorpusObject>& targets, const std::vector<CorpusObject>& references,
                                  StatsProvenance provenance, std::size_t workers = 1) {
  require(!references.empty(), Errc::insufficient_references, "no references given");
  std::vector<RlzIndex> indexes;
  indexes.reserve(references.size());
  for (const auto& r : references) indexes.emplace_back(r.payload);

  std::vector<RowStat> stats(targets.size());
  parallel_for(targets.size(), workers, [&](std::size_t t) {
    std::vector<double> row;
    for (std::size_t r = 0; r < references.size(); ++r) {
      if (references[r].id == targets[t].id) continue;
      row.push_back(nrc(targets[t], indexes[r]));
    }
    require(row.size() >= 2, Errc::insufficient_references,
            "row statistics for '" + targets[t].id + "' need at least 2 references");
    stats[t] = population_stats(row);
  });

  RowStats out;
  out.provenance = provenance;
  for (const auto& r : references) out.reference_ids.push_back(r.id);
  for (std::size_t t = 0; t < targets.size(); ++t) out.rows[targets[t].id] = stats[t];
  return out;
}

/// Same statistics read off an already computed matrix: for every row, the
/// entries in the reference columns except the row's own column.
inline RowStats row_stats_from_matrix(const DistanceMatrix& m, const std::vector<std::string>& reference_ids,
                                      StatsProvenance provenance) {
  require(!reference_ids.empty(), Errc::insufficient_references, "no references given");
  std::vector<std::size_t> cols;
  for (const auto& id : reference_ids) cols.push_back(m.index_of(id));
  RowStats out;
  out.provenance = provenance;
  out.reference_ids = reference_ids;
  std::vector<double> row;
  for (std::size_t i = 0; i < m.size(); ++i) {
    row.clear();
    for (std::size_t c : cols)
      if (c != i) row.push_back(m.values(i, c));
    require(row.size() >= 2, Errc::insufficient_references,
            "row statistics for '" + m.ids[i] + "' need at least 2 references");
    out.rows[m.ids[i]] = population_stats(row);
  }
  return out;
}

/// (v - mean_i) / std_i on every entry of row i. Only raw NRC matrices may be
/// standardized.
inline DistanceMatrix standardize_rows(const DistanceMatrix& m, const RowStats& stats) {
  require(m.measure == Measure::nrc, Errc::measure_mismatch,
          "standardize_rows needs a raw nrc matrix, got " + std::string(to_string(m.measure)));
  DistanceMatrix out = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto it = stats.rows.find(m.ids[i]);
    require(it != stats.rows.end(), Errc::missing_stats, "no row statistics for '" + m.ids[i] + "'");
    const double sd = std::max(it->second.std, kStdFloor);
    for (std::size_t j = 0; j < m.values.cols(); ++j) out.values(i, j) = (m.values(i, j) - it->second.mean) / sd;
  }
  out.measure = Measure::nrc_standardized;
  out.row_stats = stats;
  return out;
}

/// Standardizes a free-standing distance vector (e.g. a new sample's
/// distances to cluster members) with its precomputed statistics.
inline std::vector<double> standardize_values(std::span<const double> values, const RowStat& stat) {
  std::vector<double> out(values.begin(), values.end());
  const double sd = std::max(stat.std, kStdFloor);
  for (auto& v : out) v = (v - stat.mean) / sd;
  return out;
}

/// Rows/columns restricted to the given ids, in the given order.
inline DistanceMatrix submatrix(const DistanceMatrix& m, const std::vector<std::string>& keep) {
  std::vector<std::size_t> idx;
  for (const auto& id : keep) idx.push_back(m.index_of(id));
  DistanceMatrix out;
  out.measure = m.measure;
  out.codec = m.codec;
  out.row_stats = m.row_stats;
  out.values = m.values.select(idx, idx);
  for (std::size_t i : idx) {
    out.ids.push_back(m.ids[i]);
    out.labels.push_back(m.labels[i]);
    if (!m.groups.empty()) out.groups.push_back(m.groups[i]);
  }
  return out;
}

}  // namespace ctxsteer
