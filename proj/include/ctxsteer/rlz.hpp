#pragma once

// Relative Lempel-Ziv factorization of a target against a fixed reference,
// plus a bit-cost model with adaptive (delta-coded) pointers. Only sizes are
// produced; there is no decodable bitstream.

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "ctxsteer/compressors.hpp"
#include "ctxsteer/error.hpp"

namespace ctxsteer {

/// Largest |delta| for which a copy position is coded as an 8-bit signed
/// offset from the previous copy's continuation point.
inline constexpr std::int64_t kAdaptiveWindow = 127;
inline constexpr std::uint64_t kDeltaBits = 8;

struct RlzPhrase {
  enum class Kind { copy, literal };
  Kind kind = Kind::copy;
  std::size_t position = 0;  // reference offset (copy only)
  std::size_t length = 0;    // symbols covered
  Bytes literal;             // literal symbols (literal only)

  friend bool operator==(const RlzPhrase&, const RlzPhrase&) = default;
};

struct RlzParse {
  std::vector<RlzPhrase> phrases;
  std::uint64_t total_cost_bits = 0;

  std::size_t target_length() const {
    std::size_t n = 0;
    for (const auto& p : phrases) n += p.length;
    return n;
  }
};

/// ceil(log2(x)) for x >= 1; ceil_log2(1) == 0.
constexpr std::uint64_t ceil_log2(std::uint64_t x) noexcept {
  return x <= 1 ? 0 : static_cast<std::uint64_t>(std::bit_width(x - 1));
}

/// Number of distinct byte values in `data`, floored at 2.
inline int distinct_symbols(ByteView data) {
  std::array<bool, 256> seen{};
  int count = 0;
  for (auto b : data)
    if (!seen[b]) {
      seen[b] = true;
      ++count;
    }
  return std::max(count, 2);
}

/// Sum of per-phrase costs:
///   copy    1 flag bit + position field + ceil(log2(L+1)) length bits, where
///           the position field is 8 bits when the copy starts within
///           +/-127 of the previous copy's end, else ceil(log2(L)) bits
///   literal 1 flag bit + ceil(log2(alphabet_size)) bits per symbol
inline std::uint64_t rlz_compressed_size_bits(const RlzParse& parse, std::size_t reference_length,
                                              int alphabet_size) {
  require(alphabet_size >= 2, Errc::invalid_input, "alphabet_size must be >= 2");
  require(reference_length >= 1, Errc::invalid_input, "reference must be non-empty");
  const std::uint64_t abs_pos_bits = ceil_log2(reference_length);
  const std::uint64_t len_bits = ceil_log2(static_cast<std::uint64_t>(reference_length) + 1);
  const std::uint64_t sym_bits = ceil_log2(static_cast<std::uint64_t>(alphabet_size));

  std::uint64_t bits = 0;
  bool have_prev = false;
  std::int64_t prev_end = 0;
  for (const auto& p : parse.phrases) {
    if (p.kind == RlzPhrase::Kind::literal) {
      bits += 1 + sym_bits * p.literal.size();
      continue;
    }
    const auto pos = static_cast<std::int64_t>(p.position);
    const bool near = have_prev && pos - prev_end >= -kAdaptiveWindow && pos - prev_end <= kAdaptiveWindow;
    bits += 1 + (near ? kDeltaBits : abs_pos_bits) + len_bits;
    have_prev = true;
    prev_end = pos + static_cast<std::int64_t>(p.length);
  }
  return bits;
}

/// Suffix array over a reference with leftmost-longest match queries.
/// Immutable after construction; safe to share across threads.
class RlzIndex {
 public:
  struct Match {
    std::size_t position = 0;
    std::size_t length = 0;
  };

  explicit RlzIndex(Bytes reference) : ref_(std::move(reference)) {
    require(!ref_.empty(), Errc::invalid_input, "RLZ reference must be non-empty");
    build_suffix_array();
    build_min_table();
  }

  const Bytes& reference() const noexcept { return ref_; }
  const std::vector<std::uint32_t>& suffix_array() const noexcept { return sa_; }

  /// Longest prefix of target[cursor..] occurring in the reference; among
  /// equally long occurrences the smallest reference position wins.
  Match longest_match(ByteView target, std::size_t cursor) const {
    std::size_t lo = 0, hi = sa_.size(), len = 0;
    const std::size_t n = ref_.size();
    while (cursor + len < target.size()) {
      const int c = target[cursor + len];
      auto sym = [&](std::size_t idx) -> int {
        const std::size_t p = sa_[idx] + len;
        return p < n ? ref_[p] : -1;
      };
      std::size_t a = lo, b = hi;
      while (a < b) {  // first suffix with sym >= c
        const std::size_t mid = a + (b - a) / 2;
        if (sym(mid) < c) a = mid + 1; else b = mid;
      }
      const std::size_t first = a;
      b = hi;
      while (a < b) {  // first suffix with sym > c
        const std::size_t mid = a + (b - a) / 2;
        if (sym(mid) <= c) a = mid + 1; else b = mid;
      }
      if (first == a) break;
      lo = first;
      hi = a;
      ++len;
    }
    if (len == 0) return {};
    return {range_min(lo, hi), len};
  }

  /// Greedy factorization; a symbol with no occurrence becomes a 1-symbol
  /// literal. Costs are evaluated with `alphabet_size` (0 = distinct symbols
  /// of the target).
  RlzParse factorize(ByteView target, int alphabet_size = 0) const {
    require(!target.empty(), Errc::invalid_input, "RLZ target must be non-empty");
    RlzParse parse;
    std::size_t cursor = 0;
    while (cursor < target.size()) {
      const Match m = longest_match(target, cursor);
      if (m.length == 0) {
        parse.phrases.push_back({RlzPhrase::Kind::literal, 0, 1, Bytes{target[cursor]}});
        cursor += 1;
      } else {
        parse.phrases.push_back({RlzPhrase::Kind::copy, m.position, m.length, {}});
        cursor += m.length;
      }
    }
    if (alphabet_size == 0) alphabet_size = distinct_symbols(target);
    parse.total_cost_bits = rlz_compressed_size_bits(parse, ref_.size(), alphabet_size);
    return parse;
  }

 private:
  void build_suffix_array() {
    // Prefix doubling: O(n log^2 n), fine for document-sized references.
    const std::size_t n = ref_.size();
    sa_.resize(n);
    std::vector<std::int64_t> rank(n), tmp(n);
    for (std::size_t i = 0; i < n; ++i) {
      sa_[i] = static_cast<std::uint32_t>(i);
      rank[i] = ref_[i];
    }
    for (std::size_t k = 1;; k <<= 1) {
      auto key = [&](std::uint32_t i) {
        return std::pair{rank[i], i + k < n ? rank[i + k] : std::int64_t{-1}};
      };
      std::sort(sa_.begin(), sa_.end(), [&](std::uint32_t a, std::uint32_t b) { return key(a) < key(b); });
      tmp[sa_[0]] = 0;
      for (std::size_t i = 1; i < n; ++i) tmp[sa_[i]] = tmp[sa_[i - 1]] + (key(sa_[i - 1]) < key(sa_[i]) ? 1 : 0);
      rank.swap(tmp);
      if (rank[sa_[n - 1]] == static_cast<std::int64_t>(n - 1) || k >= n) break;
    }
  }

  void build_min_table() {
    const std::size_t n = sa_.size();
    table_.push_back(sa_);
    for (std::size_t w = 1; 2 * w <= n; w <<= 1) {
      const auto& prev = table_.back();
      std::vector<std::uint32_t> level(n - 2 * w + 1);
      for (std::size_t i = 0; i < level.size(); ++i) level[i] = std::min(prev[i], prev[i + w]);
      table_.push_back(std::move(level));
    }
  }

  std::size_t range_min(std::size_t lo, std::size_t hi) const {
    const std::size_t level = std::bit_width(hi - lo) - 1;
    return std::min(table_[level][lo], table_[level][hi - (std::size_t{1} << level)]);
  }

  Bytes ref_;
  std::vector<std::uint32_t> sa_;
  std::vector<std::vector<std::uint32_t>> table_;
};

inline RlzParse rlz_factorize(ByteView target, ByteView reference, int alphabet_size = 0) {
  require(!reference.empty(), Errc::invalid_input, "RLZ reference must be non-empty");
  require(!target.empty(), Errc::invalid_input, "RLZ target must be non-empty");
  return RlzIndex(Bytes(reference.begin(), reference.end())).factorize(target, alphabet_size);
}

/// Rebuilds the target from a parse; throws if a copy leaves the reference.
inline Bytes rlz_expand(const RlzParse& parse, ByteView reference) {
  Bytes out;
  for (const auto& p : parse.phrases) {
    if (p.kind == RlzPhrase::Kind::literal) {
      out.insert(out.end(), p.literal.begin(), p.literal.end());
    } else {
      require(p.length > 0 && p.position + p.length <= reference.size(), Errc::invalid_input,
              "copy phrase outside reference");
      out.insert(out.end(), reference.begin() + static_cast<std::ptrdiff_t>(p.position),
                 reference.begin() + static_cast<std::ptrdiff_t>(p.position + p.length));
    }
  }
  return out;
}

}  // namespace ctxsteer
