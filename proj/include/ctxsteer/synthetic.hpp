#pragma once

// Seeded order-2 Markov text sources. Each class source mixes a transition
// table shared by all classes with its own table; `class_weight` controls how
// far apart the classes are (0 = indistinguishable, 1 = fully distinct).

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "ctxsteer/distances.hpp"
#include "ctxsteer/matrix_io.hpp"
#include "ctxsteer/rng.hpp"

namespace ctxsteer {

inline constexpr std::string_view kSyntheticAlphabet = "abcdefghijklmnopqrstuvwxyz ,.";

class MarkovSource {
 public:
  /// Each of the |A|^2 contexts gets `support` successors with random
  /// weights; everything else has probability 0.
  static MarkovSource random(std::uint64_t seed, std::string alphabet = std::string(kSyntheticAlphabet),
                             std::size_t support = 6) {
    MarkovSource s;
    s.alphabet_ = std::move(alphabet);
    const std::size_t a = s.alphabet_.size();
    s.p_.assign(a * a * a, 0.0);
    Rng rng(seed);
    std::vector<std::size_t> symbols(a);
    for (std::size_t i = 0; i < a; ++i) symbols[i] = i;
    for (std::size_t ctx = 0; ctx < a * a; ++ctx) {
      rng.shuffle(symbols);
      double total = 0.0;
      for (std::size_t j = 0; j < std::min(support, a); ++j) {
        const double w = 0.05 + rng.uniform();
        s.p_[ctx * a + symbols[j]] = w;
        total += w;
      }
      for (std::size_t j = 0; j < a; ++j) s.p_[ctx * a + j] /= total;
    }
    return s;
  }

  /// (1 - w) * base + w * own, context by context.
  static MarkovSource mixture(const MarkovSource& base, const MarkovSource& own, double w) {
    require(base.alphabet_ == own.alphabet_, Errc::invalid_input, "mixture of sources with different alphabets");
    MarkovSource s = base;
    for (std::size_t i = 0; i < s.p_.size(); ++i) s.p_[i] = (1.0 - w) * base.p_[i] + w * own.p_[i];
    return s;
  }

  std::string generate(std::size_t length, Rng& rng) const {
    const std::size_t a = alphabet_.size();
    std::string out;
    out.reserve(length);
    std::size_t x = rng.below(a), y = rng.below(a);
    for (std::size_t i = 0; i < length; ++i) {
      const double* row = &p_[(x * a + y) * a];
      double u = rng.uniform();
      std::size_t z = a - 1;
      for (std::size_t j = 0; j < a; ++j) {
        u -= row[j];
        if (u < 0.0) {
          z = j;
          break;
        }
      }
      out.push_back(alphabet_[z]);
      x = y;
      y = z;
    }
    return out;
  }

  const std::string& alphabet() const noexcept { return alphabet_; }

 private:
  std::string alphabet_;
  std::vector<double> p_;  // [context x*|A|+y][next]
};

struct SyntheticSpec {
  std::size_t classes = 2;
  std::size_t docs_per_class = 60;
  std::size_t doc_bytes = 2048;
  double class_weight = 0.5;
  std::uint64_t seed = 1;
};

inline std::string synthetic_label(std::size_t c) { return "source" + std::to_string(c); }

/// Objects with ids "<label>/doc<NNN>.txt" in class order.
inline std::vector<CorpusObject> synthetic_corpus(const SyntheticSpec& spec) {
  const MarkovSource base = MarkovSource::random(mix_seed(spec.seed, 0));
  std::vector<CorpusObject> out;
  for (std::size_t c = 0; c < spec.classes; ++c) {
    const MarkovSource src = MarkovSource::mixture(base, MarkovSource::random(mix_seed(spec.seed, c + 1)), spec.class_weight);
    Rng rng(mix_seed(spec.seed, 1000 + c));
    for (std::size_t d = 0; d < spec.docs_per_class; ++d) {
      char name[32];
      std::snprintf(name, sizeof name, "doc%03zu.txt", d);
      const std::string label = synthetic_label(c);
      out.push_back(make_object(label + "/" + name, label, to_bytes(src.generate(spec.doc_bytes, rng))));
    }
  }
  return out;
}

/// Writes the corpus in the <root>/<class>/<file> layout.
inline void write_synthetic_corpus(const std::filesystem::path& root, const SyntheticSpec& spec) {
  for (const auto& obj : synthetic_corpus(spec))
    write_file_atomic(root / obj.id, std::string(obj.payload.begin(), obj.payload.end()));
}

}  // namespace ctxsteer
