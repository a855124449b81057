#include <gtest/gtest.h>

#include "ctxsteer/compressors.hpp"
#include "ctxsteer/rlz.hpp"
#include "oracles.hpp"

using namespace ctxsteer;

namespace {

const Codec kGeneral[] = {Codec::deflate, Codec::bzip2, Codec::lzma};

Bytes bytes_of(std::string_view s) { return to_bytes(s); }

}  // namespace

TEST(Compressors, RepeatedCharacterCompressesWell) {
  const Bytes a(10000, 'a');
  // Frozen from one run: deflate 29 bytes.
  EXPECT_LT(compressed_size(a, Codec::deflate), 100u);
  for (auto c : kGeneral) EXPECT_LT(compressed_size(a, c), 200u) << to_string(c);
}

TEST(Compressors, Deterministic) {
  const auto x = bytes_of(oracle::compressible_text(4000, 3));
  for (auto c : kGeneral) EXPECT_EQ(compressed_size(x, c), compressed_size(x, c));
}

TEST(Compressors, RandomBytesAreIncompressible) {
  Rng rng(11);
  const auto x = oracle::random_bytes(10000, rng);
  for (auto c : kGeneral) EXPECT_GE(static_cast<double>(compressed_size(x, c)), 10000 * 0.98) << to_string(c);
}

TEST(Compressors, SelfConcatenationIsRedundant) {
  const auto x = bytes_of(oracle::repetitive_text(10000, 2000, 5));
  for (auto c : kGeneral)
    EXPECT_LE(static_cast<double>(concat_compressed_size(x, x, c)), 1.2 * static_cast<double>(compressed_size(x, c)))
        << to_string(c);
}

TEST(Compressors, EmptySecondOperandRejected) {
  const auto x = bytes_of("abc");
  try {
    (void)concat_compressed_size(x, Bytes{}, Codec::deflate);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::invalid_input);
  }
}

TEST(Compressors, ConcatOfIndependentRandomPairs) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(100 + s);
    const auto x = oracle::random_bytes(2000, rng), y = oracle::random_bytes(2000, rng);
    for (auto c : kGeneral) {
      const double cx = static_cast<double>(compressed_size(x, c)), cy = static_cast<double>(compressed_size(y, c));
      EXPECT_GE(static_cast<double>(concat_compressed_size(x, y, c)), 0.9 * std::max(cx, cy));
    }
  }
}

TEST(Rlz, IdentityIsOneCopy) {
  const auto p = rlz_factorize(bytes_of("abracadabra"), bytes_of("abracadabra"));
  ASSERT_EQ(p.phrases.size(), 1u);
  EXPECT_EQ(p.phrases[0].kind, RlzPhrase::Kind::copy);
  EXPECT_EQ(p.phrases[0].position, 0u);
  EXPECT_EQ(p.phrases[0].length, 11u);
}

TEST(Rlz, DisjointAlphabetsGiveLiterals) {
  const auto p = rlz_factorize(bytes_of("xyz"), bytes_of("abc"));
  std::size_t symbols = 0;
  for (const auto& ph : p.phrases) {
    EXPECT_EQ(ph.kind, RlzPhrase::Kind::literal);
    symbols += ph.literal.size();
  }
  EXPECT_EQ(symbols, 3u);
}

TEST(Rlz, MatchesBruteForceParse) {
  const auto t = bytes_of("abab"), r = bytes_of("ab");
  const auto p = rlz_factorize(t, r);
  const auto o = oracle::greedy_parse(t, r);
  ASSERT_EQ(p.phrases.size(), o.size());
  for (std::size_t i = 0; i < o.size(); ++i) {
    EXPECT_EQ(p.phrases[i].position, o[i].pos);
    EXPECT_EQ(p.phrases[i].length, 2u);
  }
}

TEST(Rlz, LongestMatchAgreesWithScanOnRandomInputs) {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ref = oracle::random_bytes(1 + rng.below(80), rng, 3, 'a');
    const auto tgt = oracle::random_bytes(1 + rng.below(40), rng, 4, 'a');
    const RlzIndex idx(ref);
    for (std::size_t c = 0; c < tgt.size(); ++c) {
      const auto m = idx.longest_match(tgt, c);
      const auto [pos, len] = oracle::longest_match(tgt, c, ref);
      ASSERT_EQ(m.length, len);
      if (len > 0) {
        ASSERT_EQ(m.position, pos);
      }
    }
  }
}

TEST(RlzCost, IdentityParseCosts22Bits) {
  RlzParse p;
  p.phrases.push_back({RlzPhrase::Kind::copy, 0, 1024, {}});
  EXPECT_EQ(rlz_compressed_size_bits(p, 1024, 4), 22u);
}

TEST(RlzCost, AllLiteralParse) {
  RlzParse p;
  for (int i = 0; i < 37; ++i) p.phrases.push_back({RlzPhrase::Kind::literal, 0, 1, Bytes{'q'}});
  EXPECT_EQ(rlz_compressed_size_bits(p, 100, 16), 37u * 5u);
}

TEST(RlzCost, ContinuingCopyUsesDeltaField) {
  RlzParse p;
  p.phrases.push_back({RlzPhrase::Kind::copy, 100, 10, {}});
  p.phrases.push_back({RlzPhrase::Kind::copy, 110, 10, {}});
  // Reference of 4096: 12-bit absolute position, 13-bit length.
  EXPECT_EQ(rlz_compressed_size_bits(p, 4096, 4), (1u + 12 + 13) + (1u + 8 + 13));
  p.phrases[1].position = 1000;
  EXPECT_EQ(rlz_compressed_size_bits(p, 4096, 4), 2u * (1 + 12 + 13));
}

TEST(RlzCost, AgreesWithOracleOnGreedyParses) {
  Rng rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto ref = oracle::random_bytes(1 + rng.below(400), rng, 4, 'a');
    const auto tgt = oracle::random_bytes(1 + rng.below(400), rng, 6, 'a');
    const auto p = rlz_factorize(tgt, ref, 6);
    EXPECT_EQ(p.total_cost_bits, oracle::cost_bits(oracle::greedy_parse(tgt, ref), ref.size(), 6));
  }
}

TEST(Rlz, SelfCompressionIsCheap) {
  const auto x = bytes_of(oracle::compressible_text(4096, 9));
  const auto p = rlz_factorize(x, x);
  EXPECT_LE(p.total_cost_bits, 64u);
}

// Only a symbol absent from the reference becomes a literal, so a longer
// reference can only remove literals and can only lengthen the first copy.
TEST(Rlz, ExtendingTheReferenceNeverAddsLiterals) {
  auto literals = [](const RlzParse& p) {
    std::size_t n = 0;
    for (const auto& ph : p.phrases) n += ph.kind == RlzPhrase::Kind::literal;
    return n;
  };
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    auto ref = oracle::random_bytes(5 + rng.below(40), rng, 6, 'a');
    const auto tgt = oracle::random_bytes(100, rng, 8, 'a');
    const auto before = rlz_factorize(tgt, ref);
    const auto extra = oracle::random_bytes(60, rng, 8, 'a');
    ref.insert(ref.end(), extra.begin(), extra.end());
    const auto after = rlz_factorize(tgt, ref);
    EXPECT_LE(literals(after), literals(before));
    EXPECT_GE(after.phrases[0].length, before.phrases[0].length);
  }
}

TEST(Rlz, ExpansionRoundTrips) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const auto ref = oracle::random_bytes(1 + rng.below(300), rng, 5, 'a');
    const auto tgt = oracle::random_bytes(1 + rng.below(300), rng, 6, 'a');
    EXPECT_EQ(rlz_expand(rlz_factorize(tgt, ref), ref), tgt);
  }
}

TEST(Rlz, EmptyReferenceRejected) { EXPECT_THROW(RlzIndex(Bytes{}), Error); }
