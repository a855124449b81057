#include <gtest/gtest.h>

#include <filesystem>

#include "ctxsteer/distances.hpp"
#include "ctxsteer/matrix_io.hpp"
#include "oracles.hpp"

using namespace ctxsteer;

namespace {

struct MockOracle {
  double cx, cy, cxy;
  std::size_t calls = 0;
  double size(ByteView x) const { return x.size() == 1 ? cx : cy; }
  double concat_size(ByteView, ByteView) const { return cxy; }
};

CorpusObject text_object(std::string id, std::string label, std::size_t n, std::uint64_t seed) {
  return make_object(std::move(id), std::move(label), to_bytes(oracle::compressible_text(n, seed)));
}

DistanceMatrix nrc_matrix(Matrix values) {
  DistanceMatrix m;
  m.measure = Measure::nrc;
  m.codec = Codec::rlz;
  for (std::size_t i = 0; i < values.rows(); ++i) {
    m.ids.push_back("o" + std::to_string(i));
    m.labels.push_back(i % 2 ? "b" : "a");
  }
  m.values = std::move(values);
  return m;
}

}  // namespace

TEST(Ncd, MockedSizes) {
  const auto x = make_object("x", "a", Bytes{'x'});
  const auto y = make_object("y", "a", Bytes{'y', 'y'});
  EXPECT_DOUBLE_EQ(ncd(x, y, MockOracle{100, 80, 120}), 0.4);
}

TEST(Ncd, ClampedAtZero) { EXPECT_EQ(ncd_from_sizes(100, 100, 90), 0.0); }

TEST(Ncd, SelfDistanceIsSmallOnCompressibleText) {
  const auto x = make_object("x", "a", to_bytes(oracle::repetitive_text(10000, 2000, 1)));
  for (auto c : {Codec::deflate, Codec::bzip2, Codec::lzma}) EXPECT_LT(ncd(x, x, c), 0.15) << to_string(c);
}

// Frozen regression values on free-running word text: dictionary coders stay
// near 0, the block-sorting coder does not.
TEST(Ncd, SelfDistanceOnWordText) {
  const auto x = text_object("x", "a", 10000, 5);
  EXPECT_LT(ncd(x, x, Codec::deflate), 0.07);
  EXPECT_LT(ncd(x, x, Codec::lzma), 0.03);
  EXPECT_NEAR(ncd(x, x, Codec::bzip2), 0.439, 0.005);
}

TEST(Ncd, IndependentRandomPairsAreFar) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(s);
    const auto x = make_object("x", "a", oracle::random_bytes(10000, rng));
    const auto y = make_object("y", "a", oracle::random_bytes(10000, rng));
    EXPECT_GT(ncd(x, y, Codec::deflate), 0.9);
  }
}

TEST(Ncd, RlzIsNotAGeneralCodec) {
  const auto x = make_object("x", "a", Bytes{'a', 'b'});
  try {
    (void)ncd(x, x, Codec::rlz);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::wrong_codec_family);
  }
}

TEST(Nrc, MockedBits) { EXPECT_DOUBLE_EQ(nrc_from_bits(1200, 300, 16), 1.0); }

TEST(Nrc, SelfIsCheap) {
  Rng rng(4);
  const auto x = make_object("x", "a", oracle::random_bytes(4096, rng, 64, 32));
  ASSERT_EQ(x.alphabet_size, 64);
  EXPECT_LE(nrc(x, x), 0.1);
}

TEST(Nrc, RandomPairsAreFar) {
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(50 + s);
    const auto x = make_object("x", "a", oracle::random_bytes(4096, rng, 64, 32));
    const auto y = make_object("y", "a", oracle::random_bytes(4096, rng, 64, 32));
    EXPECT_GE(nrc(x, y), 0.8);
  }
}

TEST(Nrc, AlphabetIsFlooredAtTwo) {
  const auto x = make_object("x", "a", Bytes(50, 'z'));
  EXPECT_EQ(x.alphabet_size, 2);
}

TEST(DistanceMatrix, IdenticalObjects) {
  std::vector<CorpusObject> c;
  for (int i = 0; i < 3; ++i) {
    auto o = text_object("o" + std::to_string(i), "a", 3000, 7);
    c.push_back(o);
  }
  const auto m = build_distance_matrix(c, Measure::ncd, Codec::deflate);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      EXPECT_LT(m.values(i, j), 0.15);
      EXPECT_NEAR(m.values(i, j), m.values(0, 1), 1e-12);
    }
}

TEST(DistanceMatrix, BothOrderingsComputed) {
  const std::vector<CorpusObject> c = {text_object("a", "a", 2000, 1), text_object("b", "b", 500, 2)};
  const auto m = build_distance_matrix(c, Measure::ncd, Codec::deflate);
  ASSERT_EQ(m.values.rows(), 2u);
  EXPECT_EQ(m.values(0, 1), ncd(c[0], c[1], Codec::deflate));
  EXPECT_EQ(m.values(1, 0), ncd(c[1], c[0], Codec::deflate));
}

TEST(DistanceMatrix, WorkerCountDoesNotChangeValues) {
  std::vector<CorpusObject> c;
  for (std::uint64_t i = 0; i < 12; ++i)
    c.push_back(text_object("o" + std::to_string(i), i % 3 ? "a" : "b", 600 + 37 * i, i));
  for (auto measure : {Measure::ncd, Measure::nrc}) {
    const Codec codec = measure == Measure::ncd ? Codec::lzma : Codec::rlz;
    Matrix seq(12, 12);
    for (std::size_t i = 0; i < 12; ++i)
      for (std::size_t j = 0; j < 12; ++j)
        seq(i, j) = measure == Measure::ncd ? ncd(c[i], c[j], codec) : nrc(c[i], c[j]);
    for (std::size_t workers : {1u, 2u, 8u}) {
      const auto m = build_distance_matrix(c, measure, codec, workers);
      EXPECT_EQ(m.values.data(), seq.data()) << workers;
    }
  }
}

TEST(DistanceMatrix, CodecFamilyChecked) {
  const std::vector<CorpusObject> c = {text_object("a", "a", 100, 1), text_object("b", "b", 100, 2)};
  EXPECT_THROW(build_distance_matrix(c, Measure::nrc, Codec::deflate), Error);
  EXPECT_THROW(build_distance_matrix(c, Measure::ncd, Codec::rlz), Error);
}

TEST(Hex, Examples) {
  const Bytes in = {0x00, 0xff};
  const Bytes out = hex_encode(in);
  EXPECT_EQ(std::string(out.begin(), out.end()), "00ff");
  EXPECT_TRUE(hex_encode(Bytes{}).empty());
}

TEST(Hex, RoundTrip) {
  Rng rng(3);
  const auto x = oracle::random_bytes(1024, rng);
  EXPECT_EQ(hex_decode(hex_encode(x)), x);
}

TEST(RowStats, ConstantRowHitsTheFloor) {
  const std::vector<double> row(10, 0.5);
  const auto s = population_stats(row);
  EXPECT_DOUBLE_EQ(s.mean, 0.5);
  EXPECT_EQ(s.std, kStdFloor);
}

TEST(RowStats, PopulationStd) {
  const std::vector<double> row = {0.2, 0.4, 0.6};
  const auto s = population_stats(row);
  EXPECT_NEAR(s.mean, 0.4, 1e-12);
  EXPECT_NEAR(s.std, 0.163299316, 1e-9);
}

TEST(RowStats, ProvenanceAndSelfExclusion) {
  Matrix v(4, 4);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) v(i, j) = i == j ? 100.0 : static_cast<double>(j);
  const auto m = nrc_matrix(v);
  const auto s = row_stats_from_matrix(m, m.ids, StatsProvenance::external);
  EXPECT_EQ(s.provenance, StatsProvenance::external);
  // Row 0 sees columns 1..3 only.
  EXPECT_NEAR(s.rows.at("o0").mean, 2.0, 1e-12);
}

TEST(RowStats, MatrixAndCorpusRoutesAgree) {
  std::vector<CorpusObject> c;
  for (std::uint64_t i = 0; i < 6; ++i) c.push_back(text_object("o" + std::to_string(i), "a", 400, i));
  const auto m = build_distance_matrix(c, Measure::nrc, Codec::rlz);
  const auto a = row_stats_from_matrix(m, m.ids, StatsProvenance::pipeline);
  const auto b = compute_row_stats(c, c, StatsProvenance::pipeline);
  for (const auto& id : m.ids) {
    EXPECT_NEAR(a.rows.at(id).mean, b.rows.at(id).mean, 1e-12);
    EXPECT_NEAR(a.rows.at(id).std, b.rows.at(id).std, 1e-12);
  }
}

TEST(Standardize, PipelineStatsGiveZeroMeanUnitStd) {
  Matrix v(1, 3);
  v(0, 0) = 1;
  v(0, 1) = 2;
  v(0, 2) = 3;
  auto m = nrc_matrix(v);
  m.ids = {"x"};
  m.labels = {"a"};
  RowStats s;
  s.rows["x"] = population_stats(v.row(0));
  const auto z = standardize_rows(m, s);
  const auto st = population_stats(z.values.row(0));
  EXPECT_NEAR(st.mean, 0.0, 1e-9);
  EXPECT_NEAR(st.std, 1.0, 1e-9);
  EXPECT_EQ(z.measure, Measure::nrc_standardized);
}

TEST(Standardize, ExternalStats) {
  const std::vector<double> row = {1, 2, 3};
  EXPECT_EQ(standardize_values(row, {2.0, 1.0}), (std::vector<double>{-1, 0, 1}));
}

TEST(Standardize, RestandardizingIsRejected) {
  Rng rng(1);
  auto m = nrc_matrix(oracle::random_distances(4, rng));
  const auto s = row_stats_from_matrix(m, m.ids, StatsProvenance::pipeline);
  const auto z = standardize_rows(m, s);
  try {
    (void)standardize_rows(z, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::measure_mismatch);
  }
  m.measure = Measure::ncd;
  EXPECT_THROW(standardize_rows(m, s), Error);
}

TEST(Standardize, MissingRowStats) {
  Rng rng(1);
  const auto m = nrc_matrix(oracle::random_distances(3, rng));
  try {
    (void)standardize_rows(m, RowStats{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::missing_stats);
  }
}

TEST(MatrixIo, CsvRoundTripIsExact) {
  Rng rng(9);
  auto m = nrc_matrix(oracle::random_distances(5, rng));
  m.row_stats = row_stats_from_matrix(m, m.ids, StatsProvenance::external);
  const auto dir = std::filesystem::temp_directory_path() / "ctxsteer_matrix_io";
  std::filesystem::create_directories(dir);
  save_matrix(m, dir / "m.csv");
  const auto back = load_matrix(dir / "m.csv");
  EXPECT_EQ(back.ids, m.ids);
  EXPECT_EQ(back.labels, m.labels);
  EXPECT_EQ(back.values.data(), m.values.data());
  EXPECT_EQ(back.measure, m.measure);
  ASSERT_TRUE(back.row_stats.has_value());
  EXPECT_EQ(*back.row_stats, *m.row_stats);
  std::filesystem::remove_all(dir);
}
