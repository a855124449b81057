#pragma once

// Compressed-size oracles for the general-purpose codecs.
//
// Fixed settings (absolute sizes are only meaningful relative to these):
//   deflate  zlib stream, level 9
//   bzip2    bzip2 stream, block size 9 (900 kB), work factor 30
//   lzma     .lzma (alone) container, preset 6, dictionary clamped to the
//            input size rounded up to a power of two (min 4 KiB); the clamp
//            does not change the match set because the window already spans
//            the whole input.

#include <algorithm>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <boost/iostreams/filter/bzip2.hpp>
#include <boost/iostreams/filtering_stream.hpp>
#include <lzma.h>
#include <zlib.h>

#include "ctxsteer/error.hpp"

namespace ctxsteer {

using ByteView = std::span<const std::uint8_t>;
using Bytes = std::vector<std::uint8_t>;

inline ByteView as_bytes(std::string_view s) noexcept {
  return {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()};
}

inline Bytes to_bytes(std::string_view s) { return {s.begin(), s.end()}; }

enum class Codec { deflate, bzip2, lzma, rlz };

constexpr std::string_view to_string(Codec c) noexcept {
  switch (c) {
    case Codec::deflate: return "deflate";
    case Codec::bzip2: return "bzip2-class";
    case Codec::lzma: return "lzma";
    case Codec::rlz: return "rlz";
  }
  return "?";
}

inline Codec parse_codec(std::string_view s) {
  if (s == "deflate" || s == "zlib" || s == "deflate-class") return Codec::deflate;
  if (s == "bzip2-class" || s == "bzip2" || s == "bz2" || s == "block-sort-class") return Codec::bzip2;
  if (s == "lzma" || s == "lzma-class") return Codec::lzma;
  if (s == "rlz" || s == "rlz-relative") return Codec::rlz;
  fail(Errc::invalid_input, "unknown codec '" + std::string(s) + "'");
}

constexpr bool is_general_purpose(Codec c) noexcept { return c != Codec::rlz; }

namespace detail {

inline std::size_t deflate_size(ByteView data) {
  uLongf bound = compressBound(static_cast<uLong>(data.size()));
  std::vector<Bytef> out(bound);
  const int rc = compress2(out.data(), &bound, data.data(), static_cast<uLong>(data.size()), 9);
  require(rc == Z_OK, Errc::codec_error, "zlib compress2 returned " + std::to_string(rc));
  return bound;
}

struct CountingSink {
  using char_type = char;
  using category = boost::iostreams::sink_tag;
  std::size_t* count;
  std::streamsize write(const char*, std::streamsize n) {
    *count += static_cast<std::size_t>(n);
    return n;
  }
};

inline std::size_t bzip2_size(ByteView data) {
  namespace io = boost::iostreams;
  std::size_t count = 0;
  try {
    io::filtering_ostream out;
    out.push(io::bzip2_compressor(io::bzip2_params(9)));
    out.push(CountingSink{&count});
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    out.reset();
  } catch (const std::exception& e) {
    fail(Errc::codec_error, std::string("bzip2: ") + e.what());
  }
  return count;
}

inline std::size_t lzma_size(ByteView data) {
  lzma_options_lzma opt;
  require(!lzma_lzma_preset(&opt, 6), Errc::codec_error, "lzma preset unsupported");
  std::uint32_t dict = 4096;
  while (dict < data.size() && dict < opt.dict_size) dict <<= 1;
  opt.dict_size = dict;

  lzma_stream strm = LZMA_STREAM_INIT;
  if (lzma_alone_encoder(&strm, &opt) != LZMA_OK) fail(Errc::codec_error, "lzma encoder init failed");
  Bytes out(data.size() + data.size() / 2 + 4096);
  strm.next_in = data.data();
  strm.avail_in = data.size();
  std::size_t total = 0;
  lzma_ret rc;
  do {
    strm.next_out = out.data();
    strm.avail_out = out.size();
    rc = lzma_code(&strm, LZMA_FINISH);
    total += out.size() - strm.avail_out;
  } while (rc == LZMA_OK);
  lzma_end(&strm);
  require(rc == LZMA_STREAM_END, Errc::codec_error, "lzma encode failed (" + std::to_string(rc) + ")");
  return total;
}

}  // namespace detail

/// C(x): compressed size in bytes under a general-purpose codec.
inline std::size_t compressed_size(ByteView data, Codec codec) {
  require(is_general_purpose(codec), Errc::wrong_codec_family,
          "compressed_size needs a general-purpose codec, got rlz");
  require(!data.empty(), Errc::invalid_input, "cannot compress an empty sequence");
  switch (codec) {
    case Codec::deflate: return detail::deflate_size(data);
    case Codec::bzip2: return detail::bzip2_size(data);
    case Codec::lzma: return detail::lzma_size(data);
    case Codec::rlz: break;
  }
  fail(Errc::wrong_codec_family, "unreachable codec");
}

/// C(xy): x immediately followed by y, no separator.
inline std::size_t concat_compressed_size(ByteView x, ByteView y, Codec codec) {
  require(is_general_purpose(codec), Errc::wrong_codec_family,
          "concat_compressed_size needs a general-purpose codec, got rlz");
  require(!x.empty() && !y.empty(), Errc::invalid_input, "concatenation operands must be non-empty");
  Bytes joined;
  joined.reserve(x.size() + y.size());
  joined.insert(joined.end(), x.begin(), x.end());
  joined.insert(joined.end(), y.begin(), y.end());
  return compressed_size(joined, codec);
}

}  // namespace ctxsteer
