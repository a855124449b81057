#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ctxsteer {

enum class Errc {
  invalid_input,
  wrong_codec_family,
  codec_error,
  insufficient_references,
  missing_stats,
  measure_mismatch,
  dimension_error,
  invalid_partition,
  invalid_distance,
  too_few_leaves,
  undefined_silhouette,
  invalid_count,
  incomplete_row,
  class_too_small,
  invalid_fold,
  degenerate_labels,
  missing_fragments,
  empty_class,
  io_error,
};

constexpr std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::invalid_input: return "InvalidInput";
    case Errc::wrong_codec_family: return "WrongCodecFamily";
    case Errc::codec_error: return "CodecError";
    case Errc::insufficient_references: return "InsufficientReferences";
    case Errc::missing_stats: return "MissingStats";
    case Errc::measure_mismatch: return "MeasureMismatch";
    case Errc::dimension_error: return "DimensionError";
    case Errc::invalid_partition: return "InvalidPartition";
    case Errc::invalid_distance: return "InvalidDistance";
    case Errc::too_few_leaves: return "TooFewLeaves";
    case Errc::undefined_silhouette: return "UndefinedSilhouette";
    case Errc::invalid_count: return "InvalidCount";
    case Errc::incomplete_row: return "IncompleteRow";
    case Errc::class_too_small: return "ClassTooSmall";
    case Errc::invalid_fold: return "InvalidFold";
    case Errc::degenerate_labels: return "DegenerateLabels";
    case Errc::missing_fragments: return "MissingFragments";
    case Errc::empty_class: return "EmptyClass";
    case Errc::io_error: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the `Errc` kinds so
/// callers (and the CLI's error record) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& message) { throw Error(code, message); }

inline void require(bool condition, Errc code, const std::string& message) {
  if (!condition) fail(code, message);
}

}  // namespace ctxsteer
