#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ctxsteer/error.hpp"

namespace ctxsteer {

/// Sorted distinct labels <-> dense class indices.
class LabelEncoder {
 public:
  LabelEncoder() = default;
  explicit LabelEncoder(std::span<const std::string> labels) {
    std::set<std::string> s(labels.begin(), labels.end());
    classes_.assign(s.begin(), s.end());
  }

  std::size_t size() const noexcept { return classes_.size(); }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  const std::string& decode(std::size_t c) const { return classes_.at(c); }

  std::size_t encode(const std::string& label) const {
    auto it = std::lower_bound(classes_.begin(), classes_.end(), label);
    require(it != classes_.end() && *it == label, Errc::invalid_input, "unknown label '" + label + "'");
    return static_cast<std::size_t>(it - classes_.begin());
  }

  std::vector<std::size_t> encode(std::span<const std::string> labels) const {
    std::vector<std::size_t> out;
    out.reserve(labels.size());
    for (const auto& l : labels) out.push_back(encode(l));
    return out;
  }

 private:
  std::vector<std::string> classes_;
};

/// Unweighted mean of per-class F1 over every label seen in either vector.
/// A class with no true and no predicted samples cannot occur; a class with
/// zero precision and recall contributes 0.
inline double macro_f1(std::span<const std::string> truth, std::span<const std::string> predicted) {
  require(truth.size() == predicted.size() && !truth.empty(), Errc::dimension_error,
          "macro_f1 needs equally sized, non-empty label vectors");
  std::map<std::string, std::size_t> tp, fp, fn;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    tp[truth[i]];
    tp[predicted[i]];
    if (truth[i] == predicted[i]) {
      ++tp[truth[i]];
    } else {
      ++fp[predicted[i]];
      ++fn[truth[i]];
    }
  }
  double sum = 0.0;
  for (const auto& [label, t] : tp) {
    const double denom = 2.0 * static_cast<double>(t) + static_cast<double>(fp[label] + fn[label]);
    sum += denom > 0.0 ? 2.0 * static_cast<double>(t) / denom : 0.0;
  }
  return sum / static_cast<double>(tp.size());
}

}  // namespace ctxsteer
