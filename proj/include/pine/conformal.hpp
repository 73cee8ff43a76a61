#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "pine/error.hpp"

namespace pine {

/// Score threshold of the in-distribution region. The infinite value is a
/// distinguished sentinel: every score is inside and encoders add nothing.
class Tau {
 public:
  Tau() = default;
  static Tau infinite() { return Tau(); }
  static Tau finite(double v) {
    if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "finite threshold expected");
    Tau t;
    t.value_ = v;
    t.infinite_ = false;
    return t;
  }

  bool is_infinite() const noexcept { return infinite_; }
  double value() const noexcept { return infinite_ ? std::numeric_limits<double>::infinity() : value_; }

  /// Slack that absorbs summation-order differences between evaluators.
  double slack() const noexcept { return infinite_ ? 0.0 : 1e-9 * (1.0 + std::abs(value_)); }

  bool contains(double score) const noexcept { return infinite_ || score <= value_ + slack(); }

  bool operator==(const Tau&) const = default;

 private:
  double value_ = 0.0;
  bool infinite_ = true;
};

inline nlohmann::json tau_to_json(const Tau& t) {
  if (t.is_infinite()) return "+inf";
  return t.value();
}

inline Tau tau_from_json(const nlohmann::json& j) {
  if (j.is_string() && j.get<std::string>() == "+inf") return Tau::infinite();
  if (!j.is_number()) throw Error(Errc::SchemaError, "tau must be a number or \"+inf\"");
  return Tau::finite(j.get<double>());
}

struct CalibrationResult {
  double alpha = 0.0;
  std::size_t n = 0;
  std::size_t k = 0;  // 1-based order index; n + 1 means tau = +inf
  Tau tau;
  std::vector<double> sorted_scores;
};

/// Split-conformal threshold: the k-th smallest calibration score with
/// k = ceil((n + 1)(1 - alpha)); k = n + 1 gives the infinite threshold.
inline CalibrationResult calibrate(std::span<const double> scores, double alpha) {
  if (scores.empty()) throw Error(Errc::EmptyCalibrationSet, "calibration set is empty");
  if (!(alpha > 0.0 && alpha < 1.0)) throw Error(Errc::AlphaOutOfRange, "alpha must lie in (0, 1)");
  for (double s : scores)
    if (!std::isfinite(s)) throw Error(Errc::InvalidArgument, "calibration scores must be finite");
  CalibrationResult r;
  r.alpha = alpha;
  r.n = scores.size();
  r.sorted_scores.assign(scores.begin(), scores.end());
  std::stable_sort(r.sorted_scores.begin(), r.sorted_scores.end());
  // The guard keeps products such as 5 * 0.8 from rounding up past an integer.
  const double raw = std::ceil(static_cast<double>(r.n + 1) * (1.0 - alpha) - 1e-9);
  r.k = static_cast<std::size_t>(std::clamp(raw, 1.0, static_cast<double>(r.n + 1)));
  r.tau = r.k == r.n + 1 ? Tau::infinite() : Tau::finite(r.sorted_scores[r.k - 1]);
  return r;
}

inline nlohmann::json calibration_to_json(const CalibrationResult& r) {
  return {{"alpha", r.alpha}, {"n", r.n}, {"k", r.k}, {"tau", tau_to_json(r.tau)}};
}

}  // namespace pine
