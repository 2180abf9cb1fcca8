#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lcfusion/error.hpp"

namespace lcfusion {

inline constexpr double kDefaultEpsilon = 1e-10;

// Replaces exact zeros by epsilon and renormalizes in place so the vector
// lies strictly inside the simplex. Throws on negative, non-finite or
// all-zero input.
inline void regularize_in_place(std::span<double> p, double epsilon = kDefaultEpsilon) {
  detail::require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be a positive finite value");
  double sum = 0.0;
  bool any_positive = false;
  for (double v : p) {
    detail::require(std::isfinite(v), "probability vector contains NaN or Inf");
    detail::require(v >= 0.0, "probability vector contains a negative probability");
    any_positive = any_positive || v > 0.0;
  }
  detail::require(any_positive, "probability vector is all zero and cannot be normalized");
  for (double& v : p) {
    if (v == 0.0) {
      v = epsilon;
    }
    sum += v;
  }
  for (double& v : p) {
    v /= sum;
  }
}

inline std::vector<double> regularize(std::span<const double> p, double epsilon = kDefaultEpsilon) {
  std::vector<double> out(p.begin(), p.end());
  regularize_in_place(out, epsilon);
  return out;
}

}  // namespace lcfusion
