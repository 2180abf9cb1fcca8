#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "lcfusion/grid.hpp"
#include "lcfusion/parallel.hpp"

namespace lcfusion {

// Shannon entropy in bits, with 0 log 0 = 0.
inline double shannon_entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double v : p) {
    if (v > 0.0) {
      h -= v * std::log2(v);
    }
  }
  return h;
}

inline EntropyRaster entropy_map(const ProbabilityRaster& p) {
  const double upper = std::log2(static_cast<double>(p.shape().n_classes()));
  std::vector<double> h(p.shape().pixel_count());
  parallel_for(h.size(), [&](std::size_t i) {
    // rounding can push a uniform vector a few ulps past the bound
    h[i] = std::clamp(shannon_entropy_bits(p.pixel(i)), 0.0, upper);
  });
  return EntropyRaster(p.shape(), std::move(h));
}

}  // namespace lcfusion
