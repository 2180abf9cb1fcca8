#pragma once

// Map-level Interspersion and Juxtaposition Index from rook-adjacency edge
// counts. Each pair of 4-neighbors with different classes adds one pixel side
// of edge between those classes.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <vector>

#include "lcfusion/grid.hpp"

namespace lcfusion {

class EdgeTable {
 public:
  explicit EdgeTable(std::size_t n_classes) : n_classes_(n_classes), edges_(n_classes * n_classes, 0) {}

  std::size_t n_classes() const noexcept { return n_classes_; }
  // Symmetric lookup; e(a, a) is always 0.
  std::uint64_t e(std::size_t a, std::size_t b) const noexcept {
    return a < b ? edges_[a * n_classes_ + b] : edges_[b * n_classes_ + a];
  }
  void add(std::size_t a, std::size_t b, std::uint64_t n = 1) noexcept {
    if (a > b) {
      std::swap(a, b);
    }
    edges_[a * n_classes_ + b] += n;
    total_ += n;
  }
  std::uint64_t total() const noexcept { return total_; }

  // Number of classes present in the map.
  std::size_t m = 0;

  bool operator==(const EdgeTable&) const = default;

 private:
  std::size_t n_classes_;
  std::vector<std::uint64_t> edges_;
  std::uint64_t total_ = 0;
};

inline EdgeTable edge_table(const LabelRaster& map) {
  const std::size_t w = map.shape().width();
  const std::size_t h = map.shape().height();
  EdgeTable table(map.shape().n_classes());
  std::vector<bool> present(map.shape().n_classes(), false);
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const auto v = map.at(r, c);
      if (v == kNoData) {
        continue;
      }
      present[v] = true;
      if (c + 1 < w) {
        const auto right = map.at(r, c + 1);
        if (right != kNoData && right != v) {
          table.add(v, right);
        }
      }
      if (r + 1 < h) {
        const auto below = map.at(r + 1, c);
        if (below != kNoData && below != v) {
          table.add(v, below);
        }
      }
    }
  }
  for (bool p : present) {
    table.m += p ? 1 : 0;
  }
  return table;
}

// nullopt when fewer than three classes are present or there are no edges.
inline std::optional<double> iji(const EdgeTable& table) {
  if (table.m < 3 || table.total() == 0) {
    return std::nullopt;
  }
  const double total = static_cast<double>(table.total());
  double sum = 0.0;
  for (std::size_t a = 0; a < table.n_classes(); ++a) {
    for (std::size_t b = a + 1; b < table.n_classes(); ++b) {
      const auto e = table.e(a, b);
      if (e > 0) {
        const double share = static_cast<double>(e) / total;
        sum -= share * std::log(share);
      }
    }
  }
  const double m = static_cast<double>(table.m);
  return sum / std::log(m * (m - 1.0) / 2.0) * 100.0;
}

inline std::optional<double> iji(const LabelRaster& map) { return iji(edge_table(map)); }

}  // namespace lcfusion
