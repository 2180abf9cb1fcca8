#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lcfusion/error.hpp"
#include "lcfusion/parallel.hpp"
#include "lcfusion/regularize.hpp"

namespace lcfusion {

// Label value reserved for "no data". Limits usable classes to 255.
inline constexpr std::uint8_t kNoData = 255;
inline constexpr std::size_t kMaxClasses = 255;

class GridShape {
 public:
  GridShape() = default;

  GridShape(std::size_t width, std::size_t height, std::vector<std::string> class_names)
      : width_(width), height_(height), class_names_(std::move(class_names)) {
    detail::require(width_ >= 1 && height_ >= 1, "grid width and height must be at least 1");
    detail::require(class_names_.size() >= 2, "at least two classes are required");
    detail::require(class_names_.size() <= kMaxClasses, "at most 255 classes are supported");
    std::set<std::string> seen;
    for (const auto& name : class_names_) {
      detail::require(!name.empty(), "class names must be non-empty");
      detail::require(seen.insert(name).second, "duplicate class name '" + name + "'");
    }
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t n_classes() const noexcept { return class_names_.size(); }
  std::size_t pixel_count() const noexcept { return width_ * height_; }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }

  bool operator==(const GridShape&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::vector<std::string> class_names_;
};

// Index of the largest component; ties resolve to the lowest index.
inline std::size_t argmax(std::span<const double> v) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < v.size(); ++c) {
    if (v[c] > v[best]) {
      best = c;
    }
  }
  return best;
}

// H x W x C class-probability stack. Values are pixel-interleaved in memory
// (pixel i occupies [i*C, (i+1)*C)) and regularized on construction.
class ProbabilityRaster {
 public:
  ProbabilityRaster(GridShape shape, std::vector<double> values, double epsilon = kDefaultEpsilon)
      : shape_(std::move(shape)), values_(std::move(values)) {
    const std::size_t c = shape_.n_classes();
    detail::require(values_.size() == shape_.pixel_count() * c,
                    "dimension mismatch: probability values do not match grid shape");
    for (std::size_t i = 0; i < shape_.pixel_count(); ++i) {
      regularize_in_place(std::span<double>(values_.data() + i * c, c), epsilon);
    }
  }

  const GridShape& shape() const noexcept { return shape_; }
  std::span<const double> pixel(std::size_t i) const noexcept {
    return {values_.data() + i * shape_.n_classes(), shape_.n_classes()};
  }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  GridShape shape_;
  std::vector<double> values_;
};

class LabelRaster {
 public:
  LabelRaster(GridShape shape, std::vector<std::uint8_t> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    detail::require(values_.size() == shape_.pixel_count(),
                    "dimension mismatch: label values do not match grid shape");
    for (std::uint8_t v : values_) {
      detail::require(v == kNoData || v < shape_.n_classes(), "label value out of class range");
    }
  }

  const GridShape& shape() const noexcept { return shape_; }
  std::uint8_t operator[](std::size_t i) const noexcept { return values_[i]; }
  std::uint8_t at(std::size_t row, std::size_t col) const noexcept {
    return values_[row * shape_.width() + col];
  }
  const std::vector<std::uint8_t>& values() const noexcept { return values_; }

  bool operator==(const LabelRaster&) const = default;

 private:
  GridShape shape_;
  std::vector<std::uint8_t> values_;
};

// Per-pixel Shannon entropy in bits, bounded by log2(C).
class EntropyRaster {
 public:
  EntropyRaster(GridShape shape, std::vector<double> values)
      : shape_(std::move(shape)), values_(std::move(values)) {
    detail::require(values_.size() == shape_.pixel_count(),
                    "dimension mismatch: entropy values do not match grid shape");
    const double upper = std::log2(static_cast<double>(shape_.n_classes()));
    for (double v : values_) {
      detail::require(v >= 0.0 && v <= upper, "entropy value outside [0, log2(C)]");
    }
  }

  const GridShape& shape() const noexcept { return shape_; }
  double operator[](std::size_t i) const noexcept { return values_[i]; }
  const std::vector<double>& values() const noexcept { return values_; }

 private:
  GridShape shape_;
  std::vector<double> values_;
};

inline LabelRaster hard_classify(const ProbabilityRaster& p) {
  std::vector<std::uint8_t> labels(p.shape().pixel_count());
  parallel_for(labels.size(), [&](std::size_t i) {
    labels[i] = static_cast<std::uint8_t>(argmax(p.pixel(i)));
  });
  return LabelRaster(p.shape(), std::move(labels));
}

}  // namespace lcfusion
