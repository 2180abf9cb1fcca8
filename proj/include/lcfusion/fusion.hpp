#pragma once

// Closed-form Dirichlet fusion of investigator probability maps.
//
// Each investigator's probability vector acts as a fractional pseudo-count,
// so with prior Dirichlet(alpha) the per-pixel posterior is
//   Dirichlet(alpha + sum_j w_j p_ij)
// and the fused probability is the posterior mean.

#include <cstddef>
#include <functional>
#include <numeric>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "lcfusion/error.hpp"
#include "lcfusion/grid.hpp"
#include "lcfusion/parallel.hpp"
#include "lcfusion/regularize.hpp"

namespace lcfusion {

struct FusionConfig {
  double epsilon = kDefaultEpsilon;
  std::vector<double> prior_alpha;  // empty means all ones
  std::vector<double> weights;      // empty means all ones

  std::vector<double> alpha_for(std::size_t n_classes) const {
    if (prior_alpha.empty()) {
      return std::vector<double>(n_classes, 1.0);
    }
    detail::require(prior_alpha.size() == n_classes, "prior_alpha length does not match class count");
    return prior_alpha;
  }

  std::vector<double> weights_for(std::size_t n_maps) const {
    if (weights.empty()) {
      return std::vector<double>(n_maps, 1.0);
    }
    detail::require(weights.size() == n_maps, "weight-count mismatch: " + std::to_string(weights.size()) +
                                                  " weights for " + std::to_string(n_maps) + " maps");
    return weights;
  }

  void validate() const {
    detail::require(epsilon > 0.0, "epsilon must be positive");
    for (double a : prior_alpha) {
      detail::require(a > 0.0 && std::isfinite(a), "prior_alpha components must be positive");
    }
    for (double w : weights) {
      detail::require(w > 0.0 && std::isfinite(w), "weights must be positive");
    }
  }
};

class PosteriorField {
 public:
  PosteriorField(GridShape shape, std::vector<double> alpha_post)
      : shape_(std::move(shape)), alpha_(std::move(alpha_post)), mean_(alpha_.size()) {
    const std::size_t c = shape_.n_classes();
    detail::require(alpha_.size() == shape_.pixel_count() * c, "dimension mismatch in posterior field");
    for (std::size_t i = 0; i < shape_.pixel_count(); ++i) {
      const double* a = alpha_.data() + i * c;
      double total = 0.0;
      for (std::size_t k = 0; k < c; ++k) {
        detail::require(a[k] > 0.0, "posterior parameters must be positive");
        total += a[k];
      }
      for (std::size_t k = 0; k < c; ++k) {
        mean_[i * c + k] = a[k] / total;
      }
    }
  }

  const GridShape& shape() const noexcept { return shape_; }
  std::span<const double> alpha(std::size_t i) const noexcept {
    return {alpha_.data() + i * shape_.n_classes(), shape_.n_classes()};
  }
  std::span<const double> mean(std::size_t i) const noexcept {
    return {mean_.data() + i * shape_.n_classes(), shape_.n_classes()};
  }
  const std::vector<double>& alpha_values() const noexcept { return alpha_; }
  const std::vector<double>& mean_values() const noexcept { return mean_; }

  ProbabilityRaster mean_raster() const { return ProbabilityRaster(shape_, mean_); }

 private:
  GridShape shape_;
  std::vector<double> alpha_;
  std::vector<double> mean_;
};

namespace detail {

inline const ProbabilityRaster& unwrap(const ProbabilityRaster& r) { return r; }
inline const ProbabilityRaster& unwrap(const std::reference_wrapper<const ProbabilityRaster>& r) { return r.get(); }
inline const ProbabilityRaster& unwrap(const ProbabilityRaster* r) { return *r; }

template <typename Maps>
const GridShape& common_shape(const Maps& maps) {
  require(std::ranges::size(maps) >= 1, "fusion requires at least one input map");
  const GridShape& shape = unwrap(*std::ranges::begin(maps)).shape();
  for (const auto& m : maps) {
    require(unwrap(m).shape() == shape, "shape mismatch between input maps");
  }
  return shape;
}

}  // namespace detail

// Accepts any random-access range of ProbabilityRaster, reference_wrapper
// or pointer. Per-pixel sums run in input order in double precision.
template <std::ranges::random_access_range Maps>
PosteriorField fuse(const Maps& maps, const FusionConfig& config) {
  config.validate();
  const GridShape& shape = detail::common_shape(maps);
  const std::size_t n_maps = std::ranges::size(maps);
  const std::size_t c = shape.n_classes();
  const auto alpha = config.alpha_for(c);
  const auto weights = config.weights_for(n_maps);

  std::vector<const ProbabilityRaster*> inputs;
  inputs.reserve(n_maps);
  for (const auto& m : maps) {
    inputs.push_back(&detail::unwrap(m));
  }

  const std::size_t n = shape.pixel_count();
  std::vector<double> alpha_post(n * c);
  parallel_for(shape.height(), [&](std::size_t row) {
    for (std::size_t i = row * shape.width(); i < (row + 1) * shape.width(); ++i) {
      double* out = alpha_post.data() + i * c;
      for (std::size_t k = 0; k < c; ++k) {
        out[k] = alpha[k];
      }
      for (std::size_t j = 0; j < n_maps; ++j) {
        const double* p = inputs[j]->values().data() + i * c;
        for (std::size_t k = 0; k < c; ++k) {
          out[k] += weights[j] * p[k];
        }
      }
    }
  });
  return PosteriorField(shape, std::move(alpha_post));
}

inline LabelRaster fused_label_map(const PosteriorField& field) {
  std::vector<std::uint8_t> labels(field.shape().pixel_count());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    labels[i] = static_cast<std::uint8_t>(argmax(field.mean(i)));
  }
  return LabelRaster(field.shape(), std::move(labels));
}

}  // namespace lcfusion
