#pragma once

// MAP estimation of per-investigator concentration parameters kappa_j for
//   p_ij ~ Dirichlet(kappa_j theta_i),  theta_i ~ Dirichlet(alpha),
//   kappa_j ~ Gamma(shape 2, rate 1)
// by block coordinate ascent over a seeded pixel subsample.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <ranges>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/trigamma.hpp>

#include "lcfusion/error.hpp"
#include "lcfusion/fusion.hpp"
#include "lcfusion/grid.hpp"
#include "lcfusion/parallel.hpp"
#include "lcfusion/rng.hpp"
#include "lcfusion/text.hpp"

namespace lcfusion {

inline constexpr double kKappaMin = 1e-3;
inline constexpr double kKappaMax = 1e3;
inline constexpr std::size_t kDefaultWeightSubsample = 10000;
inline constexpr std::size_t kMinWeightSubsample = 100;

struct WeightEstimate {
  std::vector<double> kappa;
  double log_posterior = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
  // Joint log-posterior after initialization and after every outer iteration.
  std::vector<double> objective_trace;
  // Pixels the objective was evaluated on, and theta at those pixels.
  std::vector<std::size_t> sample_pixels;
  std::vector<double> theta;
};

inline double dirichlet_log_density(std::span<const double> p, std::span<const double> alpha) {
  detail::require(p.size() == alpha.size() && !p.empty(), "density arguments must have equal non-zero length");
  double alpha_sum = 0.0;
  double result = 0.0;
  for (std::size_t c = 0; c < p.size(); ++c) {
    detail::require(alpha[c] > 0.0 && std::isfinite(alpha[c]), "Dirichlet parameters must be positive");
    detail::require(p[c] > 0.0, "Dirichlet support requires strictly positive probabilities");
    alpha_sum += alpha[c];
    result += (alpha[c] - 1.0) * std::log(p[c]) - std::lgamma(alpha[c]);
  }
  return result + std::lgamma(alpha_sum);
}

// Gamma(shape, rate) log density.
inline double gamma_log_density(double x, double shape, double rate) {
  detail::require(x > 0.0 && shape > 0.0 && rate > 0.0, "gamma density arguments must be positive");
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

namespace detail {

// Sufficient statistics of the subsampled objective.
class KappaObjective {
 public:
  KappaObjective(std::vector<const ProbabilityRaster*> maps, std::vector<std::size_t> pixels,
                 std::vector<double> alpha)
      : maps_(std::move(maps)),
        pixels_(std::move(pixels)),
        alpha_(std::move(alpha)),
        n_maps_(maps_.size()),
        n_(pixels_.size()),
        c_(alpha_.size()),
        p_(n_maps_ * n_ * c_),
        logp_(n_maps_ * n_ * c_),
        sum_logp_(n_maps_, 0.0) {
    for (std::size_t j = 0; j < n_maps_; ++j) {
      for (std::size_t s = 0; s < n_; ++s) {
        const auto px = maps_[j]->pixel(pixels_[s]);
        for (std::size_t k = 0; k < c_; ++k) {
          p_[(j * n_ + s) * c_ + k] = px[k];
          logp_[(j * n_ + s) * c_ + k] = std::log(px[k]);
          sum_logp_[j] += logp_[(j * n_ + s) * c_ + k];
        }
      }
    }
    alpha_sum_ = std::accumulate(alpha_.begin(), alpha_.end(), 0.0);
    log_norm_prior_ = std::lgamma(alpha_sum_);
    for (double a : alpha_) {
      log_norm_prior_ -= std::lgamma(a);
    }
  }

  std::size_t n_maps() const { return n_maps_; }
  std::size_t n_pixels() const { return n_; }
  std::size_t n_classes() const { return c_; }

  // Posterior-mean theta at the sampled pixels for the given weights.
  std::vector<double> closed_form_theta(const std::vector<double>& kappa) const {
    std::vector<double> theta(n_ * c_);
    for (std::size_t s = 0; s < n_; ++s) {
      double total = 0.0;
      for (std::size_t k = 0; k < c_; ++k) {
        double v = alpha_[k];
        for (std::size_t j = 0; j < n_maps_; ++j) {
          v += kappa[j] * p_[(j * n_ + s) * c_ + k];
        }
        theta[s * c_ + k] = v;
        total += v;
      }
      for (std::size_t k = 0; k < c_; ++k) {
        theta[s * c_ + k] /= total;
      }
    }
    return theta;
  }

  double theta_cross_logp(std::size_t j, const std::vector<double>& theta) const {
    double s = 0.0;
    for (std::size_t i = 0; i < n_ * c_; ++i) {
      s += theta[i] * logp_[j * n_ * c_ + i];
    }
    return s;
  }

  // Log likelihood of investigator j plus its Gamma(2,1) prior.
  double investigator_term(std::size_t j, double kappa, const std::vector<double>& theta, double cross) const {
    double s = static_cast<double>(n_) * std::lgamma(kappa);
    for (double t : theta) {
      s -= std::lgamma(kappa * t);
    }
    return s + kappa * cross - sum_logp_[j] + gamma_log_density(kappa, 2.0, 1.0);
  }

  double theta_prior_term(const std::vector<double>& theta) const {
    double s = static_cast<double>(n_) * log_norm_prior_;
    for (std::size_t i = 0; i < n_ * c_; ++i) {
      s += (alpha_[i % c_] - 1.0) * std::log(theta[i]);
    }
    return s;
  }

  double joint(const std::vector<double>& kappa, const std::vector<double>& theta) const {
    std::vector<double> terms(n_maps_);
    parallel_for(n_maps_, [&](std::size_t j) {
      terms[j] = investigator_term(j, kappa[j], theta, theta_cross_logp(j, theta));
    });
    return std::accumulate(terms.begin(), terms.end(), theta_prior_term(theta));
  }

  // First and second derivative of investigator_term with respect to
  // u = log(kappa).
  std::pair<double, double> log_kappa_derivatives(double kappa, const std::vector<double>& theta,
                                                  double cross) const {
    double h1 = 0.0;
    double h2 = 0.0;
    for (double t : theta) {
      const double x = kappa * t;
      h1 += t * boost::math::digamma(x);
      h2 += t * t * boost::math::trigamma(x);
    }
    const double n = static_cast<double>(n_);
    const double g1 = n * boost::math::digamma(kappa) - h1 + cross + 1.0 / kappa - 1.0;
    const double g2 = n * boost::math::trigamma(kappa) - h2 - 1.0 / (kappa * kappa);
    return {kappa * g1, kappa * g1 + kappa * kappa * g2};
  }

  // Maximizes investigator_term over kappa in [kKappaMin, kKappaMax] by
  // Newton steps on log(kappa), falling back to bisection whenever a step
  // leaves the bracket or the curvature is not negative.
  double maximize_kappa(std::size_t j, double start, const std::vector<double>& theta) const {
    const double cross = theta_cross_logp(j, theta);
    double lo = std::log(kKappaMin);
    double hi = std::log(kKappaMax);
    double u = std::clamp(std::log(start), lo, hi);
    auto [d1, d2] = log_kappa_derivatives(std::exp(u), theta, cross);
    if (d1 > 0.0) {
      lo = u;
      const auto [e1, e2] = log_kappa_derivatives(kKappaMax, theta, cross);
      if (e1 >= 0.0) {
        return kKappaMax;
      }
    } else if (d1 < 0.0) {
      hi = u;
      const auto [e1, e2] = log_kappa_derivatives(kKappaMin, theta, cross);
      if (e1 <= 0.0) {
        return kKappaMin;
      }
    } else {
      return std::exp(u);
    }
    for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
      double next = (d2 < 0.0) ? u - d1 / d2 : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) {
        next = 0.5 * (lo + hi);
      }
      const double step = next - u;
      u = next;
      std::tie(d1, d2) = log_kappa_derivatives(std::exp(u), theta, cross);
      if (d1 > 0.0) {
        lo = u;
      } else if (d1 < 0.0) {
        hi = u;
      } else {
        break;
      }
      if (std::abs(step) < 1e-10) {
        break;
      }
    }
    return std::exp(u);
  }

 private:
  std::vector<const ProbabilityRaster*> maps_;
  std::vector<std::size_t> pixels_;
  std::vector<double> alpha_;
  std::size_t n_maps_;
  std::size_t n_;
  std::size_t c_;
  std::vector<double> p_;
  std::vector<double> logp_;
  std::vector<double> sum_logp_;
  double alpha_sum_ = 0.0;
  double log_norm_prior_ = 0.0;
};

}  // namespace detail

// `subsample` is a pixel count (>= 100); nullopt evaluates the full grid,
// as does any count at or above the grid size. `seed` only drives the
// subsample draw.
template <std::ranges::random_access_range Maps>
WeightEstimate estimate_weights(const Maps& maps, const FusionConfig& config,
                                std::optional<std::size_t> subsample = kDefaultWeightSubsample,
                                std::uint64_t seed = 0) {
  config.validate();
  detail::require(std::ranges::size(maps) >= 2, "weight inference requires at least two maps");
  detail::require(!subsample || *subsample >= kMinWeightSubsample,
                  "subsample too small: at least 100 pixels are required");
  const GridShape& shape = detail::common_shape(maps);
  std::vector<const ProbabilityRaster*> inputs;
  for (const auto& m : maps) {
    inputs.push_back(&detail::unwrap(m));
  }

  const std::size_t n = shape.pixel_count();
  std::vector<std::size_t> pixels(n);
  std::iota(pixels.begin(), pixels.end(), std::size_t{0});
  if (subsample && *subsample < n) {
    SplitMix64 engine(splitmix64(seed));
    pixels = sample_without_replacement(std::move(pixels), *subsample, engine);
    std::sort(pixels.begin(), pixels.end());
  }

  const std::size_t n_maps = inputs.size();
  detail::KappaObjective objective(inputs, pixels, config.alpha_for(shape.n_classes()));

  WeightEstimate est;
  est.kappa.assign(n_maps, 1.0);
  auto theta = objective.closed_form_theta(est.kappa);
  double current = objective.joint(est.kappa, theta);
  est.objective_trace.push_back(current);

  constexpr std::size_t kMaxOuter = 200;
  constexpr double kTolerance = 1e-6;
  for (std::size_t iter = 1; iter <= kMaxOuter; ++iter) {
    est.iterations = iter;

    // Kappa block: independent 1-D problems given theta.
    std::vector<double> proposed(n_maps);
    parallel_for(n_maps, [&](std::size_t j) { proposed[j] = objective.maximize_kappa(j, est.kappa[j], theta); });
    double max_change = 0.0;
    std::vector<double> kappa = est.kappa;
    for (std::size_t j = 0; j < n_maps; ++j) {
      max_change = std::max(max_change, std::abs(proposed[j] - kappa[j]) / kappa[j]);
      kappa[j] = proposed[j];
    }
    const double after_kappa = objective.joint(kappa, theta);
    if (after_kappa >= current) {
      est.kappa = std::move(kappa);
      current = after_kappa;
    } else {
      max_change = 0.0;
    }

    // Theta block: move toward the closed-form posterior mean, halving the
    // step until the joint objective does not decrease.
    const auto target = objective.closed_form_theta(est.kappa);
    double step = 1.0;
    for (int attempt = 0; attempt < 8; ++attempt, step *= 0.5) {
      std::vector<double> candidate(theta.size());
      for (std::size_t i = 0; i < theta.size(); ++i) {
        candidate[i] = theta[i] + step * (target[i] - theta[i]);
      }
      const double value = objective.joint(est.kappa, candidate);
      if (value >= current) {
        theta = std::move(candidate);
        current = value;
        break;
      }
    }
    est.objective_trace.push_back(current);

    if (max_change < kTolerance) {
      est.converged = true;
      break;
    }
  }
  est.log_posterior = current;
  est.sample_pixels = std::move(pixels);
  est.theta = std::move(theta);
  return est;
}

inline std::string weights_to_csv(const std::vector<std::string>& ids, const std::vector<double>& kappa) {
  detail::require(ids.size() == kappa.size(), "investigator id count does not match kappa count");
  std::string out = "investigator_id,kappa\n";
  for (std::size_t j = 0; j < ids.size(); ++j) {
    out += ids[j] + "," + format_double(kappa[j]) + "\n";
  }
  return out;
}

inline void save_weights_csv(const std::filesystem::path& path, const std::vector<std::string>& ids,
                             const std::vector<double>& kappa) {
  write_text_file(path, weights_to_csv(ids, kappa));
}

struct WeightTable {
  std::vector<std::string> ids;
  std::vector<double> kappa;
};

inline WeightTable load_weights_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::string line;
  detail::require(static_cast<bool>(std::getline(in, line)), "empty weights file");
  detail::require(line == "investigator_id,kappa", "weights file must start with 'investigator_id,kappa'");
  WeightTable table;
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    const auto fields = split_csv_line(line);
    detail::require(fields.size() == 2, "malformed weights row '" + line + "'");
    const double k = parse_double(fields[1]);
    detail::require(k > 0.0 && std::isfinite(k), "weights must be positive");
    table.ids.push_back(fields[0]);
    table.kappa.push_back(k);
  }
  return table;
}

}  // namespace lcfusion
