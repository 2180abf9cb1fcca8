#pragma once

// Confusion-matrix accuracy (overall, user's, producer's), stratified Monte
// Carlo validation and the statistics used to compare maps.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "lcfusion/error.hpp"
#include "lcfusion/grid.hpp"
#include "lcfusion/parallel.hpp"
#include "lcfusion/rng.hpp"
#include "lcfusion/text.hpp"

namespace lcfusion {

// counts[c][q]: pixels classified as c whose reference class is q.
class ConfusionMatrix {
 public:
  ConfusionMatrix(std::vector<std::string> class_names, std::vector<std::uint64_t> counts)
      : class_names_(std::move(class_names)), counts_(std::move(counts)) {
    detail::require(counts_.size() == class_names_.size() * class_names_.size(),
                    "confusion matrix must be C x C");
  }

  explicit ConfusionMatrix(std::vector<std::string> class_names)
      : ConfusionMatrix(class_names, std::vector<std::uint64_t>(class_names.size() * class_names.size(), 0)) {}

  std::size_t n_classes() const noexcept { return class_names_.size(); }
  const std::vector<std::string>& class_names() const noexcept { return class_names_; }
  std::uint64_t operator()(std::size_t classified, std::size_t reference) const noexcept {
    return counts_[classified * n_classes() + reference];
  }
  void add(std::size_t classified, std::size_t reference, std::uint64_t n = 1) {
    counts_[classified * n_classes() + reference] += n;
  }

  std::uint64_t total() const noexcept {
    std::uint64_t t = 0;
    for (auto v : counts_) {
      t += v;
    }
    return t;
  }
  std::uint64_t row_total(std::size_t c) const noexcept {
    std::uint64_t t = 0;
    for (std::size_t q = 0; q < n_classes(); ++q) {
      t += (*this)(c, q);
    }
    return t;
  }
  std::uint64_t column_total(std::size_t q) const noexcept {
    std::uint64_t t = 0;
    for (std::size_t c = 0; c < n_classes(); ++c) {
      t += (*this)(c, q);
    }
    return t;
  }
  std::uint64_t trace() const noexcept {
    std::uint64_t t = 0;
    for (std::size_t c = 0; c < n_classes(); ++c) {
      t += (*this)(c, c);
    }
    return t;
  }

 private:
  std::vector<std::string> class_names_;
  std::vector<std::uint64_t> counts_;
};

// UA/PA are nullopt when their denominator is zero.
struct AccuracyReport {
  double overall = 0.0;
  std::vector<std::optional<double>> users;
  std::vector<std::optional<double>> producers;
};

inline AccuracyReport accuracy_report(const ConfusionMatrix& m) {
  const auto total = m.total();
  detail::require(total > 0, "empty confusion matrix");
  AccuracyReport r;
  r.overall = static_cast<double>(m.trace()) / static_cast<double>(total);
  for (std::size_t c = 0; c < m.n_classes(); ++c) {
    const auto row = m.row_total(c);
    const auto col = m.column_total(c);
    const double hit = static_cast<double>(m(c, c));
    r.users.push_back(row ? std::optional<double>(hit / static_cast<double>(row)) : std::nullopt);
    r.producers.push_back(col ? std::optional<double>(hit / static_cast<double>(col)) : std::nullopt);
  }
  return r;
}

// Pixels where either map is NODATA are skipped.
inline ConfusionMatrix confusion(const LabelRaster& pred, const LabelRaster& ref,
                                 std::optional<std::span<const std::size_t>> sample_indices = std::nullopt) {
  detail::require(pred.shape() == ref.shape(), "shape mismatch between predicted and reference maps");
  ConfusionMatrix m(ref.shape().class_names());
  auto visit = [&](std::size_t i) {
    const auto p = pred[i];
    const auto q = ref[i];
    if (p != kNoData && q != kNoData) {
      m.add(p, q);
    }
  };
  const std::size_t n = ref.shape().pixel_count();
  if (sample_indices) {
    for (std::size_t i : *sample_indices) {
      detail::require(i < n, "sample index out of range");
      visit(i);
    }
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      visit(i);
    }
  }
  detail::require(m.total() > 0, "empty effective sample: no pixels with data in both maps");
  return m;
}

// Exactly per_class pixel indices for every class, grouped by class.
inline std::vector<std::size_t> stratified_sample(const LabelRaster& ref, std::size_t per_class, std::uint64_t seed,
                                                  bool with_replacement = false) {
  detail::require(per_class >= 1, "per_class must be at least 1");
  const std::size_t n_classes = ref.shape().n_classes();
  std::vector<std::vector<std::size_t>> pools(n_classes);
  for (std::size_t i = 0; i < ref.shape().pixel_count(); ++i) {
    if (ref[i] != kNoData) {
      pools[ref[i]].push_back(i);
    }
  }
  std::vector<std::size_t> out;
  out.reserve(per_class * n_classes);
  for (std::size_t c = 0; c < n_classes; ++c) {
    auto& pool = pools[c];
    const auto& name = ref.shape().class_names()[c];
    detail::require(!pool.empty(), "class '" + name + "' has no reference pixels");
    detail::require(with_replacement || pool.size() >= per_class,
                    "class '" + name + "' has only " + std::to_string(pool.size()) + " pixels, fewer than " +
                        std::to_string(per_class) + " requested without replacement");
    auto engine = keyed_engine(seed, c, 0x7374726174ULL);
    if (with_replacement) {
      for (std::size_t s = 0; s < per_class; ++s) {
        out.push_back(pool[uniform_index(engine, pool.size())]);
      }
    } else {
      const auto picked = sample_without_replacement(std::move(pool), per_class, engine);
      out.insert(out.end(), picked.begin(), picked.end());
    }
  }
  return out;
}

struct MonteCarloResult {
  std::size_t n_iterations = 0;
  std::size_t per_class_sample_size = 0;
  std::uint64_t seed = 0;
  std::vector<AccuracyReport> per_iteration;
};

// Stratified samples for iterations 0..n-1, iteration i seeded with seed+i.
// Independent of the predicted map, so several maps can share them.
inline std::vector<std::vector<std::size_t>> monte_carlo_samples(const LabelRaster& ref, std::size_t n_iterations,
                                                                 std::size_t per_class, std::uint64_t seed) {
  detail::require(n_iterations >= 1, "Monte Carlo requires at least one iteration");
  std::vector<std::vector<std::size_t>> samples(n_iterations);
  parallel_for(n_iterations, [&](std::size_t i) { samples[i] = stratified_sample(ref, per_class, seed + i); });
  return samples;
}

inline MonteCarloResult monte_carlo_assess(const LabelRaster& pred, const LabelRaster& ref,
                                           const std::vector<std::vector<std::size_t>>& samples,
                                           std::size_t per_class, std::uint64_t seed) {
  detail::require(!samples.empty(), "Monte Carlo requires at least one iteration");
  MonteCarloResult result;
  result.n_iterations = samples.size();
  result.per_class_sample_size = per_class;
  result.seed = seed;
  result.per_iteration.resize(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) {
    result.per_iteration[i] = accuracy_report(confusion(pred, ref, std::span<const std::size_t>(samples[i])));
  });
  return result;
}

inline MonteCarloResult monte_carlo_assess(const LabelRaster& pred, const LabelRaster& ref, std::size_t n_iterations,
                                           std::size_t per_class, std::uint64_t seed) {
  detail::require(pred.shape() == ref.shape(), "shape mismatch between predicted and reference maps");
  return monte_carlo_assess(pred, ref, monte_carlo_samples(ref, n_iterations, per_class, seed), per_class, seed);
}

// Columns: iter,oa,ua_<class>...,pa_<class>...; undefined values are empty.
inline std::string monte_carlo_csv(const MonteCarloResult& mc, const std::vector<std::string>& class_names) {
  std::string out = "iter,oa";
  for (const auto& n : class_names) {
    out += ",ua_" + n;
  }
  for (const auto& n : class_names) {
    out += ",pa_" + n;
  }
  out += "\n";
  for (std::size_t i = 0; i < mc.per_iteration.size(); ++i) {
    const auto& r = mc.per_iteration[i];
    out += std::to_string(i) + "," + format_double(r.overall);
    for (const auto& v : r.users) {
      out += "," + format_optional(v);
    }
    for (const auto& v : r.producers) {
      out += "," + format_optional(v);
    }
    out += "\n";
  }
  return out;
}

struct SampleSummary {
  std::optional<double> mean;
  std::optional<double> sd;
  std::size_t n = 0;
};

// Mean and sample standard deviation over defined values.
inline SampleSummary summarize(std::span<const std::optional<double>> values) {
  SampleSummary s;
  double sum = 0.0;
  for (const auto& v : values) {
    if (v) {
      sum += *v;
      ++s.n;
    }
  }
  if (s.n == 0) {
    return s;
  }
  s.mean = sum / static_cast<double>(s.n);
  if (s.n >= 2) {
    double ss = 0.0;
    for (const auto& v : values) {
      if (v) {
        ss += (*v - *s.mean) * (*v - *s.mean);
      }
    }
    s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  }
  return s;
}

struct TTestResult {
  double t = 0.0;
  double p = 1.0;
  std::size_t df = 0;
};

// Two-sided paired t-test on a - b. Identical samples (all differences
// zero) give t = 0, p = 1; a constant non-zero difference gives |t| = inf,
// p = 0.
inline TTestResult paired_t_test(std::span<const double> a, std::span<const double> b) {
  detail::require(a.size() == b.size(), "paired t-test requires equal-length samples");
  detail::require(a.size() >= 2, "paired t-test requires at least two pairs");
  const std::size_t n = a.size();
  double mean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += a[i] - b[i];
  }
  mean /= static_cast<double>(n);
  double ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i] - mean;
    ss += d * d;
  }
  TTestResult r;
  r.df = n - 1;
  const double se = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  if (se == 0.0) {
    if (mean == 0.0) {
      return r;
    }
    r.t = std::copysign(std::numeric_limits<double>::infinity(), mean);
    r.p = 0.0;
    return r;
  }
  r.t = mean / se;
  if (r.t == 0.0) {
    return r;
  }
  const boost::math::students_t dist(static_cast<double>(r.df));
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  return r;
}

struct LabeledSample {
  std::size_t row = 0;
  std::size_t col = 0;
  std::uint8_t label = 0;
};

// Share of an investigator's labeled points that agree with the reference.
// Points on NODATA reference pixels are ignored.
inline double agreement_ratio(std::span<const LabeledSample> samples, const LabelRaster& ref) {
  std::size_t used = 0;
  std::size_t agree = 0;
  for (const auto& s : samples) {
    detail::require(s.row < ref.shape().height() && s.col < ref.shape().width(), "sample coordinate outside the grid");
    const auto q = ref.at(s.row, s.col);
    if (q == kNoData) {
      continue;
    }
    ++used;
    agree += (q == s.label) ? 1 : 0;
  }
  detail::require(used > 0, "agreement ratio needs at least one labeled sample");
  return static_cast<double>(agree) / static_cast<double>(used);
}

inline double pearson_correlation(std::span<const double> x, std::span<const double> y) {
  detail::require(x.size() == y.size(), "correlation requires equal-length inputs");
  detail::require(x.size() >= 3, "correlation requires at least three points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  detail::require(sxx > 0.0 && syy > 0.0, "correlation undefined for zero variance input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace lcfusion
