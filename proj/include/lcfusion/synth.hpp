#pragma once

// Synthetic ground truth: blob-structured reference scenes and investigator
// probability maps with planted label noise and confidence.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <queue>
#include <random>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "lcfusion/error.hpp"
#include "lcfusion/grid.hpp"
#include "lcfusion/parallel.hpp"
#include "lcfusion/raster_io.hpp"
#include "lcfusion/rng.hpp"

namespace lcfusion {

struct SceneSpec {
  GridShape shape;
  std::size_t n_blobs = 0;
  std::vector<double> class_mix;
  std::uint64_t seed = 0;
};

struct InvestigatorSpec {
  std::string id;
  double noise_rate = 0.0;
  // Row c: distribution of the replacement label when a pixel of true
  // class c is corrupted. Self-transitions are allowed. Empty means uniform.
  std::vector<std::vector<double>> confusion_kernel;
  double softness = 5.0;
  std::uint64_t seed = 0;
};

inline std::vector<std::vector<double>> uniform_kernel(std::size_t n_classes) {
  return std::vector<std::vector<double>>(n_classes,
                                          std::vector<double>(n_classes, 1.0 / static_cast<double>(n_classes)));
}

// Kernel that sends corrupted pixels of class c to class (c + shift) mod C
// with probability `bias`, and to the true class with the same probability;
// the remainder spreads evenly over the other classes.
inline std::vector<std::vector<double>> shifted_kernel(std::size_t n_classes, std::size_t shift, double bias) {
  detail::require(n_classes >= 3, "shifted kernel needs at least three classes");
  detail::require(shift % n_classes != 0, "shift must move labels to another class");
  detail::require(bias > 0.0 && bias <= 0.5, "bias must be in (0, 0.5]");
  std::vector<std::vector<double>> k(n_classes, std::vector<double>(n_classes));
  const double rest = (1.0 - 2.0 * bias) / static_cast<double>(n_classes - 2);
  for (std::size_t c = 0; c < n_classes; ++c) {
    for (std::size_t q = 0; q < n_classes; ++q) {
      k[c][q] = rest;
    }
    k[c][c] = bias;
    k[c][(c + shift) % n_classes] = bias;
  }
  return k;
}

namespace detail {

inline void validate_kernel(const std::vector<std::vector<double>>& kernel, std::size_t n_classes) {
  require(kernel.size() == n_classes, "confusion kernel must have one row per class");
  for (std::size_t c = 0; c < n_classes; ++c) {
    require(kernel[c].size() == n_classes, "confusion kernel must be square");
    double sum = 0.0;
    for (std::size_t q = 0; q < n_classes; ++q) {
      require(kernel[c][q] >= 0.0, "confusion kernel entries must be non-negative");
      require(kernel[c][c] >= kernel[c][q], "confusion kernel diagonal must dominate its row");
      sum += kernel[c][q];
    }
    require(std::abs(sum - 1.0) < 1e-9, "confusion kernel rows must sum to 1");
  }
}

inline std::vector<std::size_t> class_quotas(const std::vector<double>& mix, std::size_t n) {
  std::vector<std::size_t> quota(mix.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < mix.size(); ++c) {
    const double exact = mix[c] * static_cast<double>(n);
    quota[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += quota[c];
    remainders.emplace_back(-(exact - std::floor(exact)), c);
  }
  std::sort(remainders.begin(), remainders.end());
  for (std::size_t r = 0; assigned < n; ++r, ++assigned) {
    ++quota[remainders[r % remainders.size()].second];
  }
  return quota;
}

}  // namespace detail

// Seeded weighted-Voronoi growth with per-class area quotas. Blobs grow from
// random seed pixels in order of scaled distance; a class stops growing at
// its quota. Regions left enclosed by full classes receive a new blob of the
// class with the largest remaining deficit, so realized areas match the
// quotas exactly and every patch is 4-connected to its seed.
inline LabelRaster generate_scene(const SceneSpec& spec) {
  const auto& shape = spec.shape;
  const std::size_t n = shape.pixel_count();
  const std::size_t n_classes = shape.n_classes();
  detail::require(spec.class_mix.size() == n_classes, "class_mix must have one entry per class");
  double mix_sum = 0.0;
  for (std::size_t c = 0; c < n_classes; ++c) {
    detail::require(spec.class_mix[c] > 0.0, "class_mix fractions must be positive");
    detail::require(spec.class_mix[c] * static_cast<double>(n) >= 1.0,
                    "infeasible mix: class '" + shape.class_names()[c] + "' gets less than one pixel");
    mix_sum += spec.class_mix[c];
  }
  detail::require(std::abs(mix_sum - 1.0) < 1e-9, "class_mix must sum to 1");
  detail::require(spec.n_blobs >= n_classes, "n_blobs must be at least the number of classes");
  detail::require(spec.n_blobs <= n, "n_blobs exceeds the pixel count");

  const auto quota = detail::class_quotas(spec.class_mix, n);
  auto engine = keyed_engine(spec.seed, 0, 0x7363656e65ULL);

  struct Blob {
    std::size_t row, col, cls;
    double scale;
  };
  std::vector<Blob> blobs;
  std::vector<std::size_t> pixels(n);
  std::iota(pixels.begin(), pixels.end(), std::size_t{0});
  const auto seeds = sample_without_replacement(pixels, spec.n_blobs, engine);
  for (std::size_t b = 0; b < spec.n_blobs; ++b) {
    std::size_t cls = b;
    if (b >= n_classes) {
      const double u = uniform01(engine);
      double acc = 0.0;
      cls = n_classes - 1;
      for (std::size_t c = 0; c < n_classes; ++c) {
        acc += spec.class_mix[c];
        if (u < acc) {
          cls = c;
          break;
        }
      }
    }
    blobs.push_back({seeds[b] / shape.width(), seeds[b] % shape.width(), cls, 0.6 + 0.8 * uniform01(engine)});
  }

  std::vector<std::uint8_t> labels(n, kNoData);
  std::vector<std::size_t> filled(n_classes, 0);
  using Entry = std::tuple<double, std::uint64_t, std::size_t, std::size_t>;  // priority, tiebreak, pixel, blob
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> queue;
  std::uint64_t counter = 0;
  auto push = [&](std::size_t pixel, std::size_t blob) {
    const auto& b = blobs[blob];
    const double dr = static_cast<double>(pixel / shape.width()) - static_cast<double>(b.row);
    const double dc = static_cast<double>(pixel % shape.width()) - static_cast<double>(b.col);
    queue.emplace(std::sqrt(dr * dr + dc * dc) / b.scale, counter++, pixel, blob);
  };
  auto grow = [&] {
    while (!queue.empty()) {
      const auto [prio, tie, pixel, blob] = queue.top();
      queue.pop();
      const std::size_t cls = blobs[blob].cls;
      if (labels[pixel] != kNoData || filled[cls] >= quota[cls]) {
        continue;
      }
      labels[pixel] = static_cast<std::uint8_t>(cls);
      ++filled[cls];
      const std::size_t r = pixel / shape.width();
      const std::size_t c = pixel % shape.width();
      if (r > 0 && labels[pixel - shape.width()] == kNoData) push(pixel - shape.width(), blob);
      if (r + 1 < shape.height() && labels[pixel + shape.width()] == kNoData) push(pixel + shape.width(), blob);
      if (c > 0 && labels[pixel - 1] == kNoData) push(pixel - 1, blob);
      if (c + 1 < shape.width() && labels[pixel + 1] == kNoData) push(pixel + 1, blob);
    }
  };
  for (std::size_t b = 0; b < blobs.size(); ++b) {
    push(blobs[b].row * shape.width() + blobs[b].col, b);
  }
  grow();

  const auto order = sample_without_replacement(pixels, n, engine);
  for (std::size_t pixel : order) {
    if (labels[pixel] != kNoData) {
      continue;
    }
    std::size_t cls = 0;
    for (std::size_t c = 1; c < n_classes; ++c) {
      if (quota[c] - filled[c] > quota[cls] - filled[cls]) {
        cls = c;
      }
    }
    blobs.push_back({pixel / shape.width(), pixel % shape.width(), cls, 1.0});
    push(pixel, blobs.size() - 1);
    grow();
  }
  return LabelRaster(shape, std::move(labels));
}

inline ProbabilityRaster generate_investigator(const LabelRaster& truth, const InvestigatorSpec& spec) {
  const std::size_t n_classes = truth.shape().n_classes();
  detail::require(spec.noise_rate >= 0.0 && spec.noise_rate < 1.0, "noise_rate must be in [0, 1)");
  detail::require(spec.softness > 0.0, "softness must be positive");
  const auto kernel = spec.confusion_kernel.empty() ? uniform_kernel(n_classes) : spec.confusion_kernel;
  detail::validate_kernel(kernel, n_classes);

  const std::size_t n = truth.shape().pixel_count();
  std::vector<double> values(n * n_classes);
  parallel_for(n, [&](std::size_t i) {
    const auto true_class = truth[i];
    detail::require(true_class != kNoData, "truth map must not contain NODATA pixels");
    auto engine = keyed_engine(spec.seed, i, 0x696e76ULL);
    std::size_t label = true_class;
    if (uniform01(engine) < spec.noise_rate) {
      const double u = uniform01(engine);
      double acc = 0.0;
      label = n_classes - 1;
      for (std::size_t c = 0; c < n_classes; ++c) {
        acc += kernel[true_class][c];
        if (u < acc) {
          label = c;
          break;
        }
      }
    }
    double* p = values.data() + i * n_classes;
    double total = 0.0;
    for (std::size_t c = 0; c < n_classes; ++c) {
      std::gamma_distribution<double> gamma(1.0 + (c == label ? spec.softness : 0.0), 1.0);
      p[c] = gamma(engine);
      total += p[c];
    }
    for (std::size_t c = 0; c < n_classes; ++c) {
      p[c] /= total;
    }
  });
  return ProbabilityRaster(truth.shape(), std::move(values));
}

struct Scenario {
  SceneSpec scene;
  std::vector<InvestigatorSpec> investigators;
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
  try {
    const auto& s = j.at("scene");
    Scenario sc;
    GridShape shape(s.at("width").get<std::size_t>(), s.at("height").get<std::size_t>(),
                    s.at("class_names").get<std::vector<std::string>>());
    const std::size_t n_classes = shape.n_classes();
    sc.scene.shape = std::move(shape);
    sc.scene.n_blobs = s.value("n_blobs", std::size_t{4 * n_classes});
    sc.scene.class_mix = s.contains("class_mix")
                             ? s.at("class_mix").get<std::vector<double>>()
                             : std::vector<double>(n_classes, 1.0 / static_cast<double>(n_classes));
    sc.scene.seed = s.value("seed", std::uint64_t{0});
    std::size_t index = 0;
    for (const auto& inv : j.at("investigators")) {
      InvestigatorSpec spec;
      char fallback[32];
      std::snprintf(fallback, sizeof(fallback), "inv_%03zu", index++);
      spec.id = inv.value("id", std::string(fallback));
      spec.noise_rate = inv.value("noise_rate", 0.0);
      spec.softness = inv.value("softness", 5.0);
      spec.seed = inv.value("seed", std::uint64_t{index});
      if (inv.contains("confusion_kernel")) {
        spec.confusion_kernel = inv.at("confusion_kernel").get<std::vector<std::vector<double>>>();
      }
      sc.investigators.push_back(std::move(spec));
    }
    detail::require(!sc.investigators.empty(), "scenario lists no investigators");
    return sc;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed scenario: ") + e.what());
  }
}

inline nlohmann::json scenario_to_json(const Scenario& sc) {
  nlohmann::json j;
  j["scene"] = {{"width", sc.scene.shape.width()},
                {"height", sc.scene.shape.height()},
                {"class_names", sc.scene.shape.class_names()},
                {"n_blobs", sc.scene.n_blobs},
                {"class_mix", sc.scene.class_mix},
                {"seed", sc.scene.seed}};
  j["investigators"] = nlohmann::json::array();
  for (const auto& inv : sc.investigators) {
    nlohmann::json e = {{"id", inv.id}, {"noise_rate", inv.noise_rate}, {"softness", inv.softness}, {"seed", inv.seed}};
    if (!inv.confusion_kernel.empty()) {
      e["confusion_kernel"] = inv.confusion_kernel;
    }
    j["investigators"].push_back(std::move(e));
  }
  return j;
}

// Writes <dir>/reference.{json,bin} and <dir>/investigators/<id>.{json,bin}.
inline void materialize_scenario(const Scenario& sc, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir / "investigators");
  const auto truth = generate_scene(sc.scene);
  save_label_raster(truth, dir / "reference.json");
  for (const auto& inv : sc.investigators) {
    detail::require(!inv.id.empty() && inv.id.find('/') == std::string::npos, "invalid investigator id");
    save_probability_raster(generate_investigator(truth, inv), dir / "investigators" / (inv.id + ".json"));
  }
}

}  // namespace lcfusion
