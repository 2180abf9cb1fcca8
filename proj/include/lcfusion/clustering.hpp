#pragma once

// Grouping of investigator maps by their pixel-wise entropy signatures.
// k-Means (squared Euclidean, k-means++ seeding, Lloyd iterations) and
// k-Medoids (PAM build + swap under L1). Cluster ids are canonical: cluster
// 0 holds map 0, and further ids follow the first appearance of each cluster
// in input order.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ranges>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcfusion/entropy.hpp"
#include "lcfusion/error.hpp"
#include "lcfusion/fusion.hpp"
#include "lcfusion/grid.hpp"
#include "lcfusion/parallel.hpp"
#include "lcfusion/rng.hpp"

namespace lcfusion {

enum class ClusterMethod { kmeans, kmedoids };

inline std::string to_string(ClusterMethod m) { return m == ClusterMethod::kmeans ? "kmeans" : "kmedoids"; }

inline ClusterMethod parse_cluster_method(const std::string& name) {
  if (name == "kmeans") {
    return ClusterMethod::kmeans;
  }
  if (name == "kmedoids") {
    return ClusterMethod::kmedoids;
  }
  throw ValidationError("unknown cluster method '" + name + "' (expected kmeans or kmedoids)");
}

// One row per investigator map, one column per pixel.
class EntropyFeatureMatrix {
 public:
  EntropyFeatureMatrix(std::size_t n_maps, std::size_t n_features, std::vector<double> data)
      : n_maps_(n_maps), n_features_(n_features), data_(std::move(data)) {
    detail::require(n_maps_ >= 1 && n_features_ >= 1, "feature matrix must be non-empty");
    detail::require(data_.size() == n_maps_ * n_features_, "feature matrix size mismatch");
    for (double v : data_) {
      detail::require(std::isfinite(v) && v >= 0.0, "entropy features must be finite and non-negative");
    }
  }

  static EntropyFeatureMatrix from_rows(const std::vector<std::vector<double>>& rows) {
    detail::require(!rows.empty(), "feature matrix must be non-empty");
    std::vector<double> data;
    for (const auto& r : rows) {
      detail::require(r.size() == rows.front().size(), "feature rows must have equal length");
      data.insert(data.end(), r.begin(), r.end());
    }
    return EntropyFeatureMatrix(rows.size(), rows.front().size(), std::move(data));
  }

  template <std::ranges::random_access_range Maps>
  static EntropyFeatureMatrix from_maps(const Maps& maps) {
    const GridShape& shape = detail::common_shape(maps);
    const std::size_t n_maps = std::ranges::size(maps);
    const std::size_t f = shape.pixel_count();
    std::vector<double> data(n_maps * f);
    std::vector<const ProbabilityRaster*> inputs;
    for (const auto& m : maps) {
      inputs.push_back(&detail::unwrap(m));
    }
    parallel_for(n_maps, [&](std::size_t j) {
      const auto h = entropy_map(*inputs[j]);
      std::copy(h.values().begin(), h.values().end(), data.begin() + static_cast<std::ptrdiff_t>(j * f));
    });
    return EntropyFeatureMatrix(n_maps, f, std::move(data));
  }

  std::size_t n_maps() const noexcept { return n_maps_; }
  std::size_t n_features() const noexcept { return n_features_; }
  std::span<const double> row(std::size_t j) const noexcept {
    return {data_.data() + j * n_features_, n_features_};
  }

 private:
  std::size_t n_maps_;
  std::size_t n_features_;
  std::vector<double> data_;
};

struct ClusterModel {
  ClusterMethod method = ClusterMethod::kmeans;
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> assignment;
  // k-Means: centroids. k-Medoids: copies of the medoid rows.
  std::vector<std::vector<double>> centers;
  std::vector<std::size_t> medoids;  // k-Medoids only
  double inertia = 0.0;
  // k-Means: inertia after every assignment step of the winning restart.
  // k-Medoids: total cost after build and after every accepted swap.
  std::vector<double> history;
};

namespace detail {

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double manhattan_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    s += std::abs(a[i] - b[i]);
  }
  return s;
}

inline void check_k(std::size_t k, std::size_t n_maps) {
  require(k >= 2, "cluster count k must be at least 2");
  require(k <= n_maps, "cluster count k=" + std::to_string(k) + " exceeds the number of maps (" +
                           std::to_string(n_maps) + ")");
}

// Renumbers clusters by first appearance in input order.
inline void canonicalize(ClusterModel& model) {
  std::vector<std::size_t> relabel(model.k, model.k);
  std::size_t next = 0;
  for (std::size_t c : model.assignment) {
    if (relabel[c] == model.k) {
      relabel[c] = next++;
    }
  }
  for (std::size_t& c : model.assignment) {
    c = relabel[c];
  }
  std::vector<std::vector<double>> centers(model.k);
  for (std::size_t c = 0; c < model.k; ++c) {
    centers[relabel[c]] = std::move(model.centers[c]);
  }
  model.centers = std::move(centers);
  if (!model.medoids.empty()) {
    std::vector<std::size_t> medoids(model.k);
    for (std::size_t c = 0; c < model.k; ++c) {
      medoids[relabel[c]] = model.medoids[c];
    }
    model.medoids = std::move(medoids);
  }
}

struct LloydRun {
  std::vector<std::size_t> assignment;
  std::vector<std::vector<double>> centers;
  double inertia = 0.0;
  std::vector<double> history;
};

inline std::vector<std::vector<double>> kmeans_plus_plus(const EntropyFeatureMatrix& x, std::size_t k,
                                                         SplitMix64& engine) {
  const std::size_t n = x.n_maps();
  std::vector<std::size_t> chosen{uniform_index(engine, n)};
  std::vector<double> d2(n);
  for (std::size_t j = 0; j < n; ++j) {
    d2[j] = squared_distance(x.row(j), x.row(chosen[0]));
  }
  while (chosen.size() < k) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = n;
    if (total > 0.0) {
      const double r = uniform01(engine) * total;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        if (d2[j] <= 0.0) {
          continue;
        }
        acc += d2[j];
        pick = j;
        if (acc > r) {
          break;
        }
      }
    } else {
      // every point coincides with a center; take any unchosen index
      std::vector<std::size_t> free;
      for (std::size_t j = 0; j < n; ++j) {
        if (std::find(chosen.begin(), chosen.end(), j) == chosen.end()) {
          free.push_back(j);
        }
      }
      pick = free[uniform_index(engine, free.size())];
    }
    chosen.push_back(pick);
    for (std::size_t j = 0; j < n; ++j) {
      d2[j] = std::min(d2[j], squared_distance(x.row(j), x.row(pick)));
    }
  }
  std::vector<std::vector<double>> centers;
  for (std::size_t c : chosen) {
    centers.emplace_back(x.row(c).begin(), x.row(c).end());
  }
  return centers;
}

inline LloydRun lloyd(const EntropyFeatureMatrix& x, std::vector<std::vector<double>> centers,
                      std::size_t max_iterations) {
  const std::size_t n = x.n_maps();
  const std::size_t k = centers.size();
  const std::size_t f = x.n_features();
  LloydRun run;
  std::vector<std::size_t> previous;
  std::vector<double> dist(n);
  for (std::size_t iter = 0; iter < max_iterations; ++iter) {
    std::vector<std::size_t> assign(n);
    parallel_for(n, [&](std::size_t j) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double d = squared_distance(x.row(j), centers[c]);
        if (d < best) {
          best = d;
          assign[j] = c;
        }
      }
      dist[j] = best;
    });

    // Empty-cluster repair: the farthest point from a cluster that can spare
    // it becomes the empty cluster's center.
    std::vector<std::size_t> sizes(k, 0);
    for (std::size_t c : assign) {
      ++sizes[c];
    }
    for (std::size_t e = 0; e < k; ++e) {
      if (sizes[e] != 0) {
        continue;
      }
      std::size_t far = n;
      for (std::size_t j = 0; j < n; ++j) {
        if (sizes[assign[j]] >= 2 && (far == n || dist[j] > dist[far])) {
          far = j;
        }
      }
      --sizes[assign[far]];
      assign[far] = e;
      sizes[e] = 1;
      dist[far] = 0.0;
      centers[e].assign(x.row(far).begin(), x.row(far).end());
    }

    run.history.push_back(std::accumulate(dist.begin(), dist.end(), 0.0));
    if (assign == previous) {
      break;
    }

    for (std::size_t c = 0; c < k; ++c) {
      std::fill(centers[c].begin(), centers[c].end(), 0.0);
    }
    for (std::size_t j = 0; j < n; ++j) {
      auto& ctr = centers[assign[j]];
      const auto row = x.row(j);
      for (std::size_t i = 0; i < f; ++i) {
        ctr[i] += row[i];
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      const double inv = 1.0 / static_cast<double>(sizes[c]);
      for (double& v : centers[c]) {
        v *= inv;
      }
    }
    previous = std::move(assign);
  }
  run.assignment = std::move(previous);
  run.centers = std::move(centers);
  run.inertia = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    run.inertia += squared_distance(x.row(j), run.centers[run.assignment[j]]);
  }
  return run;
}

}  // namespace detail

inline constexpr std::size_t kKMeansRestarts = 10;
inline constexpr std::size_t kKMeansMaxIterations = 300;

inline ClusterModel kmeans_cluster(const EntropyFeatureMatrix& features, std::size_t k, std::uint64_t seed) {
  detail::check_k(k, features.n_maps());
  std::optional<detail::LloydRun> best;
  for (std::size_t r = 0; r < kKMeansRestarts; ++r) {
    auto engine = keyed_engine(seed, r, 0x6b6d65616e73ULL);
    auto run = detail::lloyd(features, detail::kmeans_plus_plus(features, k, engine), kKMeansMaxIterations);
    if (!best || run.inertia < best->inertia) {
      best = std::move(run);
    }
  }
  ClusterModel model;
  model.method = ClusterMethod::kmeans;
  model.k = k;
  model.seed = seed;
  model.assignment = std::move(best->assignment);
  model.centers = std::move(best->centers);
  model.inertia = best->inertia;
  model.history = std::move(best->history);
  detail::canonicalize(model);
  return model;
}

// Pairwise L1 distances between feature rows.
inline std::vector<double> manhattan_distance_matrix(const EntropyFeatureMatrix& x) {
  const std::size_t n = x.n_maps();
  std::vector<double> d(n * n, 0.0);
  parallel_for(n, [&](std::size_t a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      d[a * n + b] = detail::manhattan_distance(x.row(a), x.row(b));
    }
  });
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      d[b * n + a] = d[a * n + b];
    }
  }
  return d;
}

// PAM under L1. Candidates are scanned in a seeded order and only strict
// improvements are taken, so the seed decides between equal-cost choices.
inline ClusterModel kmedoids_cluster(const EntropyFeatureMatrix& features, std::size_t k, std::uint64_t seed) {
  detail::check_k(k, features.n_maps());
  const std::size_t n = features.n_maps();
  const auto d = manhattan_distance_matrix(features);
  auto engine = keyed_engine(seed, 0, 0x6b6d65646f6964ULL);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  order = sample_without_replacement(std::move(order), n, engine);

  auto total_cost = [&](const std::vector<std::size_t>& medoids) {
    double cost = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double best = std::numeric_limits<double>::infinity();
      for (std::size_t m : medoids) {
        best = std::min(best, d[m * n + j]);
      }
      cost += best;
    }
    return cost;
  };

  // Build.
  std::vector<std::size_t> medoids;
  {
    std::size_t first = order[0];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c : order) {
      double s = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        s += d[c * n + j];
      }
      if (s < best) {
        best = s;
        first = c;
      }
    }
    medoids.push_back(first);
  }
  std::vector<double> nearest(n);
  for (std::size_t j = 0; j < n; ++j) {
    nearest[j] = d[medoids[0] * n + j];
  }
  while (medoids.size() < k) {
    std::size_t pick = n;
    double best_gain = -1.0;
    for (std::size_t c : order) {
      if (std::find(medoids.begin(), medoids.end(), c) != medoids.end()) {
        continue;
      }
      double gain = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        gain += std::max(0.0, nearest[j] - d[c * n + j]);
      }
      if (gain > best_gain) {
        best_gain = gain;
        pick = c;
      }
    }
    medoids.push_back(pick);
    for (std::size_t j = 0; j < n; ++j) {
      nearest[j] = std::min(nearest[j], d[pick * n + j]);
    }
  }

  // Swap: apply the best improving (medoid, non-medoid) exchange until none
  // improves the total cost.
  ClusterModel model;
  double cost = total_cost(medoids);
  model.history.push_back(cost);
  for (std::size_t step = 0; step < 10000; ++step) {
    double best_cost = cost;
    std::size_t best_slot = k;
    std::size_t best_candidate = n;
    for (std::size_t slot = 0; slot < k; ++slot) {
      for (std::size_t c : order) {
        if (std::find(medoids.begin(), medoids.end(), c) != medoids.end()) {
          continue;
        }
        auto trial = medoids;
        trial[slot] = c;
        const double trial_cost = total_cost(trial);
        if (trial_cost < best_cost - 1e-12 * std::max(1.0, cost)) {
          best_cost = trial_cost;
          best_slot = slot;
          best_candidate = c;
        }
      }
    }
    if (best_slot == k) {
      break;
    }
    medoids[best_slot] = best_candidate;
    cost = best_cost;
    model.history.push_back(cost);
  }

  model.method = ClusterMethod::kmedoids;
  model.k = k;
  model.seed = seed;
  model.assignment.resize(n);
  model.inertia = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    std::size_t best = 0;
    for (std::size_t slot = 1; slot < k; ++slot) {
      if (d[medoids[slot] * n + j] < d[medoids[best] * n + j]) {
        best = slot;
      }
    }
    model.assignment[j] = best;
  }
  for (std::size_t slot = 0; slot < k; ++slot) {
    model.assignment[medoids[slot]] = slot;
  }
  for (std::size_t j = 0; j < n; ++j) {
    model.inertia += d[medoids[model.assignment[j]] * n + j];
  }
  model.medoids = medoids;
  for (std::size_t m : medoids) {
    model.centers.emplace_back(features.row(m).begin(), features.row(m).end());
  }
  detail::canonicalize(model);
  return model;
}

inline ClusterModel cluster_maps(const EntropyFeatureMatrix& features, ClusterMethod method, std::size_t k,
                                 std::uint64_t seed) {
  return method == ClusterMethod::kmeans ? kmeans_cluster(features, k, seed) : kmedoids_cluster(features, k, seed);
}

// Member indices per non-empty cluster, in input order.
inline std::vector<std::vector<std::size_t>> cluster_members(const std::vector<std::size_t>& assignment,
                                                             std::size_t k) {
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t j = 0; j < assignment.size(); ++j) {
    detail::require(assignment[j] < k, "assignment references cluster " + std::to_string(assignment[j]) +
                                           " but k=" + std::to_string(k));
    members[assignment[j]].push_back(j);
  }
  std::erase_if(members, [](const auto& m) { return m.empty(); });
  return members;
}

template <std::ranges::random_access_range Maps>
std::vector<std::vector<std::reference_wrapper<const ProbabilityRaster>>> cluster_subsets(const Maps& maps,
                                                                                          const ClusterModel& model) {
  detail::require(model.assignment.size() == std::ranges::size(maps),
                  "length mismatch: assignment has " + std::to_string(model.assignment.size()) +
                      " entries for " + std::to_string(std::ranges::size(maps)) + " maps");
  std::vector<std::vector<std::reference_wrapper<const ProbabilityRaster>>> subsets;
  for (const auto& members : cluster_members(model.assignment, model.k)) {
    auto& subset = subsets.emplace_back();
    for (std::size_t j : members) {
      subset.push_back(std::cref(detail::unwrap(maps[j])));
    }
  }
  return subsets;
}

inline double adjusted_rand_index(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  detail::require(a.size() == b.size() && !a.empty(), "partitions must have equal non-zero length");
  const std::size_t ka = *std::max_element(a.begin(), a.end()) + 1;
  const std::size_t kb = *std::max_element(b.begin(), b.end()) + 1;
  std::vector<double> table(ka * kb, 0.0);
  std::vector<double> rows(ka, 0.0);
  std::vector<double> cols(kb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    table[a[i] * kb + b[i]] += 1.0;
    rows[a[i]] += 1.0;
    cols[b[i]] += 1.0;
  }
  auto pairs = [](double x) { return x * (x - 1.0) / 2.0; };
  double index = 0.0;
  for (double t : table) {
    index += pairs(t);
  }
  double sum_rows = 0.0;
  double sum_cols = 0.0;
  for (double r : rows) {
    sum_rows += pairs(r);
  }
  for (double c : cols) {
    sum_cols += pairs(c);
  }
  const double expected = sum_rows * sum_cols / pairs(static_cast<double>(a.size()));
  const double maximum = 0.5 * (sum_rows + sum_cols);
  if (maximum == expected) {
    return 1.0;
  }
  return (index - expected) / (maximum - expected);
}

inline nlohmann::json cluster_model_to_json(const ClusterModel& model, const std::string& centers_file = {}) {
  nlohmann::json j;
  j["method"] = to_string(model.method);
  j["k"] = model.k;
  j["seed"] = model.seed;
  j["assignment"] = model.assignment;
  if (model.method == ClusterMethod::kmedoids) {
    j["medoid_indices"] = model.medoids;
  } else {
    j["centers_file"] = centers_file;
  }
  j["inertia"] = model.inertia;
  return j;
}

}  // namespace lcfusion
