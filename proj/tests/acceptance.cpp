// Runs every acceptance criterion and prints one PASS/FAIL line for each.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>

#include "lcfusion/lcfusion.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace lcfusion;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

const std::vector<double> kEqual{0.25, 0.25, 0.25, 0.25};

double full_grid_oa(const LabelRaster& pred, const LabelRaster& truth) {
  return accuracy_report(confusion(pred, truth)).overall;
}

double median(std::vector<double> v) {
  std::ranges::sort(v);
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// 1. Closed-form posterior mean against numerical integration on the simplex.
Outcome conjugacy() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::exponential_distribution<double> e(1.0);
  std::uniform_real_distribution<double> w(0.5, 2.0);
  const auto s = testutil::shape(1, 1, 3);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t j_count = 1 + static_cast<std::size_t>(t % 3);
    std::vector<ProbabilityRaster> maps;
    FusionConfig cfg;
    for (std::size_t j = 0; j < j_count; ++j) {
      std::vector<double> p(3);
      for (auto& v : p) v = (rng() % 8 == 0) ? 0.0 : e(rng);  // some exact zeros get regularized
      if (p[0] + p[1] + p[2] == 0.0) p[0] = 1.0;
      maps.emplace_back(s, p);
      cfg.weights.push_back(w(rng));
    }
    const auto field = fuse(maps, cfg);
    std::vector<double> exponent(3);
    for (std::size_t c = 0; c < 3; ++c) {
      exponent[c] = 0.0;  // uniform prior, alpha = 1
      for (std::size_t j = 0; j < j_count; ++j) exponent[c] += cfg.weights[j] * maps[j].pixel(0)[c];
    }
    const auto numeric = oracle::simplex_posterior_mean(exponent, 200);
    for (std::size_t c = 0; c < 3; ++c) worst = std::max(worst, std::abs(field.mean(0)[c] - numeric[c]));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-2 && secs < 30.0, fmt("max |closed form - integral| = %.3g over 100 cases, %.2f s", worst, secs)};
}

// 2. Entropy exactness and the log2(C) bound.
Outcome entropy_exactness() {
  const std::vector<double> uniform{0.25, 0.25, 0.25, 0.25};
  const std::vector<double> onehot{1, 0, 0, 0};
  const double hu = shannon_entropy_bits(uniform);
  const double h1 = shannon_entropy_bits(onehot);
  std::mt19937_64 rng(99);
  std::exponential_distribution<double> e(1.0);
  std::size_t violations = 0;
  std::size_t checked = 0;
  for (std::size_t c = 2; c <= 9; ++c) {
    const std::size_t n = 125000;
    std::vector<double> values(n * c);
    for (auto& v : values) v = (rng() % 5 == 0) ? 0.0 : e(rng);
    for (std::size_t i = 0; i < n; ++i) {
      if (std::all_of(values.begin() + i * c, values.begin() + (i + 1) * c, [](double v) { return v == 0.0; })) {
        values[i * c] = 1.0;
      }
    }
    const ProbabilityRaster p(testutil::shape(n, 1, c), values);
    const double upper = std::log2(static_cast<double>(c));
    const auto h = entropy_map(p);
    for (std::size_t i = 0; i < n; ++i) {
      const double raw = shannon_entropy_bits(p.pixel(i));
      if (h.values()[i] > upper || h.values()[i] < 0.0 || raw > upper + 1e-12) ++violations;
    }
    checked += n;
  }
  const bool ok = hu == 2.0 && h1 == 0.0 && violations == 0 && checked >= 1000000;
  return {ok, fmt("H(uniform4) = %.17g, H(onehot) = %.17g, %zu bound violations in %zu pixels", hu, h1, violations,
                  checked)};
}

LabelRaster grid_raster(const std::vector<std::vector<std::uint8_t>>& g, std::size_t classes) {
  std::vector<std::uint8_t> v;
  for (const auto& row : g) v.insert(v.end(), row.begin(), row.end());
  return LabelRaster(testutil::shape(g.front().size(), g.size(), classes), v);
}

// 3. IJI closed forms and undefined cases.
Outcome iji_closed_forms() {
  const auto equal = iji(grid_raster({{0, 1, 2, 0}}, 3));
  const auto small = iji(grid_raster({{0, 1}, {2, 0}}, 3));
  const double pinned = std::log(2.0) / std::log(3.0) * 100.0;  // 63.09297535714574
  const auto two = iji(grid_raster({{0, 1}, {1, 0}}, 2));
  const auto flat = iji(grid_raster({{1, 1}, {1, 1}}, 3));
  const auto separated = iji(grid_raster({{0, kNoData, 1, kNoData, 2}}, 3));
  const bool ok = equal && std::abs(*equal - 100.0) <= 1e-9 && small && *small == pinned &&
                  std::abs(*small - 63.09297535714574) <= 1e-12 && !two && !flat && !separated;
  return {ok, fmt("equal shares %.12f, 2x2 example %.17g (pinned %.17g), m=2 %s, E=0 %s", equal.value_or(-1),
                  small.value_or(-1), pinned, two ? "defined" : "undefined",
                  (!flat && !separated) ? "undefined" : "defined")};
}

// 4. Unweighted fusion beats the individual investigators.
Outcome fusion_beats_individuals() {
  const auto t0 = Clock::now();
  std::size_t oa_wins = 0;
  std::size_t iji_wins = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto truth = generate_scene({testutil::four_classes(128, 128), 24, kEqual, seed});
    auto engine = keyed_engine(seed, 0, 0xacce55ULL);
    std::vector<ProbabilityRaster> maps;
    double mean_oa = 0.0;
    std::vector<double> ijis;
    for (std::uint64_t j = 0; j < 20; ++j) {
      const double noise = 0.05 + 0.35 * uniform01(engine);
      maps.push_back(generate_investigator(truth, {"i", noise, {}, 5.0, seed * 1000 + j}));
      const auto hard = hard_classify(maps.back());
      mean_oa += full_grid_oa(hard, truth) / 20.0;
      ijis.push_back(iji(hard).value_or(0.0));
    }
    const auto fused = fused_label_map(fuse(maps, FusionConfig{}));
    if (full_grid_oa(fused, truth) > mean_oa) ++oa_wins;
    const auto fi = iji(fused);
    if (fi && *fi < median(ijis)) ++iji_wins;
  }
  const double secs = seconds_since(t0);
  return {oa_wins >= 95 && iji_wins >= 90 && secs < 300.0,
          fmt("fused OA > mean individual OA in %zu/100 seeds, fused IJI < median individual IJI in %zu/100, %.1f s",
              oa_wins, iji_wins, secs)};
}

// 5. Inferred weights follow planted quality.
Outcome weight_recovery() {
  const auto t0 = Clock::now();
  const std::vector<double> levels{0.05, 0.2, 0.4};
  std::size_t good = 0;
  std::size_t ascent_violations = 0;
  double worst_rho = 1.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto truth = generate_scene({testutil::four_classes(64, 64), 16, kEqual, seed});
    std::vector<ProbabilityRaster> maps;
    std::vector<double> quality;
    for (std::size_t j = 0; j < 12; ++j) {
      const double noise = levels[j % 3];
      maps.push_back(generate_investigator(truth, {"i", noise, {}, 5.0, seed * 100 + j}));
      quality.push_back(-noise);
    }
    const auto est = estimate_weights(maps, FusionConfig{}, std::nullopt, seed);
    for (std::size_t i = 1; i < est.objective_trace.size(); ++i) {
      if (est.objective_trace[i] < est.objective_trace[i - 1]) ++ascent_violations;
    }
    const double rho = oracle::spearman(est.kappa, quality);
    worst_rho = std::min(worst_rho, rho);
    if (rho >= 0.8) ++good;
  }
  const double secs = seconds_since(t0);
  return {good >= 90 && ascent_violations == 0,
          fmt("Spearman >= 0.8 in %zu/100 seeds (min %.3f), %zu objective decreases, %.1f s", good, worst_rho,
              ascent_violations, secs)};
}

// 6. Clustering recovers two planted interpretation styles.
Outcome cluster_recovery() {
  const auto t0 = Clock::now();
  std::size_t km_ok = 0;
  std::size_t kmed_ok = 0;
  std::size_t better = 0;
  const auto style_b = shifted_kernel(4, 1, 0.45);
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto truth = generate_scene({testutil::four_classes(64, 64), 16, kEqual, seed});
    auto engine = keyed_engine(seed, 0, 0xc1u);
    std::vector<ProbabilityRaster> maps;
    std::vector<std::size_t> planted;
    for (std::uint64_t j = 0; j < 16; ++j) {
      // Interleave the styles so input order carries no signal.
      const bool careful = (j * 5 + seed) % 2 == 0;
      if (careful) {
        maps.push_back(generate_investigator(truth, {"a", 0.05 + 0.1 * uniform01(engine), {}, 10.0, seed * 100 + j}));
      } else {
        maps.push_back(generate_investigator(truth, {"b", 0.25 + 0.15 * uniform01(engine), style_b, 1.5, seed * 100 + j}));
      }
      planted.push_back(careful ? 0 : 1);
    }
    const auto features = EntropyFeatureMatrix::from_maps(maps);
    const auto km = kmeans_cluster(features, 2, seed);
    const auto kmed = kmedoids_cluster(features, 2, seed);
    if (adjusted_rand_index(km.assignment, planted) == 1.0) ++km_ok;
    if (adjusted_rand_index(kmed.assignment, planted) == 1.0) ++kmed_ok;

    const double all_oa = full_grid_oa(fused_label_map(fuse(maps, FusionConfig{})), truth);
    double best = 0.0;
    for (const auto& subset : cluster_subsets(maps, km)) {
      best = std::max(best, full_grid_oa(fused_label_map(fuse(subset, FusionConfig{})), truth));
    }
    if (best >= all_oa) ++better;
  }
  const double secs = seconds_since(t0);
  return {km_ok >= 95 && kmed_ok >= 95 && better >= 70,
          fmt("ARI = 1: k-means %zu/100, k-medoids %zu/100; best cluster OA >= all-maps OA in %zu/100, %.1f s", km_ok,
              kmed_ok, better, secs)};
}

// 7. Accuracy identities and the pinned t-test.
Outcome metric_identities() {
  std::mt19937_64 rng(77);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t c = 2 + rng() % 7;
    std::vector<std::uint64_t> counts(c * c);
    for (auto& v : counts) v = (rng() % 5 == 0) ? 0 : rng() % 1000;
    counts[(rng() % c) * (c + 1)] += 1;
    const ConfusionMatrix m(std::vector<std::string>(c, "x"), counts);
    const auto r = accuracy_report(m);
    const double total = static_cast<double>(m.total());
    double via_ua = 0.0;
    double via_pa = 0.0;
    for (std::size_t k = 0; k < c; ++k) {
      if (r.users[k]) via_ua += *r.users[k] * static_cast<double>(m.row_total(k)) / total;
      if (r.producers[k]) via_pa += *r.producers[k] * static_cast<double>(m.column_total(k)) / total;
    }
    worst = std::max({worst, std::abs(r.overall - static_cast<double>(m.trace()) / total), std::abs(via_ua - r.overall),
                      std::abs(via_pa - r.overall)});
  }
  const std::vector<double> a{1.2, 0.8, 1.1, 0.9, 1.0};
  const std::vector<double> zero(5, 0.0);
  const auto tt = paired_t_test(a, zero);
  const double t_rel = std::abs(tt.t - 14.142) / 14.142;
  const double p_rel = std::abs(tt.p - 1.45e-4) / 1.45e-4;
  return {worst <= 1e-12 && t_rel <= 1e-3 && p_rel <= 1e-3,
          fmt("max identity error %.3g over 1000 matrices; t = %.6f, p = %.6g", worst, tt.t, tt.p)};
}

// 8. Monte Carlo mean OA for a map with exactly 10% of each class flipped.
Outcome monte_carlo_calibration() {
  const std::size_t w = 100;
  const std::size_t h = 80;
  std::vector<std::uint8_t> ref(w * h);
  for (std::size_t i = 0; i < ref.size(); ++i) ref[i] = static_cast<std::uint8_t>((i % w) * 4 / w);
  auto pred = ref;
  std::map<std::uint8_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < ref.size(); ++i) by_class[ref[i]].push_back(i);
  std::mt19937 rng(8);
  for (auto& [c, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (std::size_t k = 0; k < idx.size() / 10; ++k) pred[idx[k]] = static_cast<std::uint8_t>((c + 1) % 4);
  }
  const auto shape = testutil::four_classes(w, h);
  const auto mc = monte_carlo_assess(LabelRaster(shape, pred), LabelRaster(shape, ref), 100, 300, 2024);
  double mean = 0.0;
  for (const auto& r : mc.per_iteration) mean += r.overall / 100.0;
  return {std::abs(mean - 0.90) <= 0.02, fmt("mean OA %.5f over 100 iterations of 300 samples/class", mean)};
}

// 9. Full pipeline determinism and runtime at acceptance scale.
Outcome pipeline_determinism() {
  testutil::TempDir dir;
  Scenario sc;
  sc.scene = {testutil::four_classes(256, 256), 48, kEqual, 9};
  for (std::size_t j = 0; j < 44; ++j) {
    const bool style_b = j % 4 == 3;
    sc.investigators.push_back({fmt("inv_%02zu", j), 0.05 + 0.35 * static_cast<double>(j % 11) / 10.0,
                                style_b ? shifted_kernel(4, 1, 0.4) : uniform_kernel(4), style_b ? 2.0 : 6.0,
                                1000 + j});
  }
  const auto t_sim = Clock::now();
  materialize_scenario(sc, dir / "sim");
  const double sim_secs = seconds_since(t_sim);

  PipelineConfig cfg;
  cfg.input_dir = dir / "sim/investigators";
  cfg.reference = dir / "sim/reference.json";
  cfg.seed = 17;
  double worst = 0.0;
  for (const char* name : {"run1", "run2"}) {
    cfg.output_dir = dir / name;
    const auto t0 = Clock::now();
    run_pipeline(cfg);
    worst = std::max(worst, seconds_since(t0));
  }
  std::size_t csvs = 0;
  std::size_t differing = 0;
  for (const auto& e : fs::directory_iterator(dir / "run1")) {
    if (e.path().extension() != ".csv") continue;
    ++csvs;
    const auto other = dir / "run2" / e.path().filename();
    if (!fs::exists(other) || read_text_file(e.path()) != read_text_file(other)) ++differing;
  }
  return {differing == 0 && csvs > 0 && worst < 60.0,
          fmt("%zu CSVs compared, %zu differ; slowest run %.1f s (simulation %.1f s)", csvs, differing, worst,
              sim_secs)};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"conjugacy", conjugacy},
      {"entropy exactness", entropy_exactness},
      {"IJI closed forms", iji_closed_forms},
      {"fusion beats individuals", fusion_beats_individuals},
      {"weight recovery", weight_recovery},
      {"cluster recovery", cluster_recovery},
      {"metric identities", metric_identities},
      {"Monte Carlo calibration", monte_carlo_calibration},
      {"pipeline determinism", pipeline_determinism},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %zu %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first.c_str(), o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
