#pragma once

// End-to-end workflow: load investigator maps, fuse them (all maps,
// kappa-weighted, per entropy cluster), assess every product against a
// reference with stratified Monte Carlo sampling, and write a summary.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "lcfusion/accuracy.hpp"
#include "lcfusion/clustering.hpp"
#include "lcfusion/error.hpp"
#include "lcfusion/fusion.hpp"
#include "lcfusion/grid.hpp"
#include "lcfusion/landscape.hpp"
#include "lcfusion/parallel.hpp"
#include "lcfusion/raster_io.hpp"
#include "lcfusion/text.hpp"
#include "lcfusion/weights.hpp"

namespace lcfusion {

enum class FusionMode { unweighted, weighted, clustered };

inline std::string to_string(FusionMode m) {
  switch (m) {
    case FusionMode::unweighted:
      return "unweighted";
    case FusionMode::weighted:
      return "weighted";
    case FusionMode::clustered:
      return "clustered";
  }
  return {};
}

inline FusionMode parse_fusion_mode(const std::string& name) {
  if (name == "unweighted") return FusionMode::unweighted;
  if (name == "weighted") return FusionMode::weighted;
  if (name == "clustered") return FusionMode::clustered;
  throw ValidationError("unknown fusion mode '" + name + "'");
}

inline const std::string kBaselineName = "plurality-baseline";

struct PipelineConfig {
  std::filesystem::path input_dir;
  std::filesystem::path reference;
  std::filesystem::path output_dir;
  std::vector<std::size_t> k_values{2, 3, 4};
  std::vector<ClusterMethod> methods{ClusterMethod::kmeans, ClusterMethod::kmedoids};
  std::vector<FusionMode> fusion_modes{FusionMode::unweighted, FusionMode::weighted, FusionMode::clustered};
  std::size_t mc_iterations = 100;
  std::size_t per_class_samples = 300;
  std::uint64_t seed = 0;
  std::optional<std::size_t> weight_subsample = kDefaultWeightSubsample;
  double epsilon = kDefaultEpsilon;

  bool has_mode(FusionMode m) const {
    return std::find(fusion_modes.begin(), fusion_modes.end(), m) != fusion_modes.end();
  }

  // Checks that do not need the input files.
  void validate() const {
    detail::require(!input_dir.empty(), "input_dir is required");
    detail::require(!reference.empty(), "missing reference: reference path is required");
    detail::require(!output_dir.empty(), "output_dir is required");
    detail::require(!fusion_modes.empty(), "at least one fusion mode is required");
    detail::require(mc_iterations >= 1, "mc_iterations must be at least 1");
    detail::require(per_class_samples >= 1, "per_class_samples must be at least 1");
    detail::require(epsilon > 0.0, "epsilon must be positive");
    for (std::size_t k : k_values) {
      detail::require(k >= 2, "invalid k=" + std::to_string(k) + ": cluster counts must be at least 2");
    }
    if (has_mode(FusionMode::clustered)) {
      detail::require(!methods.empty(), "clustered fusion requires at least one cluster method");
    }
  }
};

// Relative paths resolve against `base_dir` (normally the config's folder).
inline PipelineConfig pipeline_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  PipelineConfig cfg;
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_absolute() || base_dir.empty() ? path : base_dir / path;
  };
  try {
    cfg.input_dir = resolve(j.at("input_dir").get<std::string>());
    cfg.reference = resolve(j.at("reference").get<std::string>());
    cfg.output_dir = resolve(j.at("output_dir").get<std::string>());
    if (j.contains("k_values")) cfg.k_values = j.at("k_values").get<std::vector<std::size_t>>();
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_cluster_method(m.get<std::string>()));
    }
    if (j.contains("fusion_modes")) {
      cfg.fusion_modes.clear();
      for (const auto& m : j.at("fusion_modes")) cfg.fusion_modes.push_back(parse_fusion_mode(m.get<std::string>()));
    }
    cfg.mc_iterations = j.value("mc_iterations", cfg.mc_iterations);
    cfg.per_class_samples = j.value("per_class_samples", cfg.per_class_samples);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.epsilon = j.value("epsilon", cfg.epsilon);
    if (j.contains("weight_subsample")) {
      const auto& w = j.at("weight_subsample");
      cfg.weight_subsample = w.is_null() ? std::nullopt : std::optional<std::size_t>(w.get<std::size_t>());
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed pipeline config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

struct InvestigatorSet {
  std::vector<std::string> ids;
  std::vector<ProbabilityRaster> maps;
};

inline std::vector<std::filesystem::path> list_raster_headers(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("input directory '" + dir.string() + "' does not exist");
  }
  std::vector<std::filesystem::path> headers;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json") {
      headers.push_back(entry.path());
    }
  }
  std::sort(headers.begin(), headers.end());
  return headers;
}

// Every *.json raster in `dir`, in file-name order; `skip` is excluded.
inline InvestigatorSet load_investigators(const std::filesystem::path& dir, double epsilon = kDefaultEpsilon,
                                          const std::filesystem::path& skip = {}) {
  InvestigatorSet set;
  for (const auto& header : list_raster_headers(dir)) {
    if (!skip.empty() && std::filesystem::exists(skip) && std::filesystem::equivalent(header, skip)) {
      continue;
    }
    set.ids.push_back(header.stem().string());
    set.maps.push_back(load_probability_raster(header, epsilon));
  }
  detail::require(!set.maps.empty(), "no investigator rasters found in '" + dir.string() + "'");
  detail::common_shape(set.maps);
  return set;
}

inline void save_posterior_field(const PosteriorField& field, const std::filesystem::path& mean_path,
                                 const std::filesystem::path& alpha_path = {}) {
  detail::save_f32_stack(mean_path, field.shape(), field.shape().n_classes(), field.mean_values());
  if (!alpha_path.empty()) {
    detail::save_f32_stack(alpha_path, field.shape(), field.shape().n_classes(), field.alpha_values());
  }
}

// Per-pixel plurality of the investigators' hard labels, lowest class on
// ties. Stands in for a pooled-training baseline map.
inline LabelRaster plurality_composite(const std::vector<ProbabilityRaster>& maps) {
  const GridShape& shape = detail::common_shape(maps);
  const std::size_t c = shape.n_classes();
  std::vector<std::uint8_t> labels(shape.pixel_count());
  parallel_for(labels.size(), [&](std::size_t i) {
    std::vector<std::size_t> votes(c, 0);
    for (const auto& m : maps) {
      ++votes[argmax(m.pixel(i))];
    }
    labels[i] = static_cast<std::uint8_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
  });
  return LabelRaster(shape, std::move(labels));
}

struct MetricComparison {
  std::string metric;
  SampleSummary variant;
  SampleSummary baseline;
  std::optional<TTestResult> test;  // nullopt with fewer than two defined pairs
};

// Paired t-tests of OA and every UA/PA column against the baseline, pairing
// iterations that share sample indices.
inline std::vector<MetricComparison> compare_to_baseline(const MonteCarloResult& variant,
                                                         const MonteCarloResult& baseline,
                                                         const std::vector<std::string>& class_names) {
  detail::require(variant.per_iteration.size() == baseline.per_iteration.size(),
                  "baseline and variant must share Monte Carlo iterations");
  std::vector<MetricComparison> out;
  auto compare = [&](const std::string& name, auto&& get) {
    std::vector<std::optional<double>> a, b;
    std::vector<double> pa, pb;
    for (std::size_t i = 0; i < variant.per_iteration.size(); ++i) {
      const std::optional<double> x = get(variant.per_iteration[i]);
      const std::optional<double> y = get(baseline.per_iteration[i]);
      a.push_back(x);
      b.push_back(y);
      if (x && y) {
        pa.push_back(*x);
        pb.push_back(*y);
      }
    }
    MetricComparison m{name, summarize(a), summarize(b), std::nullopt};
    if (pa.size() >= 2) {
      m.test = paired_t_test(pa, pb);
    }
    out.push_back(std::move(m));
  };
  compare("oa", [](const AccuracyReport& r) { return std::optional<double>(r.overall); });
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    compare("ua_" + class_names[c], [c](const AccuracyReport& r) { return r.users[c]; });
  }
  for (std::size_t c = 0; c < class_names.size(); ++c) {
    compare("pa_" + class_names[c], [c](const AccuracyReport& r) { return r.producers[c]; });
  }
  return out;
}

inline std::string comparison_csv(const std::vector<MetricComparison>& rows, const std::string& baseline_name) {
  std::string out = "metric,mean,sd,baseline,baseline_mean,baseline_sd,t,p,df\n";
  for (const auto& r : rows) {
    out += r.metric + "," + format_optional(r.variant.mean) + "," + format_optional(r.variant.sd) + "," +
           baseline_name + "," + format_optional(r.baseline.mean) + "," + format_optional(r.baseline.sd) + ",";
    if (r.test) {
      out += format_double(r.test->t) + "," + format_double(r.test->p) + "," + std::to_string(r.test->df);
    } else {
      out += ",,";
    }
    out += "\n";
  }
  return out;
}

inline std::string iji_csv_header() { return "map_id,m,E,iji\n"; }

inline std::string iji_csv_row(const std::string& map_id, const LabelRaster& map) {
  const auto table = edge_table(map);
  return map_id + "," + std::to_string(table.m) + "," + std::to_string(table.total()) + "," +
         format_optional(iji(table)) + "\n";
}

struct VariantResult {
  std::string name;
  std::size_t n_maps = 0;
  MonteCarloResult mc;
  std::optional<double> iji;
  std::vector<MetricComparison> comparison;  // empty for the baseline
};

struct PipelineReport {
  std::vector<VariantResult> variants;  // baseline first
  std::filesystem::path manifest;
  std::filesystem::path summary;
};

namespace detail {

struct PlannedVariant {
  std::string name;
  FusionMode mode = FusionMode::unweighted;
  ClusterMethod method = ClusterMethod::kmeans;
  std::size_t k = 0;
  std::size_t group = 0;  // 1-based
};

inline std::vector<std::string> variant_files(const std::string& name, bool fused) {
  std::vector<std::string> files;
  if (fused) {
    files.push_back(name + "_prob.json");
  }
  files.push_back(name + "_label.json");
  files.push_back(name + "_mc.csv");
  if (fused) {
    files.push_back(name + "_ttest.csv");
  }
  return files;
}

}  // namespace detail

inline PipelineReport run_pipeline(const PipelineConfig& config) {
  config.validate();
  namespace fs = std::filesystem;

  // Validate planned work against the inputs before computing anything.
  const auto headers = list_raster_headers(config.input_dir);
  const std::size_t n_listed = static_cast<std::size_t>(std::count_if(headers.begin(), headers.end(), [&](const auto& h) {
    return !(fs::exists(config.reference) && fs::equivalent(h, config.reference));
  }));
  if (!fs::exists(config.reference)) {
    throw ValidationError("missing reference '" + config.reference.string() + "'");
  }
  if (config.has_mode(FusionMode::clustered)) {
    detail::require(n_listed >= 2, "clustering requires at least two investigator maps");
    for (std::size_t k : config.k_values) {
      detail::require(k <= n_listed, "invalid k=" + std::to_string(k) + ": only " + std::to_string(n_listed) +
                                         " investigator maps");
    }
  }
  if (config.has_mode(FusionMode::weighted)) {
    detail::require(n_listed >= 2, "weighted fusion requires at least two investigator maps");
  }

  const auto reference = load_label_raster(config.reference);
  auto inv = load_investigators(config.input_dir, config.epsilon, config.reference);
  detail::require(inv.maps.front().shape() == reference.shape(), "shape mismatch between investigators and reference");
  const auto& class_names = reference.shape().class_names();

  std::vector<detail::PlannedVariant> plan;
  if (config.has_mode(FusionMode::unweighted)) plan.push_back({"unweighted", FusionMode::unweighted});
  if (config.has_mode(FusionMode::weighted)) plan.push_back({"weighted", FusionMode::weighted});
  if (config.has_mode(FusionMode::clustered)) {
    for (auto method : config.methods) {
      for (std::size_t k : config.k_values) {
        for (std::size_t g = 1; g <= k; ++g) {
          plan.push_back({to_string(method) + "_k" + std::to_string(k) + "g" + std::to_string(g), FusionMode::clustered,
                          method, k, g});
        }
      }
    }
  }

  fs::create_directories(config.output_dir);
  const fs::path manifest_path = config.output_dir / "manifest.json";
  nlohmann::json manifest;
  manifest["seed"] = config.seed;
  manifest["investigators"] = inv.ids;
  manifest["outputs"] = nlohmann::json::array();
  auto add_entry = [&](const std::string& name, std::vector<std::string> files) {
    manifest["outputs"].push_back({{"variant", name}, {"files", std::move(files)}, {"status", "planned"}});
  };
  add_entry(kBaselineName, detail::variant_files(kBaselineName, false));
  std::vector<std::string> shared{"summary.csv", "iji.csv"};
  if (config.has_mode(FusionMode::weighted)) shared.push_back("weights.csv");
  if (config.has_mode(FusionMode::clustered)) {
    for (auto method : config.methods) {
      for (std::size_t k : config.k_values) {
        const std::string stem = to_string(method) + "_k" + std::to_string(k);
        shared.push_back(stem + "_model.json");
        if (method == ClusterMethod::kmeans) shared.push_back(stem + "_centers.json");
      }
    }
  }
  for (const auto& v : plan) {
    add_entry(v.name, detail::variant_files(v.name, true));
  }
  add_entry("shared", shared);
  write_text_file(manifest_path, manifest.dump(2) + "\n");

  // Shared inputs for every variant.
  const auto samples =
      monte_carlo_samples(reference, config.mc_iterations, config.per_class_samples, config.seed);
  auto assess = [&](const LabelRaster& labels) {
    return monte_carlo_assess(labels, reference, samples, config.per_class_samples, config.seed);
  };

  PipelineReport report;
  report.manifest = manifest_path;
  const auto baseline_labels = plurality_composite(inv.maps);
  VariantResult baseline{kBaselineName, inv.maps.size(), assess(baseline_labels), iji(baseline_labels), {}};
  save_label_raster(baseline_labels, config.output_dir / (kBaselineName + "_label.json"));
  write_text_file(config.output_dir / (kBaselineName + "_mc.csv"), monte_carlo_csv(baseline.mc, class_names));
  manifest["outputs"][0]["status"] = "done";

  std::vector<double> kappa;
  if (config.has_mode(FusionMode::weighted)) {
    const auto est = estimate_weights(inv.maps, FusionConfig{config.epsilon, {}, {}}, config.weight_subsample, config.seed);
    kappa = est.kappa;
    save_weights_csv(config.output_dir / "weights.csv", inv.ids, kappa);
  }

  std::map<std::pair<ClusterMethod, std::size_t>, std::vector<std::vector<std::size_t>>> groups;
  if (config.has_mode(FusionMode::clustered)) {
    const auto features = EntropyFeatureMatrix::from_maps(inv.maps);
    for (auto method : config.methods) {
      for (std::size_t k : config.k_values) {
        const auto model = cluster_maps(features, method, k, config.seed);
        const std::string stem = to_string(method) + "_k" + std::to_string(k);
        std::string centers_file;
        if (method == ClusterMethod::kmeans) {
          centers_file = stem + "_centers.json";
          std::vector<double> interleaved(features.n_features() * k);
          for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t i = 0; i < features.n_features(); ++i) {
              interleaved[i * k + c] = model.centers[c][i];
            }
          }
          detail::save_f32_stack(config.output_dir / centers_file, reference.shape(), k, interleaved);
        }
        write_text_file(config.output_dir / (stem + "_model.json"), cluster_model_to_json(model, centers_file).dump(2) + "\n");
        groups[{method, k}] = cluster_members(model.assignment, k);
      }
    }
  }

  std::vector<VariantResult> results(plan.size());
  std::vector<std::string> variant_iji_rows(plan.size());
  parallel_for(plan.size(), [&](std::size_t t) {
    const auto& v = plan[t];
    std::vector<std::reference_wrapper<const ProbabilityRaster>> subset;
    FusionConfig fc{config.epsilon, {}, {}};
    if (v.mode == FusionMode::clustered) {
      for (std::size_t j : groups.at({v.method, v.k}).at(v.group - 1)) {
        subset.push_back(std::cref(inv.maps[j]));
      }
    } else {
      for (const auto& m : inv.maps) {
        subset.push_back(std::cref(m));
      }
      if (v.mode == FusionMode::weighted) {
        fc.weights = kappa;
      }
    }
    const auto field = fuse(subset, fc);
    const auto labels = fused_label_map(field);
    save_posterior_field(field, config.output_dir / (v.name + "_prob.json"));
    save_label_raster(labels, config.output_dir / (v.name + "_label.json"));
    VariantResult r{v.name, subset.size(), assess(labels), iji(labels), {}};
    variant_iji_rows[t] = iji_csv_row(v.name, labels);
    r.comparison = compare_to_baseline(r.mc, baseline.mc, class_names);
    write_text_file(config.output_dir / (v.name + "_mc.csv"), monte_carlo_csv(r.mc, class_names));
    write_text_file(config.output_dir / (v.name + "_ttest.csv"), comparison_csv(r.comparison, kBaselineName));
    results[t] = std::move(r);
  });
  for (std::size_t t = 0; t < plan.size(); ++t) {
    manifest["outputs"][t + 1]["status"] = "done";
  }

  report.variants.push_back(std::move(baseline));
  for (auto& r : results) {
    report.variants.push_back(std::move(r));
  }

  std::string iji_rows = iji_csv_header();
  for (std::size_t j = 0; j < inv.maps.size(); ++j) {
    iji_rows += iji_csv_row(inv.ids[j], hard_classify(inv.maps[j]));
  }
  iji_rows += iji_csv_row(kBaselineName, baseline_labels);
  for (const auto& row : variant_iji_rows) {
    iji_rows += row;
  }
  write_text_file(config.output_dir / "iji.csv", iji_rows);

  std::string summary = "variant,n_maps,oa,oa_sd";
  for (const auto& n : class_names) summary += ",ua_" + n;
  for (const auto& n : class_names) summary += ",pa_" + n;
  summary += ",iji,oa_t,oa_p\n";
  for (const auto& v : report.variants) {
    std::vector<std::optional<double>> oa;
    std::vector<std::vector<std::optional<double>>> ua(class_names.size()), pa(class_names.size());
    for (const auto& it : v.mc.per_iteration) {
      oa.push_back(it.overall);
      for (std::size_t c = 0; c < class_names.size(); ++c) {
        ua[c].push_back(it.users[c]);
        pa[c].push_back(it.producers[c]);
      }
    }
    const auto s = summarize(oa);
    summary += v.name + "," + std::to_string(v.n_maps) + "," + format_optional(s.mean) + "," + format_optional(s.sd);
    for (const auto& col : ua) summary += "," + format_optional(summarize(col).mean);
    for (const auto& col : pa) summary += "," + format_optional(summarize(col).mean);
    summary += "," + format_optional(v.iji) + ",";
    if (!v.comparison.empty() && v.comparison.front().test) {
      summary += format_double(v.comparison.front().test->t) + "," + format_double(v.comparison.front().test->p);
    } else {
      summary += ",";
    }
    summary += "\n";
  }
  report.summary = config.output_dir / "summary.csv";
  write_text_file(report.summary, summary);
  manifest["outputs"].back()["status"] = "done";
  write_text_file(manifest_path, manifest.dump(2) + "\n");
  return report;
}

}  // namespace lcfusion
