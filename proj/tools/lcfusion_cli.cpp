// lcfusion command-line front end.
//
//   lcfusion simulate <scenario.json> -o DIR
//   lcfusion fuse -i DIR [--weights auto|file.csv] [--cluster kmeans|kmedoids -k N --group G] -o DIR
//   lcfusion entropy -i MAP -o MAP
//   lcfusion assess --pred MAP --ref MAP [--mc N --per-class M --seed S]
//   lcfusion iji MAP
//   lcfusion pipeline <config.json>
//
// Exit codes: 0 success, 2 validation error, 1 runtime error.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "lcfusion/lcfusion.hpp"

namespace fs = std::filesystem;
using namespace lcfusion;

namespace {

void run_simulate(const fs::path& scenario_path, const fs::path& out_dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(scenario_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed scenario: ") + e.what());
  }
  const auto scenario = scenario_from_json(j);
  materialize_scenario(scenario, out_dir);
  std::cout << "wrote reference and " << scenario.investigators.size() << " investigator maps to " << out_dir.string()
            << "\n";
}

void run_fuse(const fs::path& in_dir, const std::string& weights, const std::optional<std::string>& cluster,
              std::optional<std::size_t> k, std::optional<std::size_t> group, std::uint64_t seed,
              const fs::path& out_dir) {
  if (cluster) {
    detail::require(k.has_value() && group.has_value(), "--cluster requires -k and --group");
  } else {
    detail::require(!k && !group, "-k and --group are only valid with --cluster");
  }
  auto inv = load_investigators(in_dir);
  fs::create_directories(out_dir);

  std::vector<double> kappa;
  if (weights == "auto") {
    kappa = estimate_weights(inv.maps, FusionConfig{}, kDefaultWeightSubsample, seed).kappa;
    save_weights_csv(out_dir / "weights.csv", inv.ids, kappa);
  } else if (!weights.empty()) {
    const auto table = load_weights_csv(weights);
    for (const auto& id : inv.ids) {
      const auto it = std::find(table.ids.begin(), table.ids.end(), id);
      detail::require(it != table.ids.end(), "weights file has no entry for '" + id + "'");
      kappa.push_back(table.kappa[static_cast<std::size_t>(it - table.ids.begin())]);
    }
  }

  std::vector<std::size_t> members(inv.maps.size());
  std::iota(members.begin(), members.end(), std::size_t{0});
  if (cluster) {
    const auto method = parse_cluster_method(*cluster);
    const auto features = EntropyFeatureMatrix::from_maps(inv.maps);
    const auto model = cluster_maps(features, method, *k, seed);
    detail::require(*group >= 1 && *group <= model.k, "--group must be between 1 and k");
    write_text_file(out_dir / "cluster_model.json", cluster_model_to_json(model).dump(2) + "\n");
    members = cluster_members(model.assignment, model.k).at(*group - 1);
  }

  std::vector<std::reference_wrapper<const ProbabilityRaster>> subset;
  FusionConfig config;
  for (std::size_t j : members) {
    subset.push_back(std::cref(inv.maps[j]));
    if (!kappa.empty()) {
      config.weights.push_back(kappa[j]);
    }
  }
  const auto field = fuse(subset, config);
  save_posterior_field(field, out_dir / "fused_prob.json", out_dir / "fused_alpha.json");
  save_label_raster(fused_label_map(field), out_dir / "fused_label.json");
  std::cout << "fused " << subset.size() << " maps into " << out_dir.string() << "\n";
}

void run_entropy(const fs::path& in, const fs::path& out) {
  save_entropy_raster(entropy_map(load_probability_raster(in)), out);
}

void run_assess(const fs::path& pred_path, const fs::path& ref_path, std::optional<std::size_t> mc,
                std::size_t per_class, std::uint64_t seed) {
  const auto pred = load_label_raster(pred_path);
  const auto ref = load_label_raster(ref_path);
  if (mc) {
    const auto result = monte_carlo_assess(pred, ref, *mc, per_class, seed);
    std::cout << monte_carlo_csv(result, ref.shape().class_names());
    return;
  }
  const auto report = accuracy_report(confusion(pred, ref));
  MonteCarloResult single;
  single.per_iteration.push_back(report);
  std::cout << monte_carlo_csv(single, ref.shape().class_names());
}

void run_iji(const fs::path& map_path) {
  const auto map = load_label_raster(map_path);
  std::cout << iji_csv_header() << iji_csv_row(map_path.stem().string(), map);
}

void run_pipeline_command(const fs::path& config_path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(config_path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(std::string("malformed pipeline config: ") + e.what());
  }
  const auto report = run_pipeline(pipeline_config_from_json(j, config_path.parent_path()));
  std::cout << read_text_file(report.summary);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian fusion of investigator land-cover probability maps"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;

  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic scene and investigator maps");
  std::string scenario_path, sim_out;
  simulate->add_option("scenario", scenario_path, "Scenario JSON")->required();
  simulate->add_option("-o,--output", sim_out, "Output directory")->required();

  auto* fuse_cmd = app.add_subcommand("fuse", "Fuse investigator maps");
  std::string fuse_in, fuse_out, weights;
  std::optional<std::string> cluster;
  std::optional<std::size_t> k, group;
  fuse_cmd->add_option("-i,--input", fuse_in, "Directory of investigator rasters")->required();
  fuse_cmd->add_option("--weights", weights, "'auto' to infer kappa, or a weights CSV");
  fuse_cmd->add_option("--cluster", cluster, "kmeans or kmedoids");
  fuse_cmd->add_option("-k", k, "Cluster count");
  fuse_cmd->add_option("--group", group, "1-based cluster group to fuse");
  fuse_cmd->add_option("--seed", seed, "Random seed");
  fuse_cmd->add_option("-o,--output", fuse_out, "Output directory")->required();

  auto* entropy_cmd = app.add_subcommand("entropy", "Pixel-wise entropy of a probability raster");
  std::string entropy_in, entropy_out;
  entropy_cmd->add_option("-i,--input", entropy_in, "Probability raster header")->required();
  entropy_cmd->add_option("-o,--output", entropy_out, "Entropy raster header")->required();

  auto* assess_cmd = app.add_subcommand("assess", "Accuracy of a label map against a reference");
  std::string pred_path, ref_path;
  std::optional<std::size_t> mc;
  std::size_t per_class = 300;
  assess_cmd->add_option("--pred", pred_path, "Predicted label raster")->required();
  assess_cmd->add_option("--ref", ref_path, "Reference label raster")->required();
  assess_cmd->add_option("--mc", mc, "Monte Carlo iterations");
  assess_cmd->add_option("--per-class", per_class, "Samples per class");
  assess_cmd->add_option("--seed", seed, "Random seed");

  auto* iji_cmd = app.add_subcommand("iji", "Interspersion and juxtaposition index of a label map");
  std::string iji_map;
  iji_cmd->add_option("map", iji_map, "Label raster header")->required();

  auto* pipeline_cmd = app.add_subcommand("pipeline", "Run the full fusion and assessment workflow");
  std::string config_path;
  pipeline_cmd->add_option("config", config_path, "Pipeline config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*simulate) run_simulate(scenario_path, sim_out);
    if (*fuse_cmd) run_fuse(fuse_in, weights, cluster, k, group, seed, fuse_out);
    if (*entropy_cmd) run_entropy(entropy_in, entropy_out);
    if (*assess_cmd) run_assess(pred_path, ref_path, mc, per_class, seed);
    if (*iji_cmd) run_iji(iji_map);
    if (*pipeline_cmd) run_pipeline_command(config_path);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
