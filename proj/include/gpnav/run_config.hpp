#pragma once

#include "gpnav/harness.hpp"
#include "gpnav/optimizer.hpp"
#include "gpnav/scene.hpp"

#include "json.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

namespace gpnav {

/// Merged command-line configuration. Absent optionals fall back to the
/// per-system defaults.
struct RunConfig {
  std::optional<double> lengthscale;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  std::optional<double> epsilon;
  std::optional<double> lambda_s;
  std::optional<double> lambda_o;
  std::optional<double> lambda_g;
  std::optional<double> eta;
  std::optional<double> grad_tol;
  std::optional<int> q;
  std::optional<int> max_iters;

  std::optional<double> min_cell;
  int max_depth = 12;
  std::size_t max_training_points = 5000;

  int trials = 100;
  int workers = 1;
  int prm_samples = 300;
  int prm_k = 10;

  void validate() const;
};

/// Reads a JSON object whose keys mirror the long flag names with dashes
/// replaced by underscores. Unknown keys and wrong types are rejected with
/// their JSON path.
RunConfig run_config_from_json(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json run_config_to_json(const RunConfig& config);

SceneConfig scene_config(const RunConfig& config, bool single_field);
ChompConfig chomp_config(const RunConfig& config, const SystemModel& system);
PlannerConfig planner_config(const RunConfig& config, const SystemModel& system);

/// Preset name, or "height,radius".
SystemModel parse_system(const std::string& text);

/// "x,y" or "x,y,z".
std::vector<double> parse_point(const std::string& text);

}  // namespace gpnav
