#pragma once

// Scenario configs (JSON), their validation, and the drivers behind the CLI
// subcommands: simulate, compare-screens, check-divergence, return-map,
// validate-field. Exposed as a library so the test suite can exercise the
// exact code paths the binary runs.

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

#include "projdyn/analysis.hpp"
#include "projdyn/force.hpp"
#include "projdyn/integrate.hpp"
#include "projdyn/screen.hpp"

namespace projdyn {

using Json = nlohmann::ordered_json;

struct AnalysisRequest {
  std::string name;
  Json params;
};

struct ReturnMapRequest {
  double source_angle = 0.0;
  double target_angle = 0.0;
  int k = 1;
  LeafState leaf_state;
  std::optional<double> expect_identity_tol;
};

struct ScenarioConfig {
  std::string name;
  int dim = 3;
  std::uint64_t seed = 0;
  std::optional<ScreenSpec> screen;
  std::optional<ScreenSpec> screen2;  // compare-screens target
  std::optional<ForceFieldSpec> field;
  std::optional<ScreenState> initial_screen_state;
  std::optional<ProjectiveState> initial_projective_state;
  double t_end = 0.0;
  IntegratorConfig integrator;
  std::vector<AnalysisRequest> analyses;
  std::optional<ReturnMapRequest> return_map_request;
  int validate_samples = 200;
  double validate_tol = 1e-10;
  double compare_tol = 1e-6;
  std::optional<std::string> output_dir;
};

/// Parses and validates a config document. Malformed JSON raises Error;
/// schema violations raise ValidationError listing every violation with its
/// field path.
ScenarioConfig parse_config(const std::string& text);

ScenarioConfig load_config_file(const std::string& path);

struct RunResult {
  int exit_code = 2;
  Json report;
  std::vector<std::string> artifacts;  // files written
};

RunResult run_simulate(const ScenarioConfig& cfg, const std::string& out_dir);
RunResult run_compare_screens(const ScenarioConfig& cfg,
                              const std::string& out_dir);
RunResult run_check_divergence(const ScenarioConfig& cfg,
                               const std::string& out_dir);
RunResult run_return_map(const ScenarioConfig& cfg, const std::string& out_dir);
RunResult run_validate_field(const ScenarioConfig& cfg,
                             const std::string& out_dir);

/// The built-in demo scenario (also shipped as configs/kepler_demo.json).
const char* kepler_demo_config_text();

/// Trajectory table I/O (CSV, one row per output-grid point). Doubles are
/// printed with 17 significant digits so a re-import is bit-exact.
void export_trajectory_csv(const Trajectory& traj, const std::string& path);

/// Rebuilds a trajectory from an exported table. Node derivatives are
/// recomputed from the screen and field, so dense-output consumers work on
/// imported data as well.
Trajectory import_trajectory_csv(const std::string& path,
                                 const ScreenSpec& screen,
                                 const ForceFieldSpec& field);

/// Write-then-rename so concurrent readers never see partial output.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace projdyn
