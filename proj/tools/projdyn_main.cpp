// projdyn: screen dynamics for ray trajectories with bivector impulsions.
//
// Exit codes: 0 = all requested checks pass, 1 = an analysis verdict failed,
// 2 = configuration or runtime error.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "projdyn/scenario.hpp"

namespace {

std::string default_out_dir() {
  if (const char* env = std::getenv("PROJDYN_OUT_DIR")) return env;
  return "projdyn-out";
}

struct GlobalOpts {
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
};

void apply_overrides(projdyn::ScenarioConfig& cfg, const GlobalOpts& g) {
  if (g.seed) cfg.seed = *g.seed;
  if (g.tol) {
    cfg.integrator.rel_tol = *g.tol;
    cfg.integrator.abs_tol = *g.tol * 1e-2;
  }
}

std::string pick_out_dir(const projdyn::ScenarioConfig& cfg,
                         const std::string& flag_value) {
  if (!flag_value.empty()) return flag_value;
  if (cfg.output_dir) return *cfg.output_dir;
  return default_out_dir();
}

int report_outcome(const projdyn::RunResult& res) {
  for (const auto& path : res.artifacts)
    std::cout << "wrote " << path << "\n";
  std::cout << "verdict: " << (res.exit_code == 0 ? "pass" : "fail") << "\n";
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "projdyn: projective particle dynamics on screens\n"
      "Integrates ray trajectories with bivector impulsions under homogeneous\n"
      "force fields and verifies their structural invariants."};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand name

  GlobalOpts global;
  std::string out_flag;
  std::uint64_t seed_flag = 0;
  double tol_flag = 0.0;
  app.add_option("--out", out_flag, "output directory (overrides config)");
  auto* seed_opt =
      app.add_option("--seed", seed_flag, "override the scenario seed");
  auto* tol_opt = app.add_option(
      "--tol", tol_flag, "override integrator tolerances (rel = tol, abs = tol/100)");

  std::string config_path;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "scenario config (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
  };

  auto* sim = app.add_subcommand("simulate",
                                 "integrate a scenario and run its analyses");
  add_config(sim);
  auto* cmp = app.add_subcommand(
      "compare-screens",
      "integrate on one screen, transport to another, re-integrate and compare");
  add_config(cmp);
  auto* divg = app.add_subcommand("check-divergence",
                                  "homogeneity / closedness identities of a field");
  add_config(divg);
  auto* rmap = app.add_subcommand("return-map",
                                  "leafwise return map of a central field");
  add_config(rmap);
  auto* vfield = app.add_subcommand("validate-field",
                                    "sampled validation of field properties");
  add_config(vfield);
  auto* demo = app.add_subcommand(
      "kepler-demo", "run the built-in bounded-orbit demo scenario");

  CLI11_PARSE(app, argc, argv);
  if (*seed_opt) global.seed = seed_flag;
  if (*tol_opt) global.tol = tol_flag;

  try {
    projdyn::ScenarioConfig cfg;
    if (app.got_subcommand(demo))
      cfg = projdyn::parse_config(projdyn::kepler_demo_config_text());
    else
      cfg = projdyn::load_config_file(config_path);
    apply_overrides(cfg, global);
    std::string out_dir = pick_out_dir(cfg, out_flag);

    projdyn::RunResult res;
    if (app.got_subcommand(sim) || app.got_subcommand(demo))
      res = projdyn::run_simulate(cfg, out_dir);
    else if (app.got_subcommand(cmp))
      res = projdyn::run_compare_screens(cfg, out_dir);
    else if (app.got_subcommand(divg))
      res = projdyn::run_check_divergence(cfg, out_dir);
    else if (app.got_subcommand(rmap))
      res = projdyn::run_return_map(cfg, out_dir);
    else if (app.got_subcommand(vfield))
      res = projdyn::run_validate_field(cfg, out_dir);
    return report_outcome(res);
  } catch (const projdyn::ValidationError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
