#include "gpnav/cloud.hpp"
#include "gpnav/error.hpp"
#include "gpnav/harness.hpp"
#include "gpnav/optimizer.hpp"
#include "gpnav/run_config.hpp"
#include "gpnav/scene.hpp"

#include "CLI11.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace gpnav;

namespace {

// Flags shared by the subcommands that accept a run config. Each flag, when
// given, overrides the matching config file value.
struct ConfigFlags {
  std::string config_path;
  double lengthscale = 0, noise_sigma = 0, epsilon = 0, lambda_s = 0, lambda_o = 0, lambda_g = 0, eta = 0,
         grad_tol = 0, min_cell = 0;
  int q = 0, max_iters = 0, max_depth = 0, trials = 0, workers = 0, prm_samples = 0, prm_k = 0;
  std::size_t max_training_points = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, CLI::Option*>> options;

  template <typename T>
  void add(CLI::App* app, const std::string& flag, T& target, const std::string& help) {
    options.emplace_back(flag, app->add_option(flag, target, help));
  }

  bool given(const std::string& flag) const {
    for (const auto& [name, opt] : options)
      if (name == flag) return opt->count() > 0;
    return false;
  }

  RunConfig resolve() const {
    RunConfig c = config_path.empty() ? RunConfig{} : load_run_config(config_path);
    if (given("--lengthscale")) c.lengthscale = lengthscale;
    if (given("--noise-sigma")) c.noise_sigma = noise_sigma;
    if (given("--seed")) c.seed = seed;
    if (given("--epsilon")) c.epsilon = epsilon;
    if (given("--lambda-s")) c.lambda_s = lambda_s;
    if (given("--lambda-o")) c.lambda_o = lambda_o;
    if (given("--lambda-g")) c.lambda_g = lambda_g;
    if (given("--eta")) c.eta = eta;
    if (given("--grad-tol")) c.grad_tol = grad_tol;
    if (given("--q")) c.q = q;
    if (given("--max-iters")) c.max_iters = max_iters;
    if (given("--min-cell")) c.min_cell = min_cell;
    if (given("--max-depth")) c.max_depth = max_depth;
    if (given("--max-training-points")) c.max_training_points = max_training_points;
    if (given("--trials")) c.trials = trials;
    if (given("--workers")) c.workers = workers;
    if (given("--prm-samples")) c.prm_samples = prm_samples;
    if (given("--prm-k")) c.prm_k = prm_k;
    c.validate();
    return c;
  }
};

void add_config_file(CLI::App* app, ConfigFlags& f) {
  app->add_option("--config", f.config_path, "JSON run config; keys mirror the long flags with '_' for '-'")
      ->check(CLI::ExistingFile);
}

void add_scene_flags(CLI::App* app, ConfigFlags& f) {
  f.add(app, "--noise-sigma", f.noise_sigma, "Gaussian noise sigma (m) added to both clouds before fitting [0]");
  f.add(app, "--lengthscale", f.lengthscale, "Kernel lengthscale (m) [2 x mean nearest-neighbour spacing]");
  f.add(app, "--min-cell", f.min_cell, "Smallest quadtree cell (m) [system radius]");
  f.add(app, "--max-depth", f.max_depth, "Quadtree depth limit [12]");
  f.add(app, "--max-training-points", f.max_training_points, "Training-set cap per field [5000]");
}

void add_chomp_flags(CLI::App* app, ConfigFlags& f) {
  f.add(app, "--epsilon", f.epsilon, "Obstacle clearance epsilon (m) [radius + 0.1]");
  f.add(app, "--lambda-s", f.lambda_s, "Smoothness weight [0.005]");
  f.add(app, "--lambda-o", f.lambda_o, "Obstacle weight [1.0]");
  f.add(app, "--lambda-g", f.lambda_g, "Ground-constraint weight [1.0]");
  f.add(app, "--q", f.q, "Waypoint count Q [50]");
  f.add(app, "--eta", f.eta, "Step-size scale eta [computed from system height and Q]");
  f.add(app, "--grad-tol", f.grad_tol, "Convergence threshold on |A^-1 grad|_inf [computed from system height and Q]");
  f.add(app, "--max-iters", f.max_iters, "Iteration cap [500]");
  f.add(app, "--prm-samples", f.prm_samples, "PRM sample count [300]");
  f.add(app, "--prm-k", f.prm_k, "PRM neighbour count [10]");
}

std::vector<std::string> split(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

LabelledCloud noisy(LabelledCloud cloud, const RunConfig& c) {
  if (c.noise_sigma > 0) {
    cloud.ground = add_gaussian_noise(cloud.ground, c.noise_sigma, c.seed * 2 + 1);
    cloud.nonground = add_gaussian_noise(cloud.nonground, c.noise_sigma, c.seed * 2 + 2);
    cloud = LabelledCloud::from_parts(std::move(cloud.ground), std::move(cloud.nonground));
  }
  return cloud;
}

void print_scene_summary(const SceneModel& s) {
  std::printf("system %s: height %.3f m, radius %.3f m\n", s.system.name.c_str(), s.system.height, s.system.radius);
  std::printf("ground field: %zu training points, lengthscale %.4f m\n", s.ground_field->size(),
              s.ground_field->params().lengthscale);
  if (s.obstacle_field)
    std::printf("obstacle field: %zu training points (%zu classified obstacle points), lengthscale %.4f m\n",
                s.obstacle_field->size(), s.obstacle_points.size(), s.obstacle_field->params().lengthscale);
  else
    std::printf("obstacle field: none (no obstacle within reach)\n");
  if (s.single_field)
    std::printf("single field: %zu training points, lengthscale %.4f m\n", s.single_field->size(),
                s.single_field->params().lengthscale);
  std::printf("quadtree: %zu leaves, %zu free, %zu free-cell edges\n", s.quadtree.leaves().size(),
              s.quadtree.free_leaf_count(), s.graph.edge_count());
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string spec, out;
  std::uint64_t seed = 0;
  double noise_sigma = 0;
  bool omit_steps = false, ascii = false;
};

int cmd_synth(const SynthArgs& a) {
  SceneSpec spec = load_scene_spec(a.spec);
  if (a.omit_steps) spec.omit_steps = true;
  LabelledCloud cloud = synth_scene(spec, a.seed);
  RunConfig rc;
  rc.noise_sigma = a.noise_sigma;
  rc.seed = a.seed;
  cloud = noisy(std::move(cloud), rc);
  const auto enc = a.ascii ? PlyEncoding::kAscii : PlyEncoding::kBinaryLittleEndian;
  const std::string g = a.out + "_ground.ply", n = a.out + "_nonground.ply";
  save_ply(cloud.ground, g, enc);
  save_ply(cloud.nonground, n, enc);
  std::printf("wrote %s (%zu points) and %s (%zu points)\n", g.c_str(), cloud.ground.size(), n.c_str(),
              cloud.nonground.size());
  return 0;
}

struct BuildArgs {
  std::string ground, nonground, system, out;
  bool single_field = false;
};

int cmd_build(const BuildArgs& a, const ConfigFlags& flags) {
  const RunConfig rc = flags.resolve();
  const SystemModel system = parse_system(a.system);
  Points3 ground = load_ply(a.ground);
  Points3 nonground = a.nonground.empty() ? Points3{} : load_ply(a.nonground);
  if (ground.empty()) throw validation_error("ground cloud '" + a.ground + "' is empty");
  LabelledCloud cloud = noisy(LabelledCloud::from_parts(std::move(ground), std::move(nonground)), rc);
  const SceneModel scene = build_scene(cloud, system, scene_config(rc, a.single_field));
  print_scene_summary(scene);
  save_scene(scene, a.out);
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

struct PlanArgs {
  std::string scene, start, goal, planner = "ours", out;
};

Point3 endpoint(const SceneModel& scene, const std::string& text, const char* which) {
  const auto v = parse_point(text);
  const Point2 xy(v[0], v[1]);
  if (!scene.plan_bounds().contains(xy))
    throw validation_error(std::string(which) + " (" + text + ") lies outside the scene bounds");
  return v.size() == 3 ? Point3(v[0], v[1], v[2]) : lift_endpoint(scene, xy);
}

int cmd_plan(const PlanArgs& a, const ConfigFlags& flags) {
  const RunConfig rc = flags.resolve();
  const SceneModel scene = load_scene(a.scene);
  const PlannerId planner = planner_from_string(a.planner);
  const Point3 start = endpoint(scene, a.start, "start");
  const Point3 goal = endpoint(scene, a.goal, "goal");
  const PlanOutcome out = run_planner(planner, scene, start, goal, planner_config(rc, scene.system), rc.seed);
  if (!out.trajectory) {
    std::fprintf(stderr, "gpnav plan: %s\n", out.message.c_str());
    return exit_code(out.failure.value_or(ErrorKind::kValidation));
  }
  const Trajectory& traj = *out.trajectory;
  const WaypointDiagnostics diag = diagnose(traj, scene);
  if (fs::path(a.out).extension() == ".json")
    write_trajectory_json(traj, diag, a.out);
  else
    write_trajectory_csv(traj, a.out);

  const CheckResult cf = check_collision_free(traj, scene, scene.system);
  const CheckResult fe = check_feasible(traj, scene, scene.system);
  double min_do = std::numeric_limits<double>::infinity(), min_dg = min_do, max_dg = -min_do;
  for (int i = 0; i < traj.size(); ++i) {
    min_do = std::min(min_do, diag.obstacle_distance[i]);
    min_dg = std::min(min_dg, diag.ground_distance[i]);
    max_dg = std::max(max_dg, diag.ground_distance[i]);
  }
  std::printf("planner %s: %d waypoints, %d iterations%s\n", to_string(planner), traj.size(), out.iterations,
              out.converged ? "" : " (not converged)");
  std::printf("min d_o %.4f m, d_g in [%.4f, %.4f] m, collision-free %s, feasible %s\n", min_do, min_dg, max_dg,
              cf.ok ? "yes" : "no", fe.ok ? "yes" : "no");
  std::printf("wrote %s\n", a.out.c_str());
  if (!out.converged) {
    std::fprintf(stderr, "gpnav plan: optimizer stopped at the iteration cap without converging\n");
    return exit_code(ErrorKind::kNonConvergence);
  }
  return 0;
}

struct EvalArgs {
  std::string scene, spec, systems = "human,roomba", planners = "ours,astar_offset,prm_offset,chomp_single_gpdf",
                            variants = "spec", flat_systems = "roomba", out;
};

int cmd_eval(const EvalArgs& a, const ConfigFlags& flags) {
  const RunConfig rc = flags.resolve();
  std::vector<PlannerId> planners;
  for (const auto& p : split(a.planners)) planners.push_back(planner_from_string(p));
  if (planners.empty()) throw validation_error("no planners given");

  std::vector<SceneModel> scenes;
  std::vector<std::string> labels;
  if (!a.scene.empty()) {
    scenes.push_back(load_scene(a.scene));
    labels.push_back("scene");
  } else {
    const SceneSpec base = load_scene_spec(a.spec);
    const auto flat_only = split(a.flat_systems);
    const bool need_single =
        std::find(planners.begin(), planners.end(), PlannerId::kChompSingleGpdf) != planners.end();
    const SceneConfig sc = scene_config(rc, need_single);
    // (variant, system) pairs; flat-only systems are moved to the step-less room.
    std::vector<std::pair<std::string, std::string>> runs;
    for (const auto& variant : split(a.variants)) {
      if (variant != "spec" && variant != "flat") throw validation_error("unknown variant '" + variant + "'");
      for (const auto& name : split(a.systems)) {
        const bool flat_only_system = std::find(flat_only.begin(), flat_only.end(), name) != flat_only.end();
        std::pair<std::string, std::string> run{flat_only_system && !base.steps.empty() ? "flat" : variant, name};
        if (std::find(runs.begin(), runs.end(), run) == runs.end()) runs.push_back(run);
      }
    }
    if (runs.empty()) throw validation_error("no systems given");
    scenes.reserve(runs.size());
    for (const std::string variant : {"spec", "flat"}) {
      SceneSpec spec = base;
      if (variant == "flat") spec.omit_steps = true;
      std::optional<LabelledCloud> cloud;
      std::shared_ptr<const GpdfModel> ground, single;
      for (const auto& [v, name] : runs) {
        if (v != variant) continue;
        if (!cloud) {
          cloud = noisy(synth_scene(spec, rc.seed), rc);
          ground = fit_ground_field(*cloud, sc);
          if (sc.build_single_field) single = fit_single_field(*cloud, sc);
        }
        scenes.push_back(build_scene(*cloud, parse_system(name), sc, ground, single));
        labels.push_back(variant);
      }
    }
  }

  std::vector<EvalCase> cases;
  for (std::size_t i = 0; i < scenes.size(); ++i)
    cases.push_back({labels[i], &scenes[i], planners, planner_config(rc, scenes[i].system)});
  const EvalReport report = monte_carlo_eval(cases, rc.trials, rc.seed, PlannerConfig{}, rc.workers);
  write_report(report, a.out);
  std::fputs(report_to_csv(report).c_str(), stdout);
  std::printf("wrote %s.csv, %s.json, %s_trials.jsonl\n", a.out.c_str(), a.out.c_str(), a.out.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"gpnav: ground-constrained navigation with dual Gaussian-process distance fields"};
  app.require_subcommand(1);

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthesize a labelled point-cloud pair from a JSON scene spec");
  s->add_option("--spec", synth.spec, "Scene spec JSON")->required()->check(CLI::ExistingFile);
  s->add_option("--out", synth.out, "Output prefix; writes <out>_ground.ply and <out>_nonground.ply")->required();
  s->add_option("--seed", synth.seed, "Sampling seed [0]");
  s->add_option("--noise-sigma", synth.noise_sigma, "Gaussian noise sigma (m) [0]");
  s->add_flag("--omit-steps", synth.omit_steps, "Drop step platforms (step-less variant)");
  s->add_flag("--ascii", synth.ascii, "Write ASCII PLY instead of binary little-endian");

  BuildArgs build;
  ConfigFlags build_flags;
  auto* b = app.add_subcommand("build", "Fit the ground and obstacle fields and the free-space quadtree");
  b->add_option("--ground", build.ground, "Ground PLY")->required();
  b->add_option("--nonground", build.nonground, "Non-ground PLY");
  b->add_option("--system", build.system, "Preset (roomba, spot, pepper, human) or 'height,radius'")->required();
  b->add_option("--out", build.out, "Scene cache (JSON)")->required();
  b->add_flag("--single-field", build.single_field, "Also fit one 3D field over all points");
  add_config_file(b, build_flags);
  build_flags.add(b, "--seed", build_flags.seed, "Noise seed [0]");
  add_scene_flags(b, build_flags);

  PlanArgs plan;
  ConfigFlags plan_flags;
  auto* p = app.add_subcommand("plan", "Plan one trajectory on a scene cache");
  p->add_option("--scene", plan.scene, "Scene cache from 'build'")->required();
  p->add_option("--start", plan.start, "Start 'x,y' (lifted to the system height) or 'x,y,z'")->required();
  p->add_option("--goal", plan.goal, "Goal 'x,y' or 'x,y,z'")->required();
  p->add_option("--planner", plan.planner, "ours, astar_offset, prm_offset or chomp_single_gpdf [ours]");
  p->add_option("--out", plan.out, "Trajectory file; .json adds per-waypoint d_o and d_g, otherwise CSV")
      ->required();
  add_config_file(p, plan_flags);
  plan_flags.add(p, "--seed", plan_flags.seed, "PRM seed [0]");
  add_chomp_flags(p, plan_flags);

  EvalArgs eval;
  ConfigFlags eval_flags;
  auto* e = app.add_subcommand("eval", "Monte-Carlo evaluation across systems and planners");
  auto* scene_opt = e->add_option("--scene", eval.scene, "Scene cache (single system)");
  auto* spec_opt = e->add_option("--spec", eval.spec, "Scene spec JSON, synthesized per variant");
  scene_opt->excludes(spec_opt);
  e->add_option("--systems", eval.systems, "Comma-separated systems for --spec [human,roomba]");
  e->add_option("--planners", eval.planners, "Comma-separated planners [all four]");
  e->add_option("--variants", eval.variants, "Comma-separated room variants: spec, flat [spec]");
  e->add_option("--flat-systems", eval.flat_systems,
                "Systems evaluated only on the step-less variant [roomba]");
  e->add_option("--out", eval.out, "Output prefix for <out>.csv, <out>.json, <out>_trials.jsonl")->required();
  add_config_file(e, eval_flags);
  eval_flags.add(e, "--seed", eval_flags.seed, "Master seed [0]");
  eval_flags.add(e, "--trials", eval_flags.trials, "Trials per system and variant [100]");
  eval_flags.add(e, "--workers", eval_flags.workers, "Worker threads [1]");
  add_scene_flags(e, eval_flags);
  add_chomp_flags(e, eval_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : exit_code(ErrorKind::kParse);
  }

  try {
    if (s->parsed()) return cmd_synth(synth);
    if (b->parsed()) return cmd_build(build, build_flags);
    if (p->parsed()) return cmd_plan(plan, plan_flags);
    if (e->parsed()) {
      if (eval.scene.empty() == eval.spec.empty()) throw validation_error("eval needs exactly one of --scene or --spec");
      return cmd_eval(eval, eval_flags);
    }
  } catch (const Error& err) {
    std::fprintf(stderr, "gpnav: %s error: %s\n", to_string(err.kind()), err.what());
    return exit_code(err.kind());
  } catch (const std::exception& err) {
    std::fprintf(stderr, "gpnav: error: %s\n", err.what());
    return exit_code(ErrorKind::kValidation);
  }
  return 0;
}
