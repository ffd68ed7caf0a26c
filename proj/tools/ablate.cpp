// Command-line front end: scenario generation, planning, feedforward and
// feedback simulation, and standalone metrics.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <variant>

#include <CLI11.hpp>

#include "ablate/ablate.hpp"

namespace {

using namespace ablate;

// Overrides shared by every subcommand. Unset options keep the scenario's value.
struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::size_t threads = 1;
  std::optional<std::size_t> k_f;
  std::optional<double> lambda;
  std::optional<double> a, b, eps_n, eps_l, max_angle, eps_c, violation_tolerance;
  std::optional<std::size_t> power_levels, angle_levels, max_runs, attempt_factor, batch;
};

void add_global_flags(CLI::App& app, GlobalFlags& g) {
  app.add_option("--seed", g.seed, "Planner seed (overrides the scenario seed)");
  app.add_option("--threads", g.threads, "Worker threads; 1 is the reproducibility reference")
      ->check(CLI::PositiveNumber);
  app.add_option("--kf", g.k_f, "Nodes per search tree")->check(CLI::PositiveNumber);
  app.add_option("--lambda", g.lambda, "Overcut weight of the modified cost (>= 1)");
  app.add_option("--a", g.a, "Node-weight exponent");
  app.add_option("--b", g.b, "Power-weight sharpness");
  app.add_option("--eps-n", g.eps_n, "Node-weight floor");
  app.add_option("--eps-l", g.eps_l, "Position-weight floor");
  app.add_option("--power-levels", g.power_levels, "Discrete power levels");
  app.add_option("--angle-levels", g.angle_levels, "Discrete angle levels per axis");
  app.add_option("--max-angle", g.max_angle, "Largest tilt in radians");
  app.add_option("--eps-c", g.eps_c, "Outer-loop improvement threshold (negative: automatic)");
  app.add_option("--max-runs", g.max_runs, "Outer-loop run limit");
  app.add_option("--attempt-factor", g.attempt_factor, "Proposal cap as a multiple of k_F");
  app.add_option("--batch", g.batch, "Proposals evaluated per round");
  app.add_option("--violation-tolerance", g.violation_tolerance, "Constraint tolerance");
}

template <int D>
void apply_flags(Scenario<D>& s, const GlobalFlags& g) {
  auto& c = s.sampler;
  if (g.seed) s.seed = *g.seed;
  c.seed = s.seed;
  c.threads = g.threads;
  s.solver.threads = g.threads;
  if (g.k_f) c.k_f = *g.k_f;
  if (g.lambda) c.lambda = *g.lambda;
  if (g.a) c.a = *g.a;
  if (g.b) c.b = *g.b;
  if (g.eps_n) c.eps_n = *g.eps_n;
  if (g.eps_l) c.eps_l = *g.eps_l;
  if (g.max_angle) c.max_angle = *g.max_angle;
  if (g.eps_c) c.eps_c = *g.eps_c;
  if (g.violation_tolerance) c.violation_tolerance = *g.violation_tolerance;
  if (g.power_levels) c.power_levels = *g.power_levels;
  if (g.angle_levels) c.angle_levels = *g.angle_levels;
  if (g.max_runs) c.max_runs = *g.max_runs;
  if (g.attempt_factor) c.attempt_factor = *g.attempt_factor;
  if (g.batch) c.batch = *g.batch;
  if (!c.valid()) throw ValidationError("sampler settings out of range");
}

AnyScenario load_scenario(const std::string& path, const GlobalFlags& g) {
  auto any = scenario_from_json(read_json_file(path));
  std::visit([&](auto& s) { apply_flags(s, g); }, any);
  return any;
}

template <int D>
SamplerConfig resolved(const Scenario<D>& s) {
  return resolve_sampler(s.sampler, s.initial, s.objective, s.params);
}

// ---------------------------------------------------------------------------

struct GenArgs {
  std::string shape;
  std::string preset = "full";
  std::string out;
  std::optional<std::size_t> points;
  std::optional<double> depth, slope, offset;
  std::optional<double> cut1_power, cut2_power;
};

Preset parse_preset(const std::string& p) {
  if (p == "desk") return Preset::kDesk;
  if (p == "full") return Preset::kFull;
  throw ValidationError("unknown preset '" + p + "'");
}

template <typename Opt>
void apply_profile(Opt& o, const GenArgs& a, Preset preset) {
  o.points = a.points.value_or(preset_points_2d(preset));
  if (a.depth) o.depth = *a.depth;
  if (a.slope) o.a = *a.slope;
  if (a.offset) o.b = *a.offset;
}

int cmd_gen(const GenArgs& a, const GlobalFlags& g) {
  const Preset preset = parse_preset(a.preset);
  auto finish = [&](auto s) {
    s.sampler.k_f = preset_k_f(preset);
    apply_flags(s, g);
    write_json_file(a.out, to_json(s));
    return 0;
  };
  if (a.shape == "square-well") {
    SquareWellOptions o;
    apply_profile(o, a, preset);
    return finish(gen_square_well(o));
  }
  if (a.shape == "sawtooth") {
    SawtoothOptions o;
    apply_profile(o, a, preset);
    return finish(gen_sawtooth(o));
  }
  if (a.shape == "two-cut") {
    TwoCutOptions o;
    apply_profile(o, a, preset);
    if (a.cut1_power) o.first_power = *a.cut1_power;
    if (a.cut2_power) o.second_power = *a.cut2_power;
    return finish(gen_two_cut(o));
  }
  if (a.shape == "tumor-3d") {
    TumorOptions o;
    o.nx = o.ny = a.points.value_or(preset_grid_3d(preset));
    if (a.offset) o.margin = *a.offset;
    return finish(gen_tumor_3d(o));
  }
  throw ValidationError("unknown shape '" + a.shape + "'");
}

// ---------------------------------------------------------------------------

template <int D>
PlanFile<D> plan_scenario(const Scenario<D>& s, const std::string& algorithm) {
  if (algorithm == "graph") {
    const auto cfg = resolved(s);
    const auto r = plan(s.initial, s.objective, s.constraint, cfg, s.params);
    return make_plan_file<D>(s, r.actions, algorithm, cfg.seed, config_hash(to_json(cfg)));
  }
  if constexpr (D == 2) {
    const auto p = optimizer_plan(s.initial, s.objective, s.constraint, s.params, s.solver);
    if (!p.result.feasible) throw InfeasibleError("optimizer found no constraint-satisfying solution");
    return make_plan_file<D>(s, p.actions, algorithm, s.solver.seed, config_hash(to_json(s.solver)));
  } else {
    throw ValidationError("the superposition optimizer supports 2D scenarios only");
  }
}

int cmd_plan(const std::string& algorithm, const std::string& scenario, const std::string& out,
             const GlobalFlags& g) {
  const auto any = load_scenario(scenario, g);
  std::visit([&](const auto& s) { write_json_file(out, to_json(plan_scenario(s, algorithm))); }, any);
  return 0;
}

template <int D>
void emit(const ExecutionReport<D>& r, const Scenario<D>& s, const PlantSpec& plant,
          const std::string& plan_hash, const std::string& out, const std::string& trace) {
  write_json_file(out, report_to_json(r, s, plant, plan_hash));
  if (!trace.empty()) write_text_file(trace, trace_to_csv(r.trace));
}

int cmd_simulate(const std::string& scenario, const std::string& plan_path,
                 std::optional<double> perturb, const std::string& out, const std::string& trace,
                 const GlobalFlags& g) {
  const auto any = load_scenario(scenario, g);
  const json pj = read_json_file(plan_path);
  std::visit(
      [&](const auto& s) {
        constexpr int D = std::remove_cvref_t<decltype(s)>::kDimension;
        const auto plan_file = plan_from_json<D>(pj);
        const auto plant = make_plant(s.params, perturb.value_or(s.perturbation), s.beta_compounding);
        const auto actions = plan_file.actions();
        const auto r = run_feedforward<D>(actions, plant, s.initial, s.objective, s.constraint);
        emit(r, s, plant, config_hash(pj), out, trace);
      },
      any);
  return 0;
}

int cmd_feedback(const std::string& algorithm, const std::string& scenario,
                 std::optional<double> perturb, std::optional<std::size_t> max_cuts,
                 const std::string& out, const std::string& trace, const GlobalFlags& g) {
  const auto any = load_scenario(scenario, g);
  std::visit(
      [&](const auto& s) {
        constexpr int D = std::remove_cvref_t<decltype(s)>::kDimension;
        const auto plant = make_plant(s.params, perturb.value_or(s.perturbation), s.beta_compounding);
        FeedbackOptions<D> opts;
        opts.max_cuts = max_cuts.value_or(s.max_feedback_cuts);
        Planner<D> planner;
        std::string hash;
        if (algorithm == "graph") {
          const auto cfg = resolved(s);
          planner = graph_planner<D>(s.objective, s.constraint, cfg, s.params);
          hash = config_hash(to_json(cfg));
        } else if constexpr (D == 2) {
          planner = optimizer_planner(s.objective, s.constraint, s.solver, s.params);
          hash = config_hash(to_json(s.solver));
        } else {
          throw ValidationError("the superposition optimizer supports 2D scenarios only");
        }
        const auto r = run_feedback<D>(planner, plant, s.initial, s.objective, s.constraint, opts);
        emit(r, s, plant, hash, out, trace);
      },
      any);
  return 0;
}

int cmd_metrics(const std::string& scenario, const std::string& surface, const std::string& out,
                const GlobalFlags& g) {
  const auto any = load_scenario(scenario, g);
  std::visit(
      [&](const auto& s) {
        constexpr int D = std::remove_cvref_t<decltype(s)>::kDimension;
        std::ifstream in(surface);
        if (!in) throw ParseError(surface + ": cannot open");
        const auto final_surface = surface_from_csv<D>(in, s.initial.shape(), surface);
        const auto m = evaluate(s.initial, final_surface, s.objective, s.constraint);
        write_json_file(out, metrics_to_json(m, s));
      },
      any);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric laser ablation planner and simulator"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  add_global_flags(app, g);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen", "Generate a benchmark scenario");
  gen_cmd->add_option("shape", gen.shape, "square-well | sawtooth | two-cut | tumor-3d")->required();
  gen_cmd->add_option("--preset", gen.preset, "full (100 points, 100x100 grid) or desk (small, for CI)");
  gen_cmd->add_option("-o,--output", gen.out, "Scenario JSON to write")->required();
  gen_cmd->add_option("--points", gen.points, "Surface points (2D) or grid side (3D)");
  gen_cmd->add_option("--depth", gen.depth, "Objective depth (square-well, sawtooth)");
  gen_cmd->add_option("--slope", gen.slope, "Constraint slope a in z_c = z_d - a|x| - b");
  gen_cmd->add_option("--offset", gen.offset, "Constraint offset b (3D: margin)");
  gen_cmd->add_option("--cut1-power", gen.cut1_power, "Power of the first two-cut action");
  gen_cmd->add_option("--cut2-power", gen.cut2_power, "Power of the second two-cut action");

  std::string algorithm, scenario, out, plan_path, trace, surface;
  std::optional<double> perturb;
  std::optional<std::size_t> max_cuts;
  const auto algorithms = CLI::IsMember({"graph", "nlopt"});

  auto* plan_cmd = app.add_subcommand("plan", "Compute a cut sequence");
  plan_cmd->add_option("algorithm", algorithm, "graph | nlopt")->required()->check(algorithms);
  plan_cmd->add_option("-s,--scenario", scenario)->required();
  plan_cmd->add_option("-o,--output", out, "Plan JSON to write")->required();

  auto* sim_cmd = app.add_subcommand("simulate", "Execute a plan open loop");
  sim_cmd->add_option("-s,--scenario", scenario)->required();
  sim_cmd->add_option("-p,--plan", plan_path)->required();
  sim_cmd->add_option("--perturb", perturb, "Relative error of beta and phi in the plant");
  sim_cmd->add_option("-o,--output", out, "Report JSON to write")->required();
  sim_cmd->add_option("--trace", trace, "Per-cut trace CSV");

  auto* fb_cmd = app.add_subcommand("feedback", "Receding-horizon execution");
  fb_cmd->add_option("algorithm", algorithm, "graph | nlopt")->required()->check(algorithms);
  fb_cmd->add_option("-s,--scenario", scenario)->required();
  fb_cmd->add_option("--perturb", perturb, "Relative error of beta and phi in the plant");
  fb_cmd->add_option("--max-cuts", max_cuts, "Stop after this many cuts");
  fb_cmd->add_option("-o,--output", out, "Report JSON to write")->required();
  fb_cmd->add_option("--trace", trace, "Per-cut trace CSV");

  auto* met_cmd = app.add_subcommand("metrics", "Score a final surface");
  met_cmd->add_option("-s,--scenario", scenario)->required();
  met_cmd->add_option("--surface", surface, "Surface CSV")->required();
  met_cmd->add_option("-o,--output", out, "Report JSON to write")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen_cmd->parsed()) return cmd_gen(gen, g);
    if (plan_cmd->parsed()) return cmd_plan(algorithm, scenario, out, g);
    if (sim_cmd->parsed()) return cmd_simulate(scenario, plan_path, perturb, out, trace, g);
    if (fb_cmd->parsed()) return cmd_feedback(algorithm, scenario, perturb, max_cuts, out, trace, g);
    if (met_cmd->parsed()) return cmd_metrics(scenario, surface, out, g);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const InfeasibleError& e) {
    std::cerr << "infeasible: " << e.what() << '\n';
    return 3;
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
