// Plans the two-cut benchmark with both planners and replays each plan on a
// tissue whose beta and phi are 5% lower than the planner assumed.

#include <cstdio>

#include "ablate/ablate.hpp"

int main() {
  using namespace ablate;

  TwoCutOptions opts;
  opts.points = 50;
  const auto s = gen_two_cut(opts);
  const auto plant = make_plant(s.params, -0.05);

  const auto opt = optimizer_plan(s.initial, s.objective, s.constraint, s.params, s.solver);
  std::printf("optimizer: %zu cuts, predicted mse %.3g\n", opt.actions.size(), opt.result.residual_mse);

  auto cfg = resolve_sampler(s.sampler, s.initial, s.objective, s.params);
  cfg.k_f = 1000;
  const auto graph = plan(s.initial, s.objective, s.constraint, cfg, s.params);
  std::printf("graph:     %zu cuts over %zu runs, C* %.3g -> %.3g\n", graph.actions.size(), graph.runs,
              graph.initial_cost, graph.final_cost);

  const auto ff = run_feedforward<2>(opt.actions, plant, s.initial, s.objective, s.constraint);
  const auto fb = run_feedback<2>(optimizer_planner(s.objective, s.constraint, s.solver, s.params), plant,
                                  s.initial, s.objective, s.constraint);
  std::printf("perturbed feedforward: mse %.3g, %.0f%% of points below the constraint\n", ff.metrics.mse,
              100.0 * ff.metrics.violation_fraction);
  std::printf("perturbed feedback:    mse %.3g, %.0f%% of points below the constraint\n", fb.metrics.mse,
              100.0 * fb.metrics.violation_fraction);
}
