#include <cmath>
#include <vector>

#include <gtest/gtest.h>

#include "ablate/feedback.hpp"
#include "ablate/scenario.hpp"

namespace {

using namespace ablate;

Scenario<2> desk_two_cut() {
  TwoCutOptions o;
  o.points = 50;
  return gen_two_cut(o);
}

TEST(Plant, PerturbsBetaAndPhiOnly) {
  const TissueParams n{2.0, 0.4, 0.3, 1.5};
  const auto p = make_plant(n, -0.05);
  EXPECT_DOUBLE_EQ(p.true_params.beta, 1.9);
  EXPECT_DOUBLE_EQ(p.true_params.phi, 0.38);
  EXPECT_EQ(p.true_params.w, n.w);
  EXPECT_EQ(p.true_params.dt, n.dt);
  EXPECT_EQ(p.nominal_params, n);
  EXPECT_NEAR(make_plant(n, -0.05, 2).true_params.beta, 2.0 * 0.95 * 0.95, 1e-15);
}

TEST(Feedforward, UnperturbedReplayMatchesPrediction) {
  const auto s = desk_two_cut();
  auto cfg = resolve_sampler(s.sampler, s.initial, s.objective, s.params);
  cfg.k_f = 300;
  const auto r = plan(s.initial, s.objective, s.constraint, cfg, s.params);
  const auto rep = run_feedforward<2>(r.actions, make_plant(s.params, 0.0), s.initial, s.objective,
                                      s.constraint);
  EXPECT_EQ(rep.final_surface, r.final_state);
  EXPECT_EQ(rep.cuts_executed, r.actions.size());
  EXPECT_EQ(rep.mode, ExecutionMode::kFeedforward);
}

TEST(Feedforward, EmptyPlan) {
  const auto s = desk_two_cut();
  const auto rep = run_feedforward<2>({}, make_plant(s.params, -0.05), s.initial, s.objective, s.constraint);
  EXPECT_EQ(rep.final_surface, s.initial);
  EXPECT_EQ(rep.cuts_executed, 0u);
  EXPECT_EQ(rep.metrics.mse, mse(s.initial, s.objective));
}

TEST(Feedforward, WeakerTissueCutsDeeper) {
  const auto s = desk_two_cut();
  const auto plant = make_plant(s.params, -0.05);
  const std::vector<LaserAction<2>> actions{{{-0.2}, {0.2}, 0.7}, {{0.3}, {0.0}, 0.4}, {{0.1}, {-0.5}, 0.9}};
  auto state = s.initial;
  for (const auto& a : actions) {
    const auto nominal = apply_ablation(state, a, s.params);
    const auto actual = apply_ablation(state, a, plant.true_params);
    for (std::size_t i = 0; i < state.size(); ++i) {
      if (nominal.per_point_displacement[i] > 0.0) {
        EXPECT_GT(actual.per_point_displacement[i], nominal.per_point_displacement[i]);
      }
    }
    state = actual.new_surface;
  }
}

TEST(Feedforward, TraceIsOrderedAndConsistent) {
  const auto s = desk_two_cut();
  const std::vector<LaserAction<2>> actions{vertical_cut<2>({0.0}, 0.5), vertical_cut<2>({0.2}, 0.3),
                                            vertical_cut<2>({-0.3}, 0.6)};
  const auto rep = run_feedforward<2>(actions, make_plant(s.params, -0.05), s.initial, s.objective,
                                      s.constraint);
  ASSERT_EQ(rep.trace.size(), 3u);
  for (std::size_t k = 0; k < 3; ++k) {
    EXPECT_EQ(rep.trace[k].cut, k + 1);
    EXPECT_EQ(rep.trace[k].action, actions[k]);
    if (k > 0) {
      EXPECT_GE(rep.trace[k].time_s, rep.trace[k - 1].time_s);
      EXPECT_EQ(rep.trace[k].pre_mse, rep.trace[k - 1].mse);
    }
  }
  EXPECT_EQ(rep.trace.back().mse, rep.metrics.mse);
}

TEST(Feedback, EmptyPlannerExecutesNothing) {
  const auto s = desk_two_cut();
  const Planner<2> none = [](const TissueSurface<2>&, std::size_t) { return std::vector<LaserAction<2>>{}; };
  const auto rep = run_feedback<2>(none, make_plant(s.params, 0.0), s.initial, s.objective, s.constraint);
  EXPECT_EQ(rep.cuts_executed, 0u);
  EXPECT_EQ(rep.final_surface, s.initial);
  EXPECT_EQ(rep.mode, ExecutionMode::kFeedback);
}

TEST(Feedback, StopsAtMaxCutsAndSeesTrueState) {
  const auto s = desk_two_cut();
  const auto plant = make_plant(s.params, -0.05);
  std::vector<TissueSurface<2>> seen;
  const Planner<2> greedy = [&](const TissueSurface<2>& sensed, std::size_t) {
    seen.push_back(sensed);
    return std::vector<LaserAction<2>>{vertical_cut<2>({0.0}, 0.3), vertical_cut<2>({0.5}, 0.3)};
  };
  FeedbackOptions<2> opts;
  opts.max_cuts = 4;
  const auto rep = run_feedback<2>(greedy, plant, s.initial, s.objective, s.constraint, opts);
  EXPECT_EQ(rep.cuts_executed, 4u);
  ASSERT_EQ(seen.size(), 4u);
  auto truth = s.initial;
  for (std::size_t k = 0; k < 4; ++k) {
    EXPECT_EQ(seen[k], truth);
    truth = apply_ablation(truth, vertical_cut<2>({0.0}, 0.3), plant.true_params).new_surface;
  }
  EXPECT_EQ(rep.final_surface, truth);
}

TEST(Feedback, SenseHookIsApplied) {
  const auto s = desk_two_cut();
  int calls = 0;
  FeedbackOptions<2> opts;
  opts.max_cuts = 3;
  opts.sense = [&](const TissueSurface<2>& t) {
    ++calls;
    return t;
  };
  const Planner<2> one = [](const TissueSurface<2>&, std::size_t) {
    return std::vector<LaserAction<2>>{vertical_cut<2>({0.0}, 0.2)};
  };
  run_feedback<2>(one, make_plant(s.params, 0.0), s.initial, s.objective, s.constraint, opts);
  EXPECT_EQ(calls, 3);
}

TEST(Feedback, UnperturbedOptimizerMatchesOneShotPlan) {
  const auto s = desk_two_cut();
  const auto plant = make_plant(s.params, 0.0);
  const auto oneshot = optimizer_plan(s.initial, s.objective, s.constraint, s.params, s.solver);
  const auto ff = run_feedforward<2>(oneshot.actions, plant, s.initial, s.objective, s.constraint);
  const auto fb = run_feedback<2>(optimizer_planner(s.objective, s.constraint, s.solver, s.params), plant,
                                  s.initial, s.objective, s.constraint);
  EXPECT_EQ(fb.cuts_executed, ff.cuts_executed);
  for (std::size_t i = 0; i < s.initial.size(); ++i) {
    EXPECT_NEAR(fb.final_surface[i][1], ff.final_surface[i][1], 1e-9);
  }
  EXPECT_NEAR(fb.metrics.mse, ff.metrics.mse, 1e-9);
}

TEST(Feedback, GraphPlannerIsSeededPerIteration) {
  const auto s = desk_two_cut();
  auto cfg = resolve_sampler(s.sampler, s.initial, s.objective, s.params);
  cfg.k_f = 200;
  const auto planner = graph_planner<2>(s.objective, s.constraint, cfg, s.params);
  const auto a = planner(s.initial, 0);
  const auto b = planner(s.initial, 0);
  EXPECT_EQ(a, b);
  auto run = cfg;
  run.seed = derive_seed(cfg.seed, 3);
  run.tolerate_root_violations = true;
  EXPECT_EQ(planner(s.initial, 3), search(s.initial, s.objective, s.constraint, run, s.params).actions);
}

TEST(Feedback, PerturbedOptimizerBeatsFeedforward) {
  const auto s = desk_two_cut();
  const auto plant = make_plant(s.params, -0.05);
  const auto oneshot = optimizer_plan(s.initial, s.objective, s.constraint, s.params, s.solver);
  const auto ff = run_feedforward<2>(oneshot.actions, plant, s.initial, s.objective, s.constraint);
  const auto fb = run_feedback<2>(optimizer_planner(s.objective, s.constraint, s.solver, s.params), plant,
                                  s.initial, s.objective, s.constraint);
  EXPECT_LT(fb.metrics.mse, ff.metrics.mse);
  EXPECT_LT(fb.metrics.violation_fraction, ff.metrics.violation_fraction);
}

}  // namespace
