#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ablate/ablation.hpp"
#include "ablate/scenario.hpp"
#include "ablate/superposition.hpp"

namespace {

using namespace ablate;

SuperpositionProblem flat_problem(std::size_t n, const TissueParams& p, double depth = 0.0) {
  const auto xs = linspace(-1, 1, n);
  const auto knots = linspace(-1.5, 1.5, 31);
  const auto obj = sample_field(knots, [depth](double) { return -depth; });
  const auto con = sample_field(knots, [depth](double) { return -depth - 1.0; });
  return assemble(flat_surface(xs), obj, con, p);
}

TEST(Assemble, FootprintEntries) {
  const TissueParams p{1.0, 0.1, 0.5, 0.7};
  const auto xs = std::vector<double>{0.0, 0.5};
  const auto f = sample_field(linspace(-1, 1, 3), [](double) { return 0.0; });
  const auto prob = assemble(flat_surface(xs), f, f, p);
  EXPECT_DOUBLE_EQ(prob.p(0, 0), 0.7);
  EXPECT_DOUBLE_EQ(prob.p(1, 1), 0.7);
  EXPECT_NEAR(prob.p(0, 1), 0.7 * std::exp(-2.0), 1e-15);
  EXPECT_EQ(prob.p(0, 1), prob.p(1, 0));
}

TEST(Assemble, AtObjectiveGivesZeroTargets) {
  const auto prob = flat_problem(10, {});
  for (double t : prob.target_depths) EXPECT_EQ(t, 0.0);
  EXPECT_FALSE(prob.target_clamped);
}

TEST(Assemble, ObjectiveAboveSurfaceIsClampedAndFlagged) {
  const auto xs = linspace(0, 1, 5);
  const auto obj = sample_field(xs, [](double) { return 0.3; });
  const auto con = sample_field(xs, [](double) { return -1.0; });
  const auto prob = assemble(flat_surface(xs), obj, con, {});
  EXPECT_TRUE(prob.target_clamped);
  for (double t : prob.target_depths) EXPECT_EQ(t, 0.0);
}

TEST(Assemble, DuplicatePositionsRejected) {
  const std::vector<Point<2>> pts{{0.0, 0.0}, {0.5, 0.0}, {0.0, -0.1}};
  const auto f = sample_field(linspace(-1, 1, 3), [](double) { return -1.0; });
  EXPECT_THROW(assemble(TissueSurface<2>(pts), f, f, {}), std::invalid_argument);
}

TEST(Forward, ZeroPower) {
  const auto prob = flat_problem(12, {1.0, 0.1, 0.2, 1.0});
  for (double d : forward(prob, std::vector<double>(12, 0.0))) EXPECT_EQ(d, 0.0);
}

TEST(Forward, LinearWithoutThreshold) {
  const TissueParams p{2.0, 0.0, 0.3, 1.0};
  const auto prob = flat_problem(9, p);
  std::vector<double> e{0.1, 0.0, 0.5, 1.0, 0.2, 0.0, 0.0, 0.7, 0.3};
  const auto d = forward(prob, e);
  for (std::size_t j = 0; j < 9; ++j) {
    double lin = 0.0;
    for (std::size_t i = 0; i < 9; ++i) lin += prob.p(i, j) * e[i];
    EXPECT_NEAR(d[j], lin / p.beta, 1e-15);
  }
}

TEST(Forward, RejectsBadPowers) {
  const auto prob = flat_problem(4, {});
  EXPECT_THROW(forward(prob, std::vector<double>(3, 0.0)), std::invalid_argument);
  EXPECT_THROW(forward(prob, std::vector<double>{0.0, -1.0, 0.0, 0.0}), std::invalid_argument);
}

TEST(Forward, MatchesSequentialCutsAndClosedForm) {
  const TissueParams p{1.2, 0.1, 0.25, 0.9};
  const auto prob = flat_problem(15, p);
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> u(0.0, 1.5);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<double> e(15);
    for (auto& v : e) v = u(gen);
    const auto d = forward(prob, e);
    const auto closed = superposed_depth(prob.xs, e, p);
    auto s = flat_surface(prob.xs);
    for (std::size_t i = 0; i < 15; ++i) s = apply_ablation(s, vertical_cut<2>({prob.xs[i]}, e[i]), p).new_surface;
    for (std::size_t j = 0; j < 15; ++j) {
      EXPECT_NEAR(d[j], closed[j], 1e-12);
      EXPECT_NEAR(d[j], -s[j][1], 1e-9);
    }
  }
}

TEST(Forward, MonotoneInEachPower) {
  const auto prob = flat_problem(10, {1.0, 0.2, 0.3, 1.0});
  std::vector<double> e(10, 0.4);
  const auto base = forward(prob, e);
  for (std::size_t i = 0; i < 10; ++i) {
    auto up = e;
    up[i] += 0.3;
    const auto d = forward(prob, up);
    for (std::size_t j = 0; j < 10; ++j) EXPECT_GE(d[j], base[j]);
  }
}

TEST(Solve, ZeroTargetGivesZeroPower) {
  const auto prob = flat_problem(20, {1.0, 0.05, 0.15, 1.0});
  const auto r = solve(prob);
  for (double e : r.powers) EXPECT_EQ(e, 0.0);
  EXPECT_EQ(r.residual_mse, 0.0);
  EXPECT_TRUE(r.feasible);
}

TEST(Solve, RecoversTwoCutTarget) {
  const auto s = gen_two_cut();
  const auto prob = assemble(s.initial, s.objective, s.constraint, s.params);
  const auto r = solve(prob, s.solver);
  EXPECT_TRUE(r.feasible);
  EXPECT_LE(r.residual_mse, 1e-6);
  for (double e : r.powers) EXPECT_GE(e, 0.0);
  EXPECT_EQ(r.achieved_depths, forward(prob, r.powers));
}

TEST(Solve, NoOvercutWhenConstraintIsObjective) {
  const auto s = gen_two_cut();
  const auto prob = assemble(s.initial, s.objective, s.objective, s.params);
  const auto r = solve(prob, s.solver);
  EXPECT_TRUE(r.feasible);
  for (std::size_t j = 0; j < prob.size(); ++j) {
    EXPECT_LE(r.achieved_depths[j], prob.target_depths[j] + 1e-9);
  }
}

TEST(Solve, MoreStartsNeverWorse) {
  SawtoothOptions o;
  o.points = 40;
  const auto s = gen_sawtooth(o);
  const auto prob = assemble(s.initial, s.objective, s.constraint, s.params);
  SolverConfig cfg;
  cfg.max_iterations = 300;
  double prev = INFINITY;
  for (std::size_t k = 0; k <= 4; k += 2) {
    cfg.random_starts = k;
    const auto r = solve(prob, cfg);
    ASSERT_TRUE(r.feasible);
    EXPECT_LE(r.residual_mse, prev);
    prev = r.residual_mse;
  }
}

TEST(Solve, ThreadCountDoesNotChangeResult) {
  SquareWellOptions o;
  o.points = 30;
  const auto s = gen_square_well(o);
  const auto prob = assemble(s.initial, s.objective, s.constraint, s.params);
  SolverConfig cfg;
  cfg.max_iterations = 500;
  const auto a = solve(prob, cfg);
  cfg.threads = 3;
  const auto b = solve(prob, cfg);
  EXPECT_EQ(a.powers, b.powers);
  EXPECT_EQ(a.start_index, b.start_index);
}

TEST(Actions, DescendingPowerAndReplayMatchesForward) {
  const auto s = gen_two_cut();
  const auto prob = assemble(s.initial, s.objective, s.constraint, s.params);
  const auto r = solve(prob, s.solver);
  const auto actions = to_actions(prob, r.powers);
  ASSERT_FALSE(actions.empty());
  for (std::size_t k = 1; k < actions.size(); ++k) EXPECT_GE(actions[k - 1].power, actions[k].power);
  for (const auto& a : actions) EXPECT_EQ(a.angles[0], 0.0);
  auto fwd = actions;
  auto rev = actions;
  std::reverse(rev.begin(), rev.end());
  const auto sf = apply_sequence<2>(s.initial, fwd, s.params);
  const auto sr = apply_sequence<2>(s.initial, rev, s.params);
  for (std::size_t j = 0; j < prob.size(); ++j) {
    EXPECT_NEAR(-sf[j][1], r.achieved_depths[j], 1e-9);
    EXPECT_NEAR(sf[j][1], sr[j][1], 1e-9);
  }
}

}  // namespace
