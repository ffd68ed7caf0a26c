#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "ablate/boundary.hpp"
#include "ablate/cost.hpp"
#include "ablate/geometry.hpp"

namespace {

using namespace ablate;

BoundaryField<2>::Knots line(std::vector<double> xs) { return {std::move(xs)}; }

BoundaryField<2> line_field(std::vector<double> xs, double z) {
  return sample_field(std::move(xs), [z](double) { return z; });
}

TEST(Field, ExactAtKnots) {
  const std::vector<double> xs{0.0, 0.1, 0.3, 0.7, 1.0};
  const BoundaryField<2> f({xs}, {0.3, -1.0 / 3.0, 2.5, 0.1, -7.0});
  for (std::size_t i = 0; i < xs.size(); ++i) EXPECT_EQ(interpolate(f, {xs[i]}), f.heights()[i]);
}

TEST(Field, LinearBetweenKnots) {
  const BoundaryField<2> f(line({0.0, 1.0}), {0.0, 1.0});
  EXPECT_DOUBLE_EQ(f({0.5}), 0.5);
}

TEST(Field, OutsideRangeIsDomainError) {
  const BoundaryField<2> f(line({0.0, 1.0}), {0.0, 1.0});
  EXPECT_THROW(f({1.0000001}), std::domain_error);
  EXPECT_THROW(f({-0.5}), std::domain_error);
  EXPECT_FALSE(f.contains({2.0}));
}

TEST(Field, BilinearIn3D) {
  const BoundaryField<3> f({std::vector<double>{0.0, 1.0}, std::vector<double>{0.0, 2.0}},
                           {0.0, 1.0, 2.0, 3.0});
  EXPECT_DOUBLE_EQ(f({0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(f({1.0, 2.0}), 3.0);
  EXPECT_DOUBLE_EQ(f({0.5, 1.0}), 1.5);
  EXPECT_DOUBLE_EQ(f({1.0, 1.0}), 2.0);
}

TEST(Field, RejectsMalformedKnots) {
  EXPECT_THROW(BoundaryField<2>(line({0.0}), {1.0}), std::invalid_argument);
  EXPECT_THROW(BoundaryField<2>(line({0.0, 0.0}), {1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(BoundaryField<2>(line({0.0, 1.0}), {1.0}), std::invalid_argument);
  EXPECT_THROW(BoundaryField<2>(line({0.0, 1.0}), {1.0, NAN}), std::invalid_argument);
}

TEST(Cost, ZeroAtObjective) {
  const auto xs = linspace(0, 1, 11);
  const auto obj = line_field(xs, -0.2);
  EXPECT_EQ(modified_cost(flat_surface(xs, -0.2), obj).modified_cost, 0.0);
  EXPECT_EQ(mse(flat_surface(xs, -0.2), obj), 0.0);
}

TEST(Cost, SingleUndercut) {
  const auto xs = linspace(0, 1, 11);
  std::vector<Point<2>> pts;
  for (double x : xs) pts.push_back({x, 0.0});
  pts[4][1] = 1.0;
  for (double lambda : {1.0, 4.0, 100.0}) {
    const auto c = modified_cost(TissueSurface<2>(pts), line_field(xs, 0.0), lambda);
    EXPECT_DOUBLE_EQ(c.modified_cost, 1.0);
  }
}

TEST(Cost, SingleOvercutIsWeighted) {
  const auto xs = linspace(0, 1, 11);
  std::vector<Point<2>> pts;
  for (double x : xs) pts.push_back({x, 0.0});
  pts[4][1] = -0.5;
  EXPECT_DOUBLE_EQ(modified_cost(TissueSurface<2>(pts), line_field(xs, 0.0), 2.0).modified_cost, 0.5);
}

TEST(Cost, LambdaBelowOneRejected) {
  const auto xs = linspace(0, 1, 3);
  EXPECT_THROW(modified_cost(flat_surface(xs), line_field(xs, 0.0), 0.5), std::invalid_argument);
}

TEST(Cost, UniformOffsetMse) {
  const auto xs = linspace(0, 1, 11);
  EXPECT_NEAR(mse(flat_surface(xs, 0.1), line_field(xs, 0.0)), 0.01, 1e-15);
}

TEST(Cost, MseMatchesNaiveLoopAndLambdaOneIdentity) {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const auto knots = linspace(-1, 1, 40);
  std::vector<double> h(knots.size());
  for (auto& v : h) v = u(gen);
  const BoundaryField<2> obj({knots}, h);
  std::vector<Point<2>> pts;
  for (int i = 0; i < 300; ++i) pts.push_back({u(gen), u(gen)});
  const TissueSurface<2> s(pts);

  double acc = 0.0;
  for (const auto& p : pts) {
    // Independent linear interpolation.
    std::size_t k = 0;
    while (k + 2 < knots.size() && knots[k + 1] < p[0]) ++k;
    const double t = (p[0] - knots[k]) / (knots[k + 1] - knots[k]);
    const double zo = h[k] + t * (h[k + 1] - h[k]);
    acc += (zo - p[1]) * (zo - p[1]);
  }
  EXPECT_NEAR(mse(s, obj), acc / 300.0, 1e-12);
  EXPECT_NEAR(modified_cost(s, obj, 1.0).modified_cost, mse(s, obj) * 300.0, 1e-9);
}

TEST(Cost, MovingUndercutTowardObjectiveNeverIncreasesCost) {
  const auto xs = linspace(0, 1, 5);
  const auto obj = line_field(xs, -1.0);
  std::vector<Point<2>> pts;
  for (double x : xs) pts.push_back({x, 0.0});
  double prev = modified_cost(TissueSurface<2>(pts), obj).modified_cost;
  for (int step = 1; step <= 10; ++step) {
    pts[2][1] = -0.1 * step;
    const double c = modified_cost(TissueSurface<2>(pts), obj).modified_cost;
    EXPECT_LE(c, prev);
    prev = c;
  }
}

TEST(Violation, NoneAbove) {
  const auto xs = linspace(0, 1, 100);
  const auto v = violation(flat_surface(xs, 0.0), line_field(xs, -1.0));
  EXPECT_EQ(v.count, 0u);
  EXPECT_EQ(v.fraction, 0.0);
}

TEST(Violation, OneOfHundred) {
  const auto xs = linspace(0, 1, 100);
  std::vector<Point<2>> pts;
  for (double x : xs) pts.push_back({x, 0.0});
  pts[17][1] = -2.0;
  const auto v = violation(TissueSurface<2>(pts), line_field(xs, -1.0));
  EXPECT_EQ(v.count, 1u);
  EXPECT_DOUBLE_EQ(v.fraction, 0.01);
}

TEST(Violation, OnConstraintIsFeasible) {
  const auto xs = linspace(0, 1, 10);
  EXPECT_EQ(violation(flat_surface(xs, -1.0), line_field(xs, -1.0)).count, 0u);
}

TEST(Volume, FinalAtObjectiveIsClean) {
  const auto xs = linspace(0, 2, 21);
  const auto obj = sample_field(xs, [](double x) { return -0.3 * x; });
  std::vector<Point<2>> pts;
  for (double x : xs) pts.push_back({x, -0.3 * x});
  const auto m = volume_metrics(flat_surface(xs), TissueSurface<2>(pts), obj);
  EXPECT_NEAR(m.removed_healthy_volume, 0.0, 1e-15);
  EXPECT_NEAR(m.remaining_tumor_volume, 0.0, 1e-15);
  EXPECT_NEAR(m.original_tumor_volume, 0.3 * 2.0 * 2.0 / 2.0, 1e-12);
}

TEST(Volume, UniformOvercutIsPrism) {
  const auto xs = linspace(0, 1, 11);
  const auto ys = linspace(0, 2, 21);
  const auto obj = sample_field(xs, ys, [](double, double) { return -0.5; });
  const auto m = volume_metrics(flat_surface(xs, ys), flat_surface(xs, ys, -1.5), obj);
  EXPECT_NEAR(m.removed_healthy_volume, 2.0, 1e-12);
  EXPECT_NEAR(m.remaining_tumor_volume, 0.0, 1e-15);
}

// Smooth random profiles against a 10^5-point midpoint-rule oracle.
TEST(Volume, MatchesRefinedQuadrature) {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    double a[3], f[3], c[3], p[3];
    for (int k = 0; k < 3; ++k) {
      a[k] = 0.2 * u(gen);
      f[k] = 1.0 + 4.0 * u(gen);
      c[k] = 0.2 * u(gen);
      p[k] = 6.0 * u(gen);
    }
    auto zobj = [&](double x) { return -0.5 - a[0] * std::sin(f[0] * x + p[0]) - a[1] * std::cos(f[1] * x); };
    auto zfin = [&](double x) { return -0.5 - c[0] * std::sin(f[2] * x + p[1]) + c[1] * std::cos(f[1] * x + p[2]); };
    const auto xs = linspace(0, 2, 400);
    const auto obj = sample_field(linspace(0, 2, 4000), zobj);
    std::vector<Point<2>> fin;
    for (double x : xs) fin.push_back({x, zfin(x)});
    const auto m = volume_metrics(flat_surface(xs), TissueSurface<2>(fin), obj);

    const int n = 100000;
    const double h = 2.0 / n;
    double healthy = 0.0, remaining = 0.0, tumor = 0.0;
    for (int i = 0; i < n; ++i) {
      const double x = (i + 0.5) * h;
      healthy += h * std::max(0.0, zobj(x) - zfin(x));
      remaining += h * std::max(0.0, zfin(x) - zobj(x));
      tumor += h * std::max(0.0, -zobj(x));
    }
    EXPECT_NEAR(m.original_tumor_volume, tumor, 0.01 * tumor);
    if (healthy > 1e-3) {
      EXPECT_NEAR(m.removed_healthy_volume, healthy, 0.01 * healthy);
    }
    if (remaining > 1e-3) {
      EXPECT_NEAR(m.remaining_tumor_volume, remaining, 0.01 * remaining);
    }
  }
}

TEST(Volume, MismatchedSurfacesRejected) {
  const auto obj = line_field(linspace(0, 1, 3), 0.0);
  EXPECT_THROW(volume_metrics(flat_surface(linspace(0, 1, 3)), flat_surface(linspace(0, 1, 4)), obj),
               std::invalid_argument);
}

}  // namespace
