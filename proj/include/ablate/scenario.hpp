#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ablate/ablation.hpp"
#include "ablate/boundary.hpp"
#include "ablate/cost.hpp"
#include "ablate/errors.hpp"
#include "ablate/geometry.hpp"
#include "ablate/graph_planner.hpp"
#include "ablate/superposition.hpp"

namespace ablate {

/// Everything needed to plan and replay one experiment.
template <int D>
struct Scenario {
  static constexpr int kDimension = D;

  std::string name;
  TissueSurface<D> initial;
  BoundaryField<D> objective;
  BoundaryField<D> constraint;
  TissueParams params;
  double perturbation = 0.0;
  int beta_compounding = 1;
  SamplerConfig sampler;
  SolverConfig solver;
  std::uint64_t seed = 1;
  std::size_t max_feedback_cuts = 200;
  // Generator inputs (constraint offsets, geometry) kept for the record.
  std::map<std::string, double> generator;
};

/// Checks constraint <= objective at every knot and
/// constraint <= objective <= surface at every surface point. Throws
/// ValidationError naming the offending knots/points.
template <int D>
void validate(const Scenario<D>& s) {
  if (!s.params.valid()) throw ValidationError("scenario: invalid tissue parameters");
  if (s.initial.empty()) throw ValidationError("scenario: empty surface");
  if (s.objective.knots() != s.constraint.knots()) {
    throw ValidationError("scenario: objective and constraint use different knot grids");
  }
  std::vector<std::size_t> bad_knots;
  const auto& ho = s.objective.heights();
  const auto& hc = s.constraint.heights();
  for (std::size_t k = 0; k < ho.size(); ++k) {
    if (hc[k] > ho[k]) bad_knots.push_back(k);
  }
  std::vector<std::size_t> bad_points;
  for (std::size_t i = 0; i < s.initial.size(); ++i) {
    const auto q = lateral_of<D>(s.initial[i]);
    if (!s.objective.contains(q)) {
      bad_points.push_back(i);
      continue;
    }
    const double zo = s.objective(q);
    const double zc = s.constraint(q);
    const double z = height_of<D>(s.initial[i]);
    if (zc > zo || zo > z) bad_points.push_back(i);
  }
  if (bad_knots.empty() && bad_points.empty()) return;
  std::ostringstream msg;
  msg << "scenario '" << s.name << "' violates constraint <= objective <= surface";
  auto list = [&](const char* what, const std::vector<std::size_t>& v) {
    if (v.empty()) return;
    msg << "; " << what << ":";
    for (std::size_t i = 0; i < std::min<std::size_t>(v.size(), 20); ++i) msg << ' ' << v[i];
    if (v.size() > 20) msg << " ... (" << v.size() << " total)";
  };
  list("knots", bad_knots);
  list("points", bad_points);
  throw ValidationError(msg.str());
}

enum class Preset { kFull, kDesk };

inline std::size_t preset_points_2d(Preset p) { return p == Preset::kDesk ? 50 : 100; }
inline std::size_t preset_grid_3d(Preset p) { return p == Preset::kDesk ? 30 : 100; }
inline std::size_t preset_k_f(Preset p) { return p == Preset::kDesk ? 1000 : 10000; }

struct ProfileOptions {
  double half_extent = 1.0;  // surface spans [-half_extent, half_extent]
  std::size_t points = 100;
  double pad_fraction = 0.25;  // boundary knots extend this fraction of `points` past each end
  double depth = 0.5;
  double a = 0.05;  // constraint slope: z_c = z_d - a|x| - b
  double b = 0.05;
  TissueParams params{1.0, 0.05, 0.1, 1.0};
};

struct SquareWellOptions : ProfileOptions {
  double half_width = 0.5;
};

struct SawtoothOptions : ProfileOptions {
  std::size_t count = 3;
  double half_span = 0.75;  // teeth cover [-half_span, half_span]
};

struct TwoCutOptions : ProfileOptions {
  TwoCutOptions() {
    a = 0.02;
    b = 0.01;
    params = TissueParams{1.0, 0.05, 0.15, 1.0};
  }
  // Explicit actions; when unset, vertical cuts of the given powers at the
  // grid points nearest -0.3 and 0.25 of the half extent.
  std::optional<LaserAction<2>> first;
  std::optional<LaserAction<2>> second;
  double first_power = 0.6;
  double second_power = 0.5;
  std::size_t power_levels = 64;
};

namespace detail {

// Surface grid plus the same spacing continued `pad` knots past each end.
inline std::vector<double> padded_axis(const std::vector<double>& xs, std::size_t pad) {
  const double h = xs.size() > 1 ? (xs[1] - xs[0]) : 1.0;
  std::vector<double> out;
  out.reserve(xs.size() + 2 * pad);
  for (std::size_t k = pad; k > 0; --k) out.push_back(xs.front() - h * static_cast<double>(k));
  out.insert(out.end(), xs.begin(), xs.end());
  for (std::size_t k = 1; k <= pad; ++k) out.push_back(xs.back() + h * static_cast<double>(k));
  return out;
}

inline void check_profile(const ProfileOptions& o) {
  if (!(o.half_extent > 0.0) || o.points < 2 || !(o.depth >= 0.0) || o.a < 0.0 || o.b < 0.0 ||
      o.pad_fraction < 0.0 || !o.params.valid()) {
    throw ValidationError("generator: non-positive geometry or invalid parameters");
  }
}

template <typename Depth>
Scenario<2> profile_scenario(std::string name, const ProfileOptions& o, Depth&& objective_depth) {
  check_profile(o);
  const auto xs = linspace(-o.half_extent, o.half_extent, o.points);
  const auto knots =
      padded_axis(xs, static_cast<std::size_t>(std::ceil(o.pad_fraction * static_cast<double>(o.points))));
  Scenario<2> s;
  s.name = std::move(name);
  s.initial = flat_surface(xs);
  s.params = o.params;
  s.objective = sample_field(knots, [&](double x) { return -objective_depth(x); });
  s.constraint =
      sample_field(knots, [&](double x) { return -objective_depth(x) - o.a * std::abs(x) - o.b; });
  s.generator = {{"a", o.a},
                 {"b", o.b},
                 {"depth", o.depth},
                 {"half_extent", o.half_extent},
                 {"points", static_cast<double>(o.points)}};
  return s;
}

}  // namespace detail

inline Scenario<2> gen_square_well(const SquareWellOptions& o = {}) {
  if (!(o.half_width > 0.0)) throw ValidationError("square well: non-positive width");
  auto s = detail::profile_scenario("square-well", o, [&](double x) {
    return std::abs(x) <= o.half_width ? o.depth : 0.0;
  });
  s.generator["half_width"] = o.half_width;
  validate(s);
  return s;
}

/// `count` descending ramps across [-half_span, half_span], each falling
/// linearly from 0 to -depth and jumping back to 0.
inline Scenario<2> gen_sawtooth(const SawtoothOptions& o = {}) {
  if (o.count == 0 || !(o.half_span > 0.0)) throw ValidationError("sawtooth: non-positive geometry");
  const double period = 2.0 * o.half_span / static_cast<double>(o.count);
  auto s = detail::profile_scenario("sawtooth", o, [&](double x) {
    if (x < -o.half_span || x >= o.half_span) return 0.0;
    const double u = (x + o.half_span) / period;
    const double frac = u - std::floor(u);
    return o.depth * frac;
  });
  s.generator["count"] = static_cast<double>(o.count);
  s.generator["half_span"] = o.half_span;
  validate(s);
  return s;
}

inline double nearest_grid_point(const std::vector<double>& xs, double x) {
  return *std::min_element(xs.begin(), xs.end(), [&](double a, double b) {
    return std::abs(a - x) < std::abs(b - x);
  });
}

/// Objective = a flat surface after two simulated cuts.
inline Scenario<2> gen_two_cut(const TwoCutOptions& o = {}) {
  detail::check_profile(o);
  const auto xs = linspace(-o.half_extent, o.half_extent, o.points);
  const auto first =
      o.first.value_or(vertical_cut<2>({nearest_grid_point(xs, -0.3 * o.half_extent)}, o.first_power));
  const auto second =
      o.second.value_or(vertical_cut<2>({nearest_grid_point(xs, 0.25 * o.half_extent)}, o.second_power));
  if (!first.valid() || !second.valid()) throw ValidationError("two-cut: invalid action");

  const auto knots = detail::padded_axis(
      xs, static_cast<std::size_t>(std::ceil(o.pad_fraction * static_cast<double>(o.points))));
  // Simulate on the knot lattice itself so the field is exact at every knot.
  auto cut = flat_surface(knots);
  cut = apply_ablation(cut, first, o.params).new_surface;
  cut = apply_ablation(cut, second, o.params).new_surface;
  double deepest = 0.0;
  std::vector<double> kx, kz;
  for (const auto& p : cut.points()) {
    kx.push_back(p[0]);
    kz.push_back(p[1]);
    deepest = std::max(deepest, -p[1]);
  }
  if (!(deepest > 0.0)) throw DegenerateScenarioError("two-cut: the actions ablate nothing");
  for (std::size_t i = 1; i < kx.size(); ++i) {
    if (!(kx[i] > kx[i - 1])) {
      throw ValidationError("two-cut: angled cuts folded the objective; it is not a height field");
    }
  }
  // Angled cuts shift knots laterally; resample onto the regular knot grid.
  const BoundaryField<2> shifted({kx}, kz);
  Scenario<2> s;
  s.name = "two-cut";
  s.initial = flat_surface(xs);
  s.params = o.params;
  s.objective = sample_field(knots, [&](double x) {
    return shifted.contains({x}) ? shifted({x}) : 0.0;
  });
  s.constraint = sample_field(knots, [&](double x) { return s.objective({x}) - o.a * std::abs(x) - o.b; });
  // The cut flanks are shallow; finer power steps let the planner finish
  // them without overcutting.
  s.sampler.power_levels = o.power_levels;
  s.generator = {{"a", o.a},
                 {"b", o.b},
                 {"half_extent", o.half_extent},
                 {"points", static_cast<double>(o.points)},
                 {"cut1_x", first.position[0]},
                 {"cut1_theta", first.angles[0]},
                 {"cut1_power", first.power},
                 {"cut2_x", second.position[0]},
                 {"cut2_theta", second.angles[0]},
                 {"cut2_power", second.power}};
  validate(s);
  return s;
}

struct GaussianBlob {
  double cx = 0.0, cy = 0.0;
  double depth = 0.0;
  double sigma = 1.0;

  double operator()(double x, double y) const {
    const double r2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
    return depth * std::exp(-r2 / (2.0 * sigma * sigma));
  }
  // Integral over the whole plane.
  double volume() const { return 2.0 * M_PI * sigma * sigma * depth; }
};

/// A quarter of a horizontal torus (a curved vessel) centred at (cx, cy)
/// with its tube axis at height cz.
struct QuarterTorus {
  double cx = 0.0, cy = 0.0, cz = -6.0;
  double major_radius = 4.0;
  double tube_radius = 1.0;
  double start_angle = 0.0;  // the quarter spans [start_angle, start_angle + pi/2]

  std::optional<double> top(double x, double y) const {
    const double dx = x - cx, dy = y - cy;
    double ang = std::atan2(dy, dx) - start_angle;
    ang -= 2.0 * M_PI * std::floor(ang / (2.0 * M_PI));
    if (ang > M_PI / 2) return std::nullopt;
    const double off = std::hypot(dx, dy) - major_radius;
    if (std::abs(off) > tube_radius) return std::nullopt;
    return cz + std::sqrt(tube_radius * tube_radius - off * off);
  }
};

struct TumorOptions {
  std::size_t nx = 100, ny = 100;
  double half_extent = 10.0;
  double pad_fraction = 0.25;
  double plane_z = 0.0;
  std::vector<GaussianBlob> blobs{{-1.5, -1.0, 4.0, 2.5}, {2.0, 1.5, 3.0, 2.0}};
  std::optional<QuarterTorus> vessel = QuarterTorus{2.0, -2.0, -5.0, 4.0, 1.0, -M_PI / 2};
  double margin = 0.3;  // constraint depth below the objective away from the vessel
  TissueParams params{1.0, 0.2, 2.0, 1.0};
};

/// 3D resection scenario: a flat tissue plane, a smooth multi-Gaussian tumour
/// cavity as the objective, and a constraint `margin` below it that is raised
/// over a quarter-torus vessel (never above the objective).
inline Scenario<3> gen_tumor_3d(const TumorOptions& o = {}) {
  if (o.nx < 2 || o.ny < 2 || !(o.half_extent > 0.0) || o.margin < 0.0 || !o.params.valid()) {
    throw ValidationError("tumor: invalid grid or parameters");
  }
  for (const auto& b : o.blobs) {
    if (b.depth < 0.0 || !(b.sigma > 0.0)) throw ValidationError("tumor: invalid blob");
  }
  if (o.vessel && o.vessel->cz + o.vessel->tube_radius >= o.plane_z) {
    throw InfeasibleError("tumor: vessel intersects the tissue surface");
  }
  const auto xs = linspace(-o.half_extent, o.half_extent, o.nx);
  const auto ys = linspace(-o.half_extent, o.half_extent, o.ny);
  const auto kx = detail::padded_axis(
      xs, static_cast<std::size_t>(std::ceil(o.pad_fraction * static_cast<double>(o.nx))));
  const auto ky = detail::padded_axis(
      ys, static_cast<std::size_t>(std::ceil(o.pad_fraction * static_cast<double>(o.ny))));
  auto indentation = [&](double x, double y) {
    double d = 0.0;
    for (const auto& b : o.blobs) d += b(x, y);
    return d;
  };
  Scenario<3> s;
  s.name = "tumor-3d";
  s.initial = flat_surface(xs, ys, o.plane_z);
  s.params = o.params;
  s.objective = sample_field(kx, ky, [&](double x, double y) { return o.plane_z - indentation(x, y); });
  s.constraint = sample_field(kx, ky, [&](double x, double y) {
    const double zo = o.plane_z - indentation(x, y);
    double zc = zo - o.margin;
    if (o.vessel) {
      if (auto top = o.vessel->top(x, y)) zc = std::max(zc, *top);
    }
    return std::min(zc, zo);
  });
  s.generator = {{"half_extent", o.half_extent},
                 {"nx", static_cast<double>(o.nx)},
                 {"ny", static_cast<double>(o.ny)},
                 {"margin", o.margin},
                 {"blobs", static_cast<double>(o.blobs.size())}};
  if (o.vessel) {
    s.generator["vessel_cx"] = o.vessel->cx;
    s.generator["vessel_cy"] = o.vessel->cy;
    s.generator["vessel_cz"] = o.vessel->cz;
    s.generator["vessel_R"] = o.vessel->major_radius;
    s.generator["vessel_r"] = o.vessel->tube_radius;
  }
  validate(s);
  return s;
}

}  // namespace ablate
