#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "ablate/boundary.hpp"
#include "ablate/geometry.hpp"

namespace ablate {

inline constexpr double kDefaultViolationTolerance = 1e-9;
inline constexpr double kDefaultLambda = 4.0;

struct CostBreakdown {
  double modified_cost = 0.0;
  double undercut_sq = 0.0;
  double overcut_sq = 0.0;
  double lambda = kDefaultLambda;
};

// Signed gap z_d - z at a point: negative while tissue remains above the
// objective (undercut), positive once the point has been cut past it.
template <int D>
double objective_gap(const BoundaryField<D>& objective, const std::type_identity_t<Point<D>>& p) {
  return objective(lateral_of<D>(p)) - height_of<D>(p);
}

inline double point_cost(double gap, double lambda) {
  return gap < 0.0 ? gap * gap : lambda * gap * gap;
}

template <int D>
CostBreakdown modified_cost(const TissueSurface<D>& surface, const BoundaryField<D>& objective,
                            double lambda = kDefaultLambda) {
  if (!(lambda >= 1.0)) throw std::invalid_argument("modified_cost: lambda must be >= 1");
  CostBreakdown c;
  c.lambda = lambda;
  for (const auto& p : surface.points()) {
    const double g = objective_gap(objective, p);
    if (g < 0.0) {
      c.undercut_sq += g * g;
    } else {
      c.overcut_sq += g * g;
    }
  }
  c.modified_cost = c.undercut_sq + lambda * c.overcut_sq;
  return c;
}

template <int D>
double mse(const TissueSurface<D>& surface, const BoundaryField<D>& objective) {
  if (surface.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& p : surface.points()) {
    const double g = objective_gap(objective, p);
    acc += g * g;
  }
  return acc / static_cast<double>(surface.size());
}

struct ViolationCount {
  std::size_t count = 0;
  double fraction = 0.0;
};

template <int D>
bool violates(const BoundaryField<D>& constraint, const std::type_identity_t<Point<D>>& p,
              double tolerance = kDefaultViolationTolerance) {
  return height_of<D>(p) < constraint(lateral_of<D>(p)) - tolerance;
}

template <int D>
ViolationCount violation(const TissueSurface<D>& surface, const BoundaryField<D>& constraint,
                         double tolerance = kDefaultViolationTolerance) {
  ViolationCount v;
  for (const auto& p : surface.points()) {
    if (violates(constraint, p, tolerance)) ++v.count;
  }
  v.fraction = surface.empty() ? 0.0
                               : static_cast<double>(v.count) / static_cast<double>(surface.size());
  return v;
}

struct MetricsReport {
  double mse = 0.0;
  std::size_t violation_count = 0;
  double violation_fraction = 0.0;
  double removed_healthy_volume = 0.0;
  double remaining_tumor_volume = 0.0;
  double original_tumor_volume = 0.0;
};

/// Lateral measure attached to each point of the lattice the surface was
/// built on: trapezoid weights in 2D, tensor-product trapezoid weights in
/// 3D. Computed from the given (normally initial) surface.
template <int D>
std::vector<double> cell_weights(const TissueSurface<D>& surface) {
  auto axis_weights = [](const std::vector<double>& c) {
    std::vector<double> w(c.size(), 0.0);
    for (std::size_t i = 0; i + 1 < c.size(); ++i) {
      const double h = 0.5 * (c[i + 1] - c[i]);
      w[i] += h;
      w[i + 1] += h;
    }
    return w;
  };
  const auto pts = surface.points();
  if constexpr (D == 2) {
    std::vector<double> xs;
    xs.reserve(pts.size());
    for (const auto& p : pts) xs.push_back(p[0]);
    return axis_weights(xs);
  } else {
    const auto [nx, ny] = surface.shape();
    std::vector<double> xs(nx), ys(ny);
    for (std::size_t i = 0; i < nx; ++i) xs[i] = pts[i][0];
    for (std::size_t j = 0; j < ny; ++j) ys[j] = pts[j * nx][1];
    const auto wx = axis_weights(xs);
    const auto wy = axis_weights(ys);
    std::vector<double> w(nx * ny);
    for (std::size_t j = 0; j < ny; ++j) {
      for (std::size_t i = 0; i < nx; ++i) w[j * nx + i] = wx[i] * wy[j];
    }
    return w;
  }
}

/// Prismatic volume bookkeeping between the initial surface, the final
/// surface and the objective. Cell areas come from the initial lattice;
/// each final point is compared with the objective at its own (possibly
/// shifted) lateral position.
template <int D>
MetricsReport volume_metrics(const TissueSurface<D>& initial, const TissueSurface<D>& final_surface,
                             const BoundaryField<D>& objective) {
  if (initial.size() != final_surface.size()) {
    throw std::invalid_argument("volume_metrics: surfaces have different point counts");
  }
  const auto w = cell_weights(initial);
  MetricsReport r;
  for (std::size_t i = 0; i < initial.size(); ++i) {
    const double tumor = -objective_gap(objective, initial[i]);
    const double g = objective_gap(objective, final_surface[i]);
    if (tumor > 0.0) {
      r.original_tumor_volume += w[i] * tumor;
      r.remaining_tumor_volume += w[i] * std::max(0.0, -g);
    }
    r.removed_healthy_volume += w[i] * std::max(0.0, g);
  }
  return r;
}

/// Full report: error, violation and volume metrics for a final state.
template <int D>
MetricsReport evaluate(const TissueSurface<D>& initial, const TissueSurface<D>& final_surface,
                       const BoundaryField<D>& objective, const BoundaryField<D>& constraint,
                       double tolerance = kDefaultViolationTolerance) {
  MetricsReport r = volume_metrics(initial, final_surface, objective);
  r.mse = mse(final_surface, objective);
  const auto v = violation(final_surface, constraint, tolerance);
  r.violation_count = v.count;
  r.violation_fraction = v.fraction;
  return r;
}

}  // namespace ablate
