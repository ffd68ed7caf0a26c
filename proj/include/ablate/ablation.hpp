#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "ablate/geometry.hpp"

namespace ablate {

/// Steady-state Gaussian point ablation: depth removed at orthogonal
/// distance `d` from the beam axis, clamped at zero below threshold.
inline double point_displacement(const TissueParams& params, double power, double d) {
  const double energy = power * params.dt * std::exp(-2.0 * d * d / (params.w * params.w));
  return std::max(0.0, energy - params.phi) / params.beta;
}

template <int D>
struct AblationOutcome {
  TissueSurface<D> new_surface;
  std::vector<double> per_point_displacement;
  double max_displacement = 0.0;
};

/// Moves every point along the beam axis by its point displacement. The
/// input surface is left untouched.
template <int D>
AblationOutcome<D> apply_ablation(const TissueSurface<D>& surface, const LaserAction<D>& action,
                                  const TissueParams& params) {
  const LaserAxis<D> axis = axis_from_action(action);
  std::vector<Point<D>> moved(surface.points().begin(), surface.points().end());
  AblationOutcome<D> out;
  out.per_point_displacement.resize(moved.size(), 0.0);
  for (std::size_t i = 0; i < moved.size(); ++i) {
    const double dp =
        point_displacement(params, action.power, orthogonal_distance(axis, moved[i]));
    out.per_point_displacement[i] = dp;
    if (dp > 0.0) {
      for (int k = 0; k < D; ++k) moved[i][k] += dp * axis.direction[k];
      out.max_displacement = std::max(out.max_displacement, dp);
    }
  }
  out.new_surface = TissueSurface<D>(std::move(moved), surface.shape());
  return out;
}

/// Replays a sequence of cuts, returning only the final surface.
template <int D>
TissueSurface<D> apply_sequence(TissueSurface<D> surface, std::span<const LaserAction<D>> actions,
                                const TissueParams& params) {
  for (const auto& a : actions) surface = apply_ablation(surface, a, params).new_surface;
  return surface;
}

/// Total depth at each position when a vertical cut of power `powers[i]` is
/// fired at every `xs[i]`. Entry j is the depth removed at xs[j].
inline std::vector<double> superposed_depth(std::span<const double> xs,
                                            std::span<const double> powers,
                                            const TissueParams& params) {
  if (xs.size() != powers.size()) {
    throw std::invalid_argument("superposed_depth: positions and powers differ in length");
  }
  const std::size_t n = xs.size();
  std::vector<double> depth(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (powers[i] < 0.0) throw std::invalid_argument("superposed_depth: negative power");
    for (std::size_t j = 0; j < n; ++j) {
      depth[j] += point_displacement(params, powers[i], std::abs(xs[i] - xs[j]));
    }
  }
  return depth;
}

}  // namespace ablate
