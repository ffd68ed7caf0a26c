#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

#include "ablate/boundary.hpp"
#include "ablate/cost.hpp"
#include "ablate/geometry.hpp"

namespace ablate {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Child seed for the `index`-th independent stream derived from `base`.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
  return splitmix64(splitmix64(base) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

// mt19937_64 with its own uniform mapping so draws do not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  std::size_t uniform_index(std::size_t n) {
    return std::min(n - 1, static_cast<std::size_t>(uniform01() * static_cast<double>(n)));
  }

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

/// Inverse-CDF sampling over cumulative sums of exact (unnormalized) weights.
class WeightedSampler {
 public:
  WeightedSampler() = default;
  explicit WeightedSampler(std::span<const double> weights) { assign(weights); }

  void assign(std::span<const double> weights) {
    cumulative_.clear();
    cumulative_.reserve(weights.size());
    for (double w : weights) push_back(w);
  }

  void push_back(double w) {
    if (!(w > 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("WeightedSampler: weights must be positive and finite");
    }
    cumulative_.push_back(total() + w);
  }

  double total() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
  std::size_t size() const { return cumulative_.size(); }

  std::size_t sample(Rng& rng) const {
    if (cumulative_.empty()) throw std::logic_error("WeightedSampler: empty");
    const double u = rng.uniform01() * total();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return std::min(cumulative_.size() - 1, static_cast<std::size_t>(it - cumulative_.begin()));
  }

 private:
  std::vector<double> cumulative_;
};

/// Node selection weights (max(C) - C_i)^a + eps_n, favouring low-cost nodes.
inline std::vector<double> node_weights(std::span<const double> costs, double a, double eps_n) {
  if (costs.empty()) throw std::invalid_argument("node_weights: empty cost list");
  const double top = *std::max_element(costs.begin(), costs.end());
  std::vector<double> w;
  w.reserve(costs.size());
  for (double c : costs) w.push_back(std::pow(top - c, a) + eps_n);
  return w;
}

/// Per-point modified-cost contribution plus eps_L.
template <int D>
std::vector<double> position_weights(const TissueSurface<D>& surface,
                                     const BoundaryField<D>& objective, double lambda,
                                     double eps_l) {
  std::vector<double> w;
  w.reserve(surface.size());
  for (const auto& p : surface.points()) {
    w.push_back(point_cost(objective_gap(objective, p), lambda) + eps_l);
  }
  return w;
}

/// Power that would take a point with vertical gap `gap` down to the
/// objective in one centred cut.
inline double predicted_power(const TissueParams& params, double gap) {
  return (params.beta * std::abs(gap) + params.phi) / params.dt;
}

/// Height of the surface above lateral coordinate `x`, linearly
/// interpolated along the ordered cloud. The first segment that brackets
/// `x` wins when the cloud folds over itself.
inline double surface_height_at(const TissueSurface<2>& surface, double x) {
  const auto pts = surface.points();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    if (pts[i][0] == x) return pts[i][1];
  }
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double x0 = pts[i][0], x1 = pts[i + 1][0];
    if ((x0 < x && x < x1) || (x1 < x && x < x0)) {
      const double t = (x - x0) / (x1 - x0);
      return pts[i][1] + t * (pts[i + 1][1] - pts[i][1]);
    }
  }
  throw std::domain_error("surface_height_at: x outside the surface");
}

// 3D clouds have no natural connectivity after angled cuts; use the nearest
// point in the lateral plane.
inline double surface_height_at(const TissueSurface<3>& surface, const Lateral<3>& q) {
  const auto pts = surface.points();
  if (pts.empty()) throw std::domain_error("surface_height_at: empty surface");
  std::size_t best = 0;
  double best_d2 = INFINITY;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double dx = pts[i][0] - q[0], dy = pts[i][1] - q[1];
    const double d2 = dx * dx + dy * dy;
    if (d2 < best_d2) {
      best_d2 = d2;
      best = i;
    }
  }
  return pts[best][2];
}

inline double predicted_power(const TissueSurface<2>& surface, const BoundaryField<2>& objective,
                              double x_l, const TissueParams& params) {
  const double gap = objective({x_l}) - surface_height_at(surface, x_l);
  return predicted_power(params, gap);
}

inline double predicted_power(const TissueSurface<3>& surface, const BoundaryField<3>& objective,
                              const Lateral<3>& q, const TissueParams& params) {
  const double gap = objective(q) - surface_height_at(surface, q);
  return predicted_power(params, gap);
}

/// exp(b * (max(E_I) - |E_i - E_p|)); largest at the level nearest E_p.
inline std::vector<double> power_weights(std::span<const double> power_set, double e_p, double b) {
  if (power_set.empty()) throw std::invalid_argument("power_weights: empty power set");
  const double top = *std::max_element(power_set.begin(), power_set.end());
  std::vector<double> w;
  w.reserve(power_set.size());
  for (double e : power_set) w.push_back(std::exp(b * (top - std::abs(e - e_p))));
  return w;
}

/// power_weights divided by its largest entry. Same distribution, but safe
/// from overflow when b * max(E_I) is large.
inline std::vector<double> power_weights_scaled(std::span<const double> power_set, double e_p,
                                                double b) {
  if (power_set.empty()) throw std::invalid_argument("power_weights: empty power set");
  double nearest = INFINITY;
  for (double e : power_set) nearest = std::min(nearest, std::abs(e - e_p));
  std::vector<double> w;
  w.reserve(power_set.size());
  for (double e : power_set) {
    w.push_back(std::max(std::exp(b * (nearest - std::abs(e - e_p))),
                         std::numeric_limits<double>::min()));
  }
  return w;
}

}  // namespace ablate
