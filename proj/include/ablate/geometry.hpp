#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <type_traits>
#include <vector>

namespace ablate {

// Coordinates are (x, z) in 2D and (x, y, z) in 3D. The last component is
// always the vertical one; tissue lies below z = 0 at the start of a cut and
// the beam travels downward.
template <int D>
using Point = std::array<double, D>;

// Coordinates on the reference plane (everything but the vertical component).
template <int D>
using Lateral = std::array<double, D - 1>;

template <int D>
constexpr Lateral<D> lateral_of(const Point<D>& p) {
  Lateral<D> out{};
  for (int k = 0; k < D - 1; ++k) out[k] = p[k];
  return out;
}

template <int D>
constexpr double height_of(const Point<D>& p) {
  return p[D - 1];
}

// Tissue and laser constants shared by every cut in a scenario.
struct TissueParams {
  double beta = 1.0;  // energy per unit depth (density x ablation enthalpy)
  double phi = 0.0;   // threshold energy
  double w = 1.0;     // beam spot size
  double dt = 1.0;    // exposure time per cut

  bool valid() const {
    return beta > 0.0 && phi >= 0.0 && w > 0.0 && dt > 0.0 && std::isfinite(beta) &&
           std::isfinite(phi) && std::isfinite(w) && std::isfinite(dt);
  }

  friend bool operator==(const TissueParams&, const TissueParams&) = default;
};

// One cut: where the beam crosses the reference plane, its tilt(s) from
// vertical, and its power.
template <int D>
struct LaserAction {
  Lateral<D> position{};
  Lateral<D> angles{};
  double power = 0.0;

  bool valid() const {
    if (!(power >= 0.0) || !std::isfinite(power)) return false;
    for (double a : angles) {
      if (!(std::abs(a) < M_PI / 2)) return false;
    }
    return true;
  }

  friend bool operator==(const LaserAction&, const LaserAction&) = default;
};

template <int D>
LaserAction<D> vertical_cut(const Lateral<D>& position, double power) {
  return LaserAction<D>{position, Lateral<D>{}, power};
}

template <int D>
struct LaserAxis {
  Point<D> origin{};
  Point<D> direction{};
};

/// Beam center line for an action. In 2D the direction is
/// (sin t, -cos t). In 3D each tilt is the projected angle in its own
/// vertical plane, i.e. the direction is normalize(tan tx, tan ty, -1),
/// which collapses to the 2D form when one tilt is zero.
template <int D>
LaserAxis<D> axis_from_action(const LaserAction<D>& action) {
  LaserAxis<D> axis;
  for (int k = 0; k < D - 1; ++k) axis.origin[k] = action.position[k];
  axis.origin[D - 1] = 0.0;
  if constexpr (D == 2) {
    axis.direction = {std::sin(action.angles[0]), -std::cos(action.angles[0])};
  } else {
    double norm2 = 1.0;
    for (int k = 0; k < D - 1; ++k) {
      const double t = std::tan(action.angles[k]);
      axis.direction[k] = t;
      norm2 += t * t;
    }
    axis.direction[D - 1] = -1.0;
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& c : axis.direction) c *= inv;
  }
  return axis;
}

/// Perpendicular distance from `p` to the infinite line through the axis.
template <int D>
double orthogonal_distance(const LaserAxis<D>& axis, const std::type_identity_t<Point<D>>& p) {
  Point<D> v;
  double along = 0.0;
  for (int k = 0; k < D; ++k) {
    v[k] = p[k] - axis.origin[k];
    along += v[k] * axis.direction[k];
  }
  double d2 = 0.0;
  for (int k = 0; k < D; ++k) {
    const double r = v[k] - along * axis.direction[k];
    d2 += r * r;
  }
  return std::sqrt(d2);
}

/// Ordered point cloud describing the air-tissue boundary.
///
/// `shape` records the lattice the cloud was built on: {n} in 2D and
/// {nx, ny} in 3D with x varying fastest. Ablation moves points but never
/// reorders, adds or drops them, so the shape stays valid for the lifetime
/// of every derived surface.
template <int D>
class TissueSurface {
 public:
  using Shape = std::array<std::size_t, D - 1>;

  TissueSurface() = default;

  TissueSurface(std::vector<Point<D>> points, Shape shape)
      : points_(std::move(points)), shape_(shape) {
    std::size_t expect = 1;
    for (auto s : shape_) expect *= s;
    if (expect != points_.size()) {
      throw std::invalid_argument("TissueSurface: shape does not match point count");
    }
  }

  explicit TissueSurface(std::vector<Point<D>> points)
    requires(D == 2)
      : points_(std::move(points)), shape_{points_.size()} {}

  std::span<const Point<D>> points() const { return points_; }
  const Point<D>& operator[](std::size_t i) const { return points_[i]; }
  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const Shape& shape() const { return shape_; }

  friend bool operator==(const TissueSurface&, const TissueSurface&) = default;

 private:
  std::vector<Point<D>> points_;
  Shape shape_{};
};

/// Flat 2D surface at height z0 on the given x coordinates.
inline TissueSurface<2> flat_surface(std::span<const double> xs, double z0 = 0.0) {
  std::vector<Point<2>> pts;
  pts.reserve(xs.size());
  for (double x : xs) pts.push_back({x, z0});
  return TissueSurface<2>(std::move(pts));
}

/// Flat 3D surface on the tensor grid xs x ys (x fastest).
inline TissueSurface<3> flat_surface(std::span<const double> xs, std::span<const double> ys,
                                     double z0 = 0.0) {
  std::vector<Point<3>> pts;
  pts.reserve(xs.size() * ys.size());
  for (double y : ys) {
    for (double x : xs) pts.push_back({x, y, z0});
  }
  return TissueSurface<3>(std::move(pts), {xs.size(), ys.size()});
}

/// `count` evenly spaced values covering [lo, hi] inclusive.
inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  if (count == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(count - 1);
  for (std::size_t i = 0; i < count; ++i) out[i] = lo + step * static_cast<double>(i);
  out.back() = hi;
  return out;
}

}  // namespace ablate
