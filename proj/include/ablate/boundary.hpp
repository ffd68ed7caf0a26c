#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "ablate/geometry.hpp"

namespace ablate {

/// Height field sampled on a tensor grid of knots, used for objective and
/// constraint boundaries. Piecewise linear in 2D, bilinear in 3D. Heights are
/// stored with the first lateral axis varying fastest.
template <int D>
class BoundaryField {
 public:
  using Knots = std::array<std::vector<double>, D - 1>;

  BoundaryField() = default;

  BoundaryField(Knots knots, std::vector<double> heights)
      : knots_(std::move(knots)), heights_(std::move(heights)) {
    std::size_t expect = 1;
    for (const auto& axis : knots_) {
      if (axis.size() < 2) throw std::invalid_argument("BoundaryField: need at least 2 knots per axis");
      for (std::size_t i = 1; i < axis.size(); ++i) {
        if (!(axis[i] > axis[i - 1])) {
          throw std::invalid_argument("BoundaryField: knots must be strictly increasing");
        }
      }
      expect *= axis.size();
    }
    if (heights_.size() != expect) {
      throw std::invalid_argument("BoundaryField: height count does not match knot grid");
    }
    for (double h : heights_) {
      if (!std::isfinite(h)) throw std::invalid_argument("BoundaryField: non-finite height");
    }
  }

  const Knots& knots() const { return knots_; }
  const std::vector<double>& heights() const { return heights_; }

  bool contains(const Lateral<D>& q) const {
    for (int k = 0; k < D - 1; ++k) {
      if (!(q[k] >= knots_[k].front() && q[k] <= knots_[k].back())) return false;
    }
    return true;
  }

  /// Throws std::domain_error outside the knot range.
  double operator()(const Lateral<D>& q) const {
    if (!contains(q)) throw std::domain_error("BoundaryField: query outside knot range");
    if constexpr (D == 2) {
      const auto [i, t] = locate(knots_[0], q[0]);
      if (t == 0.0) return heights_[i];
      return heights_[i] + t * (heights_[i + 1] - heights_[i]);
    } else {
      const auto [ix, tx] = locate(knots_[0], q[0]);
      const auto [iy, ty] = locate(knots_[1], q[1]);
      const std::size_t nx = knots_[0].size();
      const std::size_t ix1 = tx == 0.0 ? ix : ix + 1;
      const std::size_t iy1 = ty == 0.0 ? iy : iy + 1;
      const double h00 = heights_[iy * nx + ix];
      const double h10 = heights_[iy * nx + ix1];
      const double h01 = heights_[iy1 * nx + ix];
      const double h11 = heights_[iy1 * nx + ix1];
      if (tx == 0.0 && ty == 0.0) return h00;
      const double lo = h00 + tx * (h10 - h00);
      const double hi = h01 + tx * (h11 - h01);
      return lo + ty * (hi - lo);
    }
  }

  /// Height stored at a knot index (x fastest).
  double at_knot(std::size_t flat_index) const { return heights_[flat_index]; }

  friend bool operator==(const BoundaryField&, const BoundaryField&) = default;

 private:
  struct Cell {
    std::size_t index;
    double t;
  };

  // Cell index and fractional offset; t == 0 exactly when q hits a knot.
  static Cell locate(const std::vector<double>& axis, double q) {
    auto it = std::upper_bound(axis.begin(), axis.end(), q);
    std::size_t hi = static_cast<std::size_t>(it - axis.begin());
    if (hi == 0) hi = 1;
    std::size_t lo = hi - 1;
    if (axis[lo] == q) return {lo, 0.0};
    if (hi == axis.size()) return {axis.size() - 1, 0.0};  // q == back()
    return {lo, (q - axis[lo]) / (axis[hi] - axis[lo])};
  }

  Knots knots_{};
  std::vector<double> heights_;
};

template <int D>
double interpolate(const BoundaryField<D>& field, const std::type_identity_t<Lateral<D>>& q) {
  return field(q);
}

/// Builds a field by sampling `fn` on the knot grid.
template <typename Fn>
BoundaryField<2> sample_field(std::vector<double> xs, Fn&& fn) {
  std::vector<double> h;
  h.reserve(xs.size());
  for (double x : xs) h.push_back(fn(x));
  return BoundaryField<2>({std::move(xs)}, std::move(h));
}

template <typename Fn>
BoundaryField<3> sample_field(std::vector<double> xs, std::vector<double> ys, Fn&& fn) {
  std::vector<double> h;
  h.reserve(xs.size() * ys.size());
  for (double y : ys) {
    for (double x : xs) h.push_back(fn(x, y));
  }
  return BoundaryField<3>({std::move(xs), std::move(ys)}, std::move(h));
}

}  // namespace ablate
