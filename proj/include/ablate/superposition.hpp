#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

#include "ablate/ablation.hpp"
#include "ablate/boundary.hpp"
#include "ablate/geometry.hpp"
#include "ablate/graph_planner.hpp"
#include "ablate/sampling.hpp"

namespace ablate {

/// Vertical-cut planning problem: one cut per surface point, each point's
/// depth is the clamped superposition of every cut's Gaussian footprint.
/// Only the 2D case is supported; the dense n x n footprint matrix makes a
/// 100 x 100 grid need 10^8 entries.
struct SuperpositionProblem {
  std::vector<double> xs;
  std::vector<double> footprint;  // P, row-major: footprint[i * n + j] = P_ij
  std::vector<double> target_depths;
  std::vector<double> constraint_depths;
  TissueParams params;
  bool target_clamped = false;      // objective was above the surface somewhere
  bool constraint_clamped = false;  // surface already below the constraint somewhere

  std::size_t size() const { return xs.size(); }
  double p(std::size_t i, std::size_t j) const { return footprint[i * xs.size() + j]; }
};

inline SuperpositionProblem assemble(const TissueSurface<2>& surface,
                                     const BoundaryField<2>& objective,
                                     const BoundaryField<2>& constraint,
                                     const TissueParams& params) {
  SuperpositionProblem prob;
  prob.params = params;
  const std::size_t n = surface.size();
  prob.xs.reserve(n);
  for (const auto& p : surface.points()) prob.xs.push_back(p[0]);
  {
    auto sorted = prob.xs;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
      throw std::invalid_argument("assemble: duplicate lateral positions");
    }
  }
  prob.footprint.resize(n * n);
  const double inv_w2 = 1.0 / (params.w * params.w);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double d = prob.xs[i] - prob.xs[j];
      prob.footprint[i * n + j] = params.dt * std::exp(-2.0 * d * d * inv_w2);
    }
  }
  prob.target_depths.resize(n);
  prob.constraint_depths.resize(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double z = surface[j][1];
    double t = z - objective({prob.xs[j]});
    double c = z - constraint({prob.xs[j]});
    if (t < 0.0) {
      t = 0.0;
      prob.target_clamped = true;
    }
    if (c < 0.0) {
      c = 0.0;
      prob.constraint_clamped = true;
    }
    prob.target_depths[j] = std::min(t, c);
    prob.constraint_depths[j] = c;
  }
  return prob;
}

/// Depth removed at every position by the power vector (Hadamard form).
inline std::vector<double> forward(const SuperpositionProblem& prob, std::span<const double> powers) {
  const std::size_t n = prob.size();
  if (powers.size() != n) throw std::invalid_argument("forward: power vector has wrong length");
  std::vector<double> depth(n, 0.0);
  const double phi = prob.params.phi;
  for (std::size_t i = 0; i < n; ++i) {
    const double e = powers[i];
    if (e < 0.0) throw std::invalid_argument("forward: negative power");
    if (e == 0.0) continue;
    const double* row = &prob.footprint[i * n];
    for (std::size_t j = 0; j < n; ++j) {
      const double v = e * row[j] - phi;
      if (v > 0.0) depth[j] += v;
    }
  }
  const double inv_beta = 1.0 / prob.params.beta;
  for (double& d : depth) d *= inv_beta;
  return depth;
}

struct SolverConfig {
  std::size_t random_starts = 4;
  std::size_t max_iterations = 5000;  // per penalty round
  double relative_tolerance = 1e-10;
  double penalty_initial = 10.0;
  double penalty_growth = 10.0;
  std::size_t penalty_rounds = 6;
  double feasibility_tolerance = 1e-9;
  std::uint64_t seed = 7;
  std::size_t threads = 1;
  // Optional first start (e.g. the previous plan when re-planning).
  std::vector<double> warm_start;
};

struct SolveResult {
  std::vector<double> powers;
  std::vector<double> achieved_depths;
  double residual_mse = 0.0;
  bool feasible = false;
  std::size_t iterations = 0;
  std::size_t start_index = 0;
};

namespace detail {

struct PenaltyEval {
  double value = 0.0;
  std::vector<double> depth;
};

inline double sq(double v) { return v * v; }

// Largest power whose centred cut removes nothing. Every power in
// [0, noop_power] is equivalent to not cutting, so the descent works on
// E >= noop_power, where the one-sided derivative of the centre term is
// nonzero and a cut can switch on.
inline double noop_power(const SuperpositionProblem& prob) {
  return prob.params.phi / prob.params.dt;
}

inline PenaltyEval penalty_value(const SuperpositionProblem& prob, std::span<const double> e,
                                 double mu) {
  PenaltyEval ev;
  ev.depth = forward(prob, e);
  for (std::size_t j = 0; j < ev.depth.size(); ++j) {
    ev.value += sq(ev.depth[j] - prob.target_depths[j]);
    const double excess = ev.depth[j] - prob.constraint_depths[j];
    if (excess > 0.0) ev.value += mu * excess * excess;
  }
  return ev;
}

// Steepest-descent (sub)gradient of the penalized objective. Each power's
// footprint terms switch on where E_i P_ij crosses phi; a term within a
// relative 1e-9 of that kink counts toward the derivative only in the
// direction that switches it on. The component returned is the one-sided
// derivative of the descending direction, or 0 when neither direction
// descends (the power sits on a convex kink).
inline std::vector<double> penalty_gradient(const SuperpositionProblem& prob,
                                            std::span<const double> e,
                                            std::span<const double> depth, double mu) {
  const std::size_t n = prob.size();
  std::vector<double> r(n);
  for (std::size_t j = 0; j < n; ++j) {
    r[j] = 2.0 * (depth[j] - prob.target_depths[j]);
    const double excess = depth[j] - prob.constraint_depths[j];
    if (excess > 0.0) r[j] += 2.0 * mu * excess;
  }
  const double phi = prob.params.phi;
  const double kink_tol = 1e-9 * std::max(phi, 1e-300);
  const double inv_beta = 1.0 / prob.params.beta;
  std::vector<double> g(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = &prob.footprint[i * n];
    double active = 0.0, kink = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double v = e[i] * row[j] - phi;
      if (v > kink_tol) {
        active += r[j] * row[j];
      } else if (v >= -kink_tol) {
        kink += r[j] * row[j];
      }
    }
    const double up = (active + kink) * inv_beta;  // derivative when raising E_i
    const double down = active * inv_beta;         // derivative when lowering E_i
    if (up < 0.0 && (down <= 0.0 || -up >= down)) {
      g[i] = up;
    } else if (down > 0.0) {
      g[i] = down;
    }
  }
  return g;
}

inline bool is_feasible(const SuperpositionProblem& prob, std::span<const double> depth, double tol) {
  for (std::size_t j = 0; j < depth.size(); ++j) {
    if (depth[j] > prob.constraint_depths[j] + tol) return false;
  }
  return true;
}

// Accelerated projected gradient with backtracking. Each iteration steps
// from the momentum point, halving the step (kept between iterations,
// starting at 1 and allowed to double back toward 1) until the proximal
// sufficient-decrease test holds. Iterates are monotone: a step that fails
// to beat the current point restarts the momentum. With `keep_feasible` a
// trial point must also satisfy the constraint. Returns iterations used.
inline std::size_t projected_descent(const SuperpositionProblem& prob, std::vector<double>& e,
                                     double mu, const SolverConfig& cfg, bool keep_feasible) {
  const std::size_t n = prob.size();
  const double lb = noop_power(prob);
  PenaltyEval cur = penalty_value(prob, e, mu);
  std::vector<double> prev = e;
  double t = 1.0;
  double step = 1.0;
  std::size_t it = 0;
  std::vector<double> y(n), trial(n);
  for (; it < cfg.max_iterations; ++it) {
    if (cur.value == 0.0) break;
    const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
    const double mom = (t - 1.0) / t_next;
    for (std::size_t i = 0; i < n; ++i) y[i] = std::max(lb, e[i] + mom * (e[i] - prev[i]));
    PenaltyEval at_y = mom > 0.0 ? penalty_value(prob, y, mu) : cur;
    const auto g = penalty_gradient(prob, y, at_y.depth, mu);
    bool accepted = false;
    PenaltyEval next;
    while (step > 1e-20) {
      double lin = 0.0, dist2 = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        trial[i] = std::max(lb, y[i] - step * g[i]);
        const double d = trial[i] - y[i];
        lin += g[i] * d;
        dist2 += d * d;
      }
      if (dist2 == 0.0) break;
      next = penalty_value(prob, trial, mu);
      if (next.value <= at_y.value + lin + 0.5 * dist2 / step) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    const bool improves = accepted && next.value < cur.value &&
                          (!keep_feasible || is_feasible(prob, next.depth, cfg.feasibility_tolerance));
    if (!improves) {
      if (mom == 0.0) break;  // plain projected step cannot improve: stationary
      t = 1.0;
      prev = e;
      step = 1.0;
      continue;
    }
    const double rel = (cur.value - next.value) / std::max(cur.value, 1e-300);
    prev = e;
    e = trial;
    cur = std::move(next);
    t = t_next;
    step = std::min(1.0, step * 2.0);
    if (rel < cfg.relative_tolerance && mom == 0.0) break;
  }
  return it;
}

// Shrinks every power's excess over the no-op level by the largest factor
// s in [0, 1] (bisection) that leaves forward() feasible. forward is
// monotone in every power, so s = 0 always qualifies.
inline void restore_feasibility(const SuperpositionProblem& prob, std::vector<double>& e,
                                double tol) {
  if (is_feasible(prob, forward(prob, e), tol)) return;
  const double lb = noop_power(prob);
  auto shrink = [&](double f) {
    std::vector<double> t(e);
    for (double& v : t) v = lb + f * (v - lb);
    return t;
  };
  double lo = 0.0, hi = 1.0;
  for (int k = 0; k < 60; ++k) {
    const double mid = 0.5 * (lo + hi);
    if (is_feasible(prob, forward(prob, shrink(mid)), tol)) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  e = shrink(lo);
}

inline SolveResult solve_from(const SuperpositionProblem& prob, std::vector<double> e,
                              const SolverConfig& cfg) {
  SolveResult r;
  const double lb = noop_power(prob);
  for (double& v : e) v = std::max(v, lb);
  double mu = cfg.penalty_initial;
  for (std::size_t round = 0; round < cfg.penalty_rounds; ++round) {
    r.iterations += projected_descent(prob, e, mu, cfg, false);
    mu *= cfg.penalty_growth;
  }
  restore_feasibility(prob, e, cfg.feasibility_tolerance);
  r.iterations += projected_descent(prob, e, 0.0, cfg, true);
  for (double& v : e) {
    if (v <= lb) v = 0.0;
  }
  r.powers = std::move(e);
  r.achieved_depths = forward(prob, r.powers);
  double acc = 0.0;
  for (std::size_t j = 0; j < prob.size(); ++j) acc += sq(r.achieved_depths[j] - prob.target_depths[j]);
  r.residual_mse = prob.size() ? acc / static_cast<double>(prob.size()) : 0.0;
  r.feasible = is_feasible(prob, r.achieved_depths, cfg.feasibility_tolerance);
  return r;
}

}  // namespace detail

/// Start vectors in the order they are tried: optional warm start, zero,
/// per-point predicted power, then `random_starts` uniform starts on
/// [0, max predicted power] with seeds derived from cfg.seed.
inline std::vector<std::vector<double>> solver_starts(const SuperpositionProblem& prob,
                                                      const SolverConfig& cfg) {
  const std::size_t n = prob.size();
  std::vector<std::vector<double>> starts;
  if (!cfg.warm_start.empty()) {
    if (cfg.warm_start.size() != n) throw std::invalid_argument("solve: warm start has wrong length");
    std::vector<double> w = cfg.warm_start;
    for (double& v : w) v = std::max(0.0, v);
    starts.push_back(std::move(w));
  }
  starts.emplace_back(n, 0.0);
  std::vector<double> pred(n);
  double top = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    pred[i] = predicted_power(prob.params, prob.target_depths[i]);
    top = std::max(top, pred[i]);
  }
  starts.push_back(pred);
  for (std::size_t k = 0; k < cfg.random_starts; ++k) {
    Rng rng(derive_seed(cfg.seed, k));
    std::vector<double> s(n);
    for (double& v : s) v = rng.uniform01() * top;
    starts.push_back(std::move(s));
  }
  return starts;
}

/// Multi-start local solve of min ||forward(E) - p_d|| s.t. forward(E) <= p_c,
/// E >= 0. Picks the feasible start with the lowest residual; a later start
/// must beat the incumbent by a relative 1e-9 to replace it.
inline SolveResult solve(const SuperpositionProblem& prob, const SolverConfig& cfg = {}) {
  const auto starts = solver_starts(prob, cfg);
  std::vector<SolveResult> results(starts.size());
  detail::parallel_for(starts.size(), cfg.threads,
                       [&](std::size_t k) {
                         results[k] = detail::solve_from(prob, starts[k], cfg);
                         results[k].start_index = k;
                       });
  std::size_t total_iterations = 0;
  std::optional<std::size_t> best;
  for (std::size_t k = 0; k < results.size(); ++k) {
    total_iterations += results[k].iterations;
    if (!results[k].feasible) continue;
    if (!best || results[k].residual_mse < results[*best].residual_mse * (1.0 - 1e-9) - 1e-300) {
      best = k;
    }
  }
  SolveResult out = best ? results[*best] : results.front();
  out.iterations = total_iterations;
  return out;
}

/// Effective cuts of a solution as vertical actions, largest power first
/// (ties by position index). Cuts at or below threshold are dropped.
inline std::vector<LaserAction<2>> to_actions(const SuperpositionProblem& prob,
                                              std::span<const double> powers) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < powers.size(); ++i) {
    if (powers[i] * prob.params.dt > prob.params.phi) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return powers[a] > powers[b]; });
  std::vector<LaserAction<2>> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(vertical_cut<2>({prob.xs[i]}, powers[i]));
  return out;
}

}  // namespace ablate
