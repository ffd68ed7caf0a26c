#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <thread>
#include <vector>

#include "ablate/ablation.hpp"
#include "ablate/boundary.hpp"
#include "ablate/cost.hpp"
#include "ablate/errors.hpp"
#include "ablate/geometry.hpp"
#include "ablate/sampling.hpp"

namespace ablate {

struct SamplerConfig {
  double a = 2.0;        // node-weight exponent
  double eps_n = 1e-6;   // node-weight floor
  double eps_l = 1e-6;   // position-weight floor
  double b = 1.0;        // power-weight sharpness
  double lambda = kDefaultLambda;

  // Empty sets are filled by resolve_sampler() from the levels below.
  std::vector<double> power_set;
  std::vector<double> angle_set;
  std::size_t power_levels = 32;
  std::size_t angle_levels = 21;
  double max_angle = M_PI / 4;

  std::size_t k_f = 10000;
  double eps_c = -1.0;  // negative: 1e-4 x initial cost
  std::size_t max_runs = 50;
  std::size_t attempt_factor = 50;
  std::uint64_t seed = 1;

  // Candidates proposed per round from one snapshot of the tree. 1 is the
  // sequential reference; results depend on batch but never on threads.
  std::size_t batch = 1;
  std::size_t threads = 1;

  double violation_tolerance = kDefaultViolationTolerance;
  // Accept a root that already violates the constraint (feedback after an
  // overcut). Children may then not move any point that is violating.
  bool tolerate_root_violations = false;

  bool valid() const {
    return eps_n > 0.0 && eps_l > 0.0 && a >= 0.0 && b >= 0.0 && lambda >= 1.0 && k_f >= 1 &&
           batch >= 1 && threads >= 1 &&
           std::all_of(power_set.begin(), power_set.end(), [](double e) { return e >= 0.0; });
  }
};

/// Fills empty power/angle sets. Powers: `power_levels` uniform levels on
/// [0, 2 max_i E_p(i)] at the initial state. Angles: `angle_levels` uniform
/// values on [-max_angle, max_angle] (a single 0 when angle_levels is 1).
template <int D>
SamplerConfig resolve_sampler(SamplerConfig cfg, const TissueSurface<D>& initial,
                              const BoundaryField<D>& objective, const TissueParams& params) {
  if (cfg.power_set.empty()) {
    double top = 0.0;
    for (const auto& p : initial.points()) {
      top = std::max(top, predicted_power(params, objective_gap(objective, p)));
    }
    cfg.power_set = linspace(0.0, 2.0 * top, std::max<std::size_t>(cfg.power_levels, 1));
  }
  if (cfg.angle_set.empty()) {
    cfg.angle_set = cfg.angle_levels <= 1
                        ? std::vector<double>{0.0}
                        : linspace(-cfg.max_angle, cfg.max_angle, cfg.angle_levels);
  }
  return cfg;
}

template <int D>
struct PlanNode {
  std::shared_ptr<const TissueSurface<D>> state;
  double cost = 0.0;
  std::optional<std::size_t> parent;
  std::optional<LaserAction<D>> incoming_action;
  std::size_t depth = 0;
};

/// Append-only search tree. Keeps cumulative node weights in step with the
/// node list; they are rebuilt only when a new node raises the maximum cost.
template <int D>
class PlanTree {
 public:
  PlanTree(TissueSurface<D> root, BoundaryField<D> objective, BoundaryField<D> constraint,
           double lambda, double a, double eps_n)
      : objective_(std::move(objective)),
        constraint_(std::move(constraint)),
        lambda_(lambda),
        a_(a),
        eps_n_(eps_n) {
    PlanNode<D> node;
    node.cost = modified_cost(root, objective_, lambda_).modified_cost;
    node.state = std::make_shared<const TissueSurface<D>>(std::move(root));
    root_violating_.resize(node.state->size(), false);
    append(std::move(node));
  }

  const BoundaryField<D>& objective() const { return objective_; }
  const BoundaryField<D>& constraint() const { return constraint_; }
  double lambda() const { return lambda_; }

  std::size_t size() const { return nodes_.size(); }
  const PlanNode<D>& node(std::size_t i) const { return nodes_[i]; }
  std::span<const PlanNode<D>> nodes() const { return nodes_; }
  std::span<const double> costs() const { return costs_; }
  double max_cost() const { return max_cost_; }

  std::size_t sample_node(Rng& rng) const { return node_sampler_.sample(rng); }

  void mark_root_violations(double tolerance) {
    const auto& root = *nodes_.front().state;
    for (std::size_t i = 0; i < root.size(); ++i) {
      root_violating_[i] = violates(constraint_, root[i], tolerance);
    }
  }
  const std::vector<bool>& root_violating() const { return root_violating_; }

  std::size_t insert(PlanNode<D> node) {
    if (!node.parent || *node.parent >= nodes_.size()) {
      throw std::logic_error("PlanTree: child must reference an existing parent");
    }
    return append(std::move(node));
  }

  std::size_t best_index() const {
    std::size_t best = 0;
    for (std::size_t i = 1; i < costs_.size(); ++i) {
      if (costs_[i] < costs_[best]) best = i;
    }
    return best;
  }

  std::vector<LaserAction<D>> path_to(std::size_t index) const {
    std::vector<LaserAction<D>> actions;
    for (std::size_t i = index; nodes_[i].parent; i = *nodes_[i].parent) {
      actions.push_back(*nodes_[i].incoming_action);
    }
    std::reverse(actions.begin(), actions.end());
    return actions;
  }

 private:
  std::size_t append(PlanNode<D> node) {
    costs_.push_back(node.cost);
    nodes_.push_back(std::move(node));
    if (costs_.size() == 1 || costs_.back() > max_cost_) {
      max_cost_ = costs_.back();
      node_sampler_.assign(node_weights(costs_, a_, eps_n_));
    } else {
      node_sampler_.push_back(std::pow(max_cost_ - costs_.back(), a_) + eps_n_);
    }
    return nodes_.size() - 1;
  }

  BoundaryField<D> objective_;
  BoundaryField<D> constraint_;
  double lambda_;
  double a_;
  double eps_n_;
  std::vector<PlanNode<D>> nodes_;
  std::vector<double> costs_;
  double max_cost_ = 0.0;
  WeightedSampler node_sampler_;
  std::vector<bool> root_violating_;
};

/// One sampled edge candidate: parent node, laser position taken from a
/// point of the parent state, and the indices drawn from the angle and power
/// sets.
template <int D>
struct Proposal {
  std::size_t node = 0;
  std::size_t point = 0;
  std::array<std::size_t, D - 1> angle_index{};
  std::size_t power_index = 0;
  double predicted_power = 0.0;
  LaserAction<D> action;
};

template <int D>
Proposal<D> propose(const PlanTree<D>& tree, const SamplerConfig& cfg, Rng& rng,
                    const TissueParams& params) {
  Proposal<D> p;
  p.node = tree.sample_node(rng);
  const TissueSurface<D>& state = *tree.node(p.node).state;

  const WeightedSampler positions(position_weights(state, tree.objective(), cfg.lambda, cfg.eps_l));
  p.point = positions.sample(rng);
  const Point<D>& target = state[p.point];
  p.action.position = lateral_of<D>(target);

  for (int k = 0; k < D - 1; ++k) {
    p.angle_index[k] = rng.uniform_index(cfg.angle_set.size());
    p.action.angles[k] = cfg.angle_set[p.angle_index[k]];
  }

  p.predicted_power = predicted_power(params, objective_gap(tree.objective(), target));
  const WeightedSampler powers(power_weights_scaled(cfg.power_set, p.predicted_power, cfg.b));
  p.power_index = powers.sample(rng);
  p.action.power = cfg.power_set[p.power_index];
  return p;
}

enum class CandidateStatus { kAccepted, kNoOp, kViolation, kOutOfDomain };

template <int D>
struct Candidate {
  CandidateStatus status = CandidateStatus::kNoOp;
  PlanNode<D> node;
};

/// Simulates a proposal and applies the insertion guards: the cut must move
/// at least one point, every moved point must stay inside both boundary
/// domains, and no point may end below the constraint (points that already
/// violated at the root are tolerated only if left untouched).
template <int D>
Candidate<D> evaluate_proposal(const PlanTree<D>& tree, const Proposal<D>& prop,
                               const SamplerConfig& cfg, const TissueParams& params) {
  Candidate<D> c;
  const PlanNode<D>& parent = tree.node(prop.node);
  auto outcome = apply_ablation(*parent.state, prop.action, params);
  if (!(outcome.max_displacement > 0.0)) return c;

  const auto& pts = outcome.new_surface.points();
  const auto& legacy = tree.root_violating();
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Lateral<D> q = lateral_of<D>(pts[i]);
    if (!tree.objective().contains(q) || !tree.constraint().contains(q)) {
      c.status = CandidateStatus::kOutOfDomain;
      return c;
    }
    if (violates(tree.constraint(), pts[i], cfg.violation_tolerance)) {
      const bool excused = legacy[i] && outcome.per_point_displacement[i] == 0.0;
      if (!excused) {
        c.status = CandidateStatus::kViolation;
        return c;
      }
    }
  }
  c.status = CandidateStatus::kAccepted;
  c.node.cost = modified_cost(outcome.new_surface, tree.objective(), tree.lambda()).modified_cost;
  c.node.state = std::make_shared<const TissueSurface<D>>(std::move(outcome.new_surface));
  c.node.parent = prop.node;
  c.node.incoming_action = prop.action;
  c.node.depth = parent.depth + 1;
  return c;
}

/// Single expansion step: sample, simulate, insert if feasible.
template <int D>
bool expand_once(PlanTree<D>& tree, const SamplerConfig& cfg, Rng& rng,
                 const TissueParams& params) {
  const auto prop = propose(tree, cfg, rng, params);
  auto cand = evaluate_proposal(tree, prop, cfg, params);
  if (cand.status != CandidateStatus::kAccepted) return false;
  tree.insert(std::move(cand.node));
  return true;
}

namespace detail {

template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
  threads = std::min(threads, count);
  if (threads <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < count; i += threads) fn(i);
    });
  }
}

}  // namespace detail

/// Expands `batch` proposals drawn from the same snapshot, evaluates them
/// concurrently and inserts the accepted ones in proposal order. Returns the
/// number inserted.
template <int D>
std::size_t expand_batch(PlanTree<D>& tree, const SamplerConfig& cfg, Rng& rng,
                         const TissueParams& params, std::size_t batch) {
  std::vector<Proposal<D>> props;
  props.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) props.push_back(propose(tree, cfg, rng, params));
  std::vector<Candidate<D>> cands(batch);
  detail::parallel_for(batch, cfg.threads,
                       [&](std::size_t i) { cands[i] = evaluate_proposal(tree, props[i], cfg, params); });
  std::size_t inserted = 0;
  for (auto& c : cands) {
    if (c.status == CandidateStatus::kAccepted) {
      tree.insert(std::move(c.node));
      ++inserted;
    }
  }
  return inserted;
}

template <int D>
struct SearchResult {
  PlanTree<D> tree;
  std::size_t best = 0;
  std::vector<LaserAction<D>> actions;
  std::size_t attempts = 0;

  double best_cost() const { return tree.node(best).cost; }
  double root_cost() const { return tree.node(0).cost; }
  const TissueSurface<D>& best_state() const { return *tree.node(best).state; }
};

/// Grows a tree from `initial` until it holds k_F nodes (or the attempt cap
/// of attempt_factor * k_F proposals is hit) and returns the cheapest node.
/// `cfg` must already be resolved (non-empty power and angle sets).
template <int D>
SearchResult<D> search(const TissueSurface<D>& initial, const BoundaryField<D>& objective,
                       const BoundaryField<D>& constraint, const SamplerConfig& cfg,
                       const TissueParams& params) {
  if (!cfg.valid() || cfg.power_set.empty() || cfg.angle_set.empty()) {
    throw std::invalid_argument("search: sampler config is invalid or unresolved");
  }
  if (initial.empty()) throw std::invalid_argument("search: empty surface");
  const auto v0 = violation(initial, constraint, cfg.violation_tolerance);
  if (v0.count > 0 && !cfg.tolerate_root_violations) {
    throw InfeasibleError("search: initial surface violates the constraint at " +
                          std::to_string(v0.count) + " points");
  }

  SearchResult<D> r{PlanTree<D>(initial, objective, constraint, cfg.lambda, cfg.a, cfg.eps_n), 0, {}, 0};
  r.tree.mark_root_violations(cfg.violation_tolerance);
  Rng rng(cfg.seed);
  const std::size_t cap = cfg.attempt_factor * cfg.k_f;
  while (r.tree.size() < cfg.k_f && r.attempts < cap) {
    if (cfg.batch <= 1) {
      expand_once(r.tree, cfg, rng, params);
      ++r.attempts;
    } else {
      const std::size_t n = std::min(cfg.batch, cap - r.attempts);
      expand_batch(r.tree, cfg, rng, params, n);
      r.attempts += n;
    }
  }
  r.best = r.tree.best_index();
  r.actions = r.tree.path_to(r.best);
  return r;
}

template <int D>
struct PlanResult {
  std::vector<LaserAction<D>> actions;
  std::vector<double> step_costs;  // C* after each action
  std::vector<double> run_costs;   // initial C*, then best C* of each accepted run
  std::size_t runs = 0;
  TissueSurface<D> final_state;
  double initial_cost = 0.0;
  double final_cost = 0.0;
};

/// Outer loop: repeated searches, each re-rooted at the previous best state
/// with a fresh tree and a derived seed. Stops once a run improves the cost
/// by less than eps_c, a run finds nothing better than its root, or
/// max_runs is reached.
template <int D>
PlanResult<D> plan(const TissueSurface<D>& initial, const BoundaryField<D>& objective,
                   const BoundaryField<D>& constraint, const SamplerConfig& cfg,
                   const TissueParams& params) {
  PlanResult<D> out;
  out.final_state = initial;
  out.initial_cost = modified_cost(initial, objective, cfg.lambda).modified_cost;
  out.final_cost = out.initial_cost;
  out.run_costs.push_back(out.initial_cost);
  const double eps_c = cfg.eps_c >= 0.0 ? cfg.eps_c : 1e-4 * out.initial_cost;

  for (std::size_t run = 0; run < cfg.max_runs; ++run) {
    SamplerConfig run_cfg = cfg;
    run_cfg.seed = derive_seed(cfg.seed, run);
    auto r = search(out.final_state, objective, constraint, run_cfg, params);
    ++out.runs;
    if (r.actions.empty() || !(r.best_cost() < out.final_cost)) break;
    const double improvement = out.final_cost - r.best_cost();

    TissueSurface<D> s = out.final_state;
    for (const auto& a : r.actions) {
      s = apply_ablation(s, a, params).new_surface;
      out.step_costs.push_back(modified_cost(s, objective, cfg.lambda).modified_cost);
      out.actions.push_back(a);
    }
    out.final_state = std::move(s);
    out.final_cost = r.best_cost();
    out.run_costs.push_back(out.final_cost);
    if (improvement < eps_c) break;
  }
  return out;
}

}  // namespace ablate
