#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "ablate/ablation.hpp"
#include "ablate/boundary.hpp"
#include "ablate/cost.hpp"
#include "ablate/graph_planner.hpp"
#include "ablate/superposition.hpp"

namespace ablate {

/// Controller model vs. simulated tissue. The plant's beta and phi are the
/// nominal values scaled by (1 + perturbation); beta is scaled
/// `beta_compounding` times, since it stands for density x enthalpy and both
/// may be perturbed.
struct PlantSpec {
  TissueParams nominal_params;
  TissueParams true_params;
  double perturbation = 0.0;
  int beta_compounding = 1;
};

inline PlantSpec make_plant(const TissueParams& nominal, double perturbation,
                            int beta_compounding = 1) {
  PlantSpec p;
  p.nominal_params = nominal;
  p.perturbation = perturbation;
  p.beta_compounding = beta_compounding;
  p.true_params = nominal;
  p.true_params.beta = nominal.beta * std::pow(1.0 + perturbation, beta_compounding);
  p.true_params.phi = nominal.phi * (1.0 + perturbation);
  return p;
}

enum class ExecutionMode { kFeedforward, kFeedback };

inline const char* to_string(ExecutionMode m) {
  return m == ExecutionMode::kFeedforward ? "feedforward" : "feedback";
}

template <int D>
struct TraceRecord {
  std::size_t cut = 0;  // 1-based
  LaserAction<D> action;
  double pre_mse = 0.0;
  double mse = 0.0;
  std::size_t violations = 0;
  double time_s = 0.0;  // since the start of the execution
};

template <int D>
struct ExecutionReport {
  ExecutionMode mode = ExecutionMode::kFeedforward;
  TissueSurface<D> final_surface;
  MetricsReport metrics;
  std::size_t cuts_executed = 0;
  double wall_time = 0.0;
  std::vector<TraceRecord<D>> trace;
};

namespace detail {

template <int D>
class Execution {
 public:
  Execution(ExecutionMode mode, const TissueSurface<D>& initial, const BoundaryField<D>& objective,
            const BoundaryField<D>& constraint, const TissueParams& plant)
      : initial_(initial), objective_(objective), constraint_(constraint), plant_(plant) {
    report_.mode = mode;
    report_.final_surface = initial;
    current_mse_ = mse(initial, objective);
  }

  const TissueSurface<D>& state() const { return report_.final_surface; }

  void cut(const LaserAction<D>& a) {
    TraceRecord<D> rec;
    rec.cut = report_.cuts_executed + 1;
    rec.action = a;
    rec.pre_mse = current_mse_;
    report_.final_surface = apply_ablation(report_.final_surface, a, plant_).new_surface;
    current_mse_ = mse(report_.final_surface, objective_);
    rec.mse = current_mse_;
    rec.violations = violation(report_.final_surface, constraint_).count;
    rec.time_s = elapsed();
    if (!report_.trace.empty()) rec.time_s = std::max(rec.time_s, report_.trace.back().time_s);
    report_.trace.push_back(rec);
    ++report_.cuts_executed;
  }

  ExecutionReport<D> finish() {
    report_.metrics = evaluate(initial_, report_.final_surface, objective_, constraint_);
    report_.wall_time = elapsed();
    return std::move(report_);
  }

 private:
  double elapsed() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

  const TissueSurface<D>& initial_;
  const BoundaryField<D>& objective_;
  const BoundaryField<D>& constraint_;
  TissueParams plant_;
  ExecutionReport<D> report_;
  double current_mse_ = 0.0;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

}  // namespace detail

/// Applies a precomputed plan open loop on the true tissue. Violations are
/// recorded, not prevented.
template <int D>
ExecutionReport<D> run_feedforward(std::span<const LaserAction<D>> plan_actions,
                                   const PlantSpec& plant, const TissueSurface<D>& initial,
                                   const BoundaryField<D>& objective,
                                   const BoundaryField<D>& constraint) {
  detail::Execution<D> ex(ExecutionMode::kFeedforward, initial, objective, constraint,
                          plant.true_params);
  for (const auto& a : plan_actions) ex.cut(a);
  return ex.finish();
}

/// Re-plans from a sensed state. `iteration` counts executed cuts so far.
template <int D>
using Planner = std::function<std::vector<LaserAction<D>>(const TissueSurface<D>& sensed,
                                                          std::size_t iteration)>;

template <int D>
struct FeedbackOptions {
  std::size_t max_cuts = 200;
  // Observation model; identity (perfect sensing) when empty.
  std::function<TissueSurface<D>(const TissueSurface<D>&)> sense;
};

/// Receding-horizon execution: plan from the sensed state, execute only the
/// first action on the plant, sense, repeat until the planner returns an
/// empty plan or max_cuts is reached.
template <int D>
ExecutionReport<D> run_feedback(const Planner<D>& planner, const PlantSpec& plant,
                                const TissueSurface<D>& initial, const BoundaryField<D>& objective,
                                const BoundaryField<D>& constraint,
                                const FeedbackOptions<D>& opts = {}) {
  detail::Execution<D> ex(ExecutionMode::kFeedback, initial, objective, constraint,
                          plant.true_params);
  TissueSurface<D> sensed = initial;
  for (std::size_t k = 0; k < opts.max_cuts; ++k) {
    const auto actions = planner(sensed, k);
    if (actions.empty()) break;
    ex.cut(actions.front());
    sensed = opts.sense ? opts.sense(ex.state()) : ex.state();
  }
  return ex.finish();
}

/// Graph-search controller: one search (a single tree of k_F nodes) per
/// iteration, seeded from (cfg.seed, iteration). The sensed state may already
/// violate the constraint after an imperfect cut, so existing violations are
/// tolerated as long as later cuts leave those points alone.
template <int D>
Planner<D> graph_planner(BoundaryField<D> objective, BoundaryField<D> constraint,
                         SamplerConfig cfg, TissueParams nominal) {
  cfg.tolerate_root_violations = true;
  return [objective = std::move(objective), constraint = std::move(constraint), cfg,
          nominal](const TissueSurface<D>& sensed, std::size_t iteration) {
    SamplerConfig run = cfg;
    run.seed = derive_seed(cfg.seed, iteration);
    return search(sensed, objective, constraint, run, nominal).actions;
  };
}

/// One-shot superposition plan from a state.
struct OptimizerPlan {
  SuperpositionProblem problem;
  SolveResult result;
  std::vector<LaserAction<2>> actions;
};

inline OptimizerPlan optimizer_plan(const TissueSurface<2>& state, const BoundaryField<2>& objective,
                                    const BoundaryField<2>& constraint, const TissueParams& params,
                                    const SolverConfig& cfg) {
  OptimizerPlan p;
  p.problem = assemble(state, objective, constraint, params);
  p.result = solve(p.problem, cfg);
  p.actions = to_actions(p.problem, p.result.powers);
  return p;
}

/// Superposition controller. When the sensed state matches the state the
/// previous plan predicted, the rest of that plan is still optimal and is
/// returned unchanged. Otherwise the problem is re-solved, warm-started from
/// the previous solution with the executed cut removed.
inline Planner<2> optimizer_planner(BoundaryField<2> objective, BoundaryField<2> constraint,
                                    SolverConfig cfg, TissueParams nominal) {
  struct Memory {
    std::vector<double> powers;
    std::vector<double> xs;
    std::optional<double> executed_x;
    std::vector<LaserAction<2>> remaining;
    std::optional<TissueSurface<2>> predicted;
  };
  auto mem = std::make_shared<Memory>();
  auto remember = [mem, nominal](const TissueSurface<2>& sensed, std::vector<LaserAction<2>> actions) {
    mem->executed_x.reset();
    mem->predicted.reset();
    mem->remaining.clear();
    if (!actions.empty()) {
      mem->executed_x = actions.front().position[0];
      mem->predicted = apply_ablation(sensed, actions.front(), nominal).new_surface;
      mem->remaining.assign(actions.begin() + 1, actions.end());
    }
    return actions;
  };
  return [objective = std::move(objective), constraint = std::move(constraint), cfg, nominal, mem,
          remember](const TissueSurface<2>& sensed, std::size_t) {
    if (mem->predicted && *mem->predicted == sensed) {
      for (std::size_t i = 0; i < mem->xs.size(); ++i) {
        if (mem->xs[i] == *mem->executed_x) mem->powers[i] = 0.0;
      }
      return remember(sensed, mem->remaining);
    }
    SolverConfig run = cfg;
    run.warm_start.clear();
    if (!mem->powers.empty() && mem->powers.size() == sensed.size()) {
      run.warm_start = mem->powers;
      for (std::size_t i = 0; i < mem->xs.size(); ++i) {
        if (mem->executed_x && mem->xs[i] == *mem->executed_x) run.warm_start[i] = 0.0;
      }
    }
    auto p = optimizer_plan(sensed, objective, constraint, nominal, run);
    mem->powers = p.result.powers;
    mem->xs = p.problem.xs;
    return remember(sensed, std::move(p.actions));
  };
}

}  // namespace ablate
