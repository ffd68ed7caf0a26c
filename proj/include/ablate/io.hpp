#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "ablate/cost.hpp"
#include "ablate/errors.hpp"
#include "ablate/feedback.hpp"
#include "ablate/geometry.hpp"
#include "ablate/graph_planner.hpp"
#include "ablate/scenario.hpp"
#include "ablate/superposition.hpp"

namespace ablate {

using json = nlohmann::ordered_json;

inline constexpr int kSchemaVersion = 1;

// ---------------------------------------------------------------------------
// Field access with path-qualified parse errors

namespace io_detail {

inline const json& field(const json& j, const char* key, const std::string& path) {
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw ParseError(path + "." + key + ": missing field");
  return *it;
}

template <typename T>
T get(const json& j, const char* key, const std::string& path) {
  const json& v = field(j, key, path);
  try {
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ParseError(path + "." + key + ": " + e.what());
  }
}

template <typename T>
T get_or(const json& j, const char* key, const std::string& path, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  return get<T>(j, key, path);
}

template <std::size_t N>
std::array<double, N> get_array(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != N) {
    throw ParseError(path + ": expected an array of " + std::to_string(N) + " numbers");
  }
  std::array<double, N> out{};
  for (std::size_t k = 0; k < N; ++k) {
    if (!v[k].is_number()) throw ParseError(path + "[" + std::to_string(k) + "]: expected a number");
    out[k] = v[k].get<double>();
  }
  return out;
}

}  // namespace io_detail

/// FNV-1a over the compact dump; used to tag reports and plans for audit.
inline std::string config_hash(const json& j) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : j.dump()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// ---------------------------------------------------------------------------
// Parameters and configs

inline json to_json(const TissueParams& p) {
  return json{{"beta", p.beta}, {"phi", p.phi}, {"w", p.w}, {"dt", p.dt}};
}

inline TissueParams params_from_json(const json& j, const std::string& path) {
  using io_detail::get;
  TissueParams p{get<double>(j, "beta", path), get<double>(j, "phi", path), get<double>(j, "w", path),
                 get<double>(j, "dt", path)};
  if (!p.valid()) throw ValidationError(path + ": tissue parameters out of range");
  return p;
}

inline json to_json(const SamplerConfig& c) {
  return json{{"a", c.a},
              {"eps_n", c.eps_n},
              {"eps_l", c.eps_l},
              {"b", c.b},
              {"lambda", c.lambda},
              {"power_set", c.power_set},
              {"angle_set", c.angle_set},
              {"power_levels", c.power_levels},
              {"angle_levels", c.angle_levels},
              {"max_angle", c.max_angle},
              {"k_f", c.k_f},
              {"eps_c", c.eps_c},
              {"max_runs", c.max_runs},
              {"attempt_factor", c.attempt_factor},
              {"seed", c.seed},
              {"batch", c.batch},
              {"violation_tolerance", c.violation_tolerance}};
}

inline SamplerConfig sampler_from_json(const json& j, const std::string& path) {
  using io_detail::get_or;
  SamplerConfig d;
  SamplerConfig c;
  c.a = get_or(j, "a", path, d.a);
  c.eps_n = get_or(j, "eps_n", path, d.eps_n);
  c.eps_l = get_or(j, "eps_l", path, d.eps_l);
  c.b = get_or(j, "b", path, d.b);
  c.lambda = get_or(j, "lambda", path, d.lambda);
  c.power_set = get_or(j, "power_set", path, d.power_set);
  c.angle_set = get_or(j, "angle_set", path, d.angle_set);
  c.power_levels = get_or(j, "power_levels", path, d.power_levels);
  c.angle_levels = get_or(j, "angle_levels", path, d.angle_levels);
  c.max_angle = get_or(j, "max_angle", path, d.max_angle);
  c.k_f = get_or(j, "k_f", path, d.k_f);
  c.eps_c = get_or(j, "eps_c", path, d.eps_c);
  c.max_runs = get_or(j, "max_runs", path, d.max_runs);
  c.attempt_factor = get_or(j, "attempt_factor", path, d.attempt_factor);
  c.seed = get_or(j, "seed", path, d.seed);
  c.batch = get_or(j, "batch", path, d.batch);
  c.violation_tolerance = get_or(j, "violation_tolerance", path, d.violation_tolerance);
  if (!c.valid()) throw ValidationError(path + ": sampler settings out of range");
  return c;
}

inline json to_json(const SolverConfig& c) {
  return json{{"random_starts", c.random_starts},
              {"max_iterations", c.max_iterations},
              {"relative_tolerance", c.relative_tolerance},
              {"penalty_initial", c.penalty_initial},
              {"penalty_growth", c.penalty_growth},
              {"penalty_rounds", c.penalty_rounds},
              {"feasibility_tolerance", c.feasibility_tolerance},
              {"seed", c.seed}};
}

inline SolverConfig solver_from_json(const json& j, const std::string& path) {
  using io_detail::get_or;
  SolverConfig d;
  SolverConfig c;
  c.random_starts = get_or(j, "random_starts", path, d.random_starts);
  c.max_iterations = get_or(j, "max_iterations", path, d.max_iterations);
  c.relative_tolerance = get_or(j, "relative_tolerance", path, d.relative_tolerance);
  c.penalty_initial = get_or(j, "penalty_initial", path, d.penalty_initial);
  c.penalty_growth = get_or(j, "penalty_growth", path, d.penalty_growth);
  c.penalty_rounds = get_or(j, "penalty_rounds", path, d.penalty_rounds);
  c.feasibility_tolerance = get_or(j, "feasibility_tolerance", path, d.feasibility_tolerance);
  c.seed = get_or(j, "seed", path, d.seed);
  return c;
}

// ---------------------------------------------------------------------------
// Geometry

template <int D>
json to_json(const TissueSurface<D>& s) {
  json pts = json::array();
  for (const auto& p : s.points()) pts.push_back(p);
  return json{{"shape", s.shape()}, {"points", std::move(pts)}};
}

template <int D>
TissueSurface<D> surface_from_json(const json& j, const std::string& path) {
  const json& pts = io_detail::field(j, "points", path);
  if (!pts.is_array()) throw ParseError(path + ".points: expected an array");
  std::vector<Point<D>> points;
  points.reserve(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    points.push_back(io_detail::get_array<D>(pts[i], path + ".points[" + std::to_string(i) + "]"));
  }
  const auto shape = io_detail::get_array<D - 1>(io_detail::field(j, "shape", path), path + ".shape");
  typename TissueSurface<D>::Shape sh{};
  for (int k = 0; k < D - 1; ++k) sh[k] = static_cast<std::size_t>(shape[k]);
  try {
    return TissueSurface<D>(std::move(points), sh);
  } catch (const std::invalid_argument& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

template <int D>
json to_json(const BoundaryField<D>& f) {
  json knots = json::array();
  for (const auto& axis : f.knots()) knots.push_back(axis);
  return json{{"knots", std::move(knots)}, {"heights", f.heights()}};
}

template <int D>
BoundaryField<D> field_from_json(const json& j, const std::string& path) {
  const json& kj = io_detail::field(j, "knots", path);
  if (!kj.is_array() || kj.size() != static_cast<std::size_t>(D - 1)) {
    throw ParseError(path + ".knots: expected " + std::to_string(D - 1) + " knot arrays");
  }
  typename BoundaryField<D>::Knots knots;
  try {
    for (int k = 0; k < D - 1; ++k) knots[k] = kj[k].get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw ParseError(path + ".knots: " + e.what());
  }
  auto heights = io_detail::get<std::vector<double>>(j, "heights", path);
  try {
    return BoundaryField<D>(std::move(knots), std::move(heights));
  } catch (const std::invalid_argument& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

template <int D>
json to_json(const LaserAction<D>& a) {
  return json{{"position", a.position}, {"angles", a.angles}, {"power", a.power}};
}

template <int D>
LaserAction<D> action_from_json(const json& j, const std::string& path) {
  LaserAction<D> a;
  a.position = io_detail::get_array<D - 1>(io_detail::field(j, "position", path), path + ".position");
  a.angles = io_detail::get_array<D - 1>(io_detail::field(j, "angles", path), path + ".angles");
  a.power = io_detail::get<double>(j, "power", path);
  if (!a.valid()) throw ValidationError(path + ": invalid laser action");
  return a;
}

// ---------------------------------------------------------------------------
// Scenario

using AnyScenario = std::variant<Scenario<2>, Scenario<3>>;

template <int D>
json to_json(const Scenario<D>& s) {
  json gen = json::object();
  for (const auto& [k, v] : s.generator) gen[k] = v;
  return json{{"schema", kSchemaVersion},
              {"kind", "scenario"},
              {"name", s.name},
              {"dimension", D},
              {"seed", s.seed},
              {"params", to_json(s.params)},
              {"perturbation", {{"fraction", s.perturbation}, {"beta_compounding", s.beta_compounding}}},
              {"max_feedback_cuts", s.max_feedback_cuts},
              {"sampler", to_json(s.sampler)},
              {"solver", to_json(s.solver)},
              {"generator", std::move(gen)},
              {"surface", to_json(s.initial)},
              {"objective", to_json(s.objective)},
              {"constraint", to_json(s.constraint)}};
}

inline void check_header(const json& j, const char* kind) {
  const int schema = io_detail::get<int>(j, "schema", "$");
  if (schema != kSchemaVersion) {
    throw ParseError("$.schema: unsupported version " + std::to_string(schema));
  }
  if (io_detail::get<std::string>(j, "kind", "$") != kind) {
    throw ParseError(std::string("$.kind: expected \"") + kind + "\"");
  }
}

template <int D>
Scenario<D> scenario_body_from_json(const json& j) {
  using io_detail::get;
  using io_detail::get_or;
  Scenario<D> s;
  s.name = get<std::string>(j, "name", "$");
  s.seed = get_or<std::uint64_t>(j, "seed", "$", 1);
  s.params = params_from_json(io_detail::field(j, "params", "$"), "$.params");
  if (j.contains("perturbation")) {
    const json& pj = j["perturbation"];
    s.perturbation = get<double>(pj, "fraction", "$.perturbation");
    s.beta_compounding = get_or<int>(pj, "beta_compounding", "$.perturbation", 1);
  }
  s.max_feedback_cuts = get_or<std::size_t>(j, "max_feedback_cuts", "$", 200);
  if (j.contains("sampler")) s.sampler = sampler_from_json(j["sampler"], "$.sampler");
  if (j.contains("solver")) s.solver = solver_from_json(j["solver"], "$.solver");
  if (j.contains("generator")) {
    for (const auto& [k, v] : j["generator"].items()) {
      if (!v.is_number()) throw ParseError("$.generator." + k + ": expected a number");
      s.generator[k] = v.template get<double>();
    }
  }
  s.initial = surface_from_json<D>(io_detail::field(j, "surface", "$"), "$.surface");
  s.objective = field_from_json<D>(io_detail::field(j, "objective", "$"), "$.objective");
  s.constraint = field_from_json<D>(io_detail::field(j, "constraint", "$"), "$.constraint");
  validate(s);
  return s;
}

inline AnyScenario scenario_from_json(const json& j) {
  check_header(j, "scenario");
  const int dim = io_detail::get<int>(j, "dimension", "$");
  if (dim == 2) return scenario_body_from_json<2>(j);
  if (dim == 3) return scenario_body_from_json<3>(j);
  throw ParseError("$.dimension: must be 2 or 3");
}

// ---------------------------------------------------------------------------
// Plan file

template <int D>
struct PlanStep {
  LaserAction<D> action;
  double dt = 1.0;
  double predicted_cost = 0.0;
};

template <int D>
struct PlanFile {
  std::string scenario;
  std::string scenario_hash;
  std::string algorithm;  // "graph" or "nlopt"
  std::uint64_t seed = 0;
  std::string config_hash;
  std::vector<PlanStep<D>> steps;
  double initial_cost = 0.0;
  double predicted_final_cost = 0.0;
  double predicted_final_mse = 0.0;
  double lambda = kDefaultLambda;

  std::vector<LaserAction<D>> actions() const {
    std::vector<LaserAction<D>> out;
    out.reserve(steps.size());
    for (const auto& s : steps) out.push_back(s.action);
    return out;
  }

  friend bool operator==(const PlanFile&, const PlanFile&) = default;
};

template <int D>
bool operator==(const PlanStep<D>& a, const PlanStep<D>& b) {
  return a.action == b.action && a.dt == b.dt && a.predicted_cost == b.predicted_cost;
}

/// Builds a plan file by replaying `actions` with the scenario's nominal
/// parameters, recording C* after every step.
template <int D>
PlanFile<D> make_plan_file(const Scenario<D>& s, std::span<const LaserAction<D>> actions,
                           std::string algorithm, std::uint64_t seed, std::string cfg_hash) {
  PlanFile<D> f;
  f.scenario = s.name;
  f.scenario_hash = config_hash(to_json(s));
  f.algorithm = std::move(algorithm);
  f.seed = seed;
  f.config_hash = std::move(cfg_hash);
  f.lambda = s.sampler.lambda;
  f.initial_cost = modified_cost(s.initial, s.objective, f.lambda).modified_cost;
  TissueSurface<D> state = s.initial;
  for (const auto& a : actions) {
    state = apply_ablation(state, a, s.params).new_surface;
    f.steps.push_back({a, s.params.dt, modified_cost(state, s.objective, f.lambda).modified_cost});
  }
  f.predicted_final_cost = f.steps.empty() ? f.initial_cost : f.steps.back().predicted_cost;
  f.predicted_final_mse = mse(state, s.objective);
  return f;
}

template <int D>
json to_json(const PlanFile<D>& f) {
  json steps = json::array();
  for (const auto& s : f.steps) {
    json a = to_json(s.action);
    a["dt"] = s.dt;
    a["predicted_cost"] = s.predicted_cost;
    steps.push_back(std::move(a));
  }
  return json{{"schema", kSchemaVersion},
              {"kind", "plan"},
              {"dimension", D},
              {"scenario", f.scenario},
              {"scenario_hash", f.scenario_hash},
              {"planner", {{"algorithm", f.algorithm}, {"seed", f.seed}, {"config_hash", f.config_hash}}},
              {"lambda", f.lambda},
              {"initial_cost", f.initial_cost},
              {"predicted_final_cost", f.predicted_final_cost},
              {"predicted_final_mse", f.predicted_final_mse},
              {"actions", std::move(steps)}};
}

template <int D>
PlanFile<D> plan_from_json(const json& j) {
  using io_detail::get;
  check_header(j, "plan");
  if (get<int>(j, "dimension", "$") != D) throw ValidationError("$.dimension: plan does not match scenario");
  PlanFile<D> f;
  f.scenario = get<std::string>(j, "scenario", "$");
  f.scenario_hash = get<std::string>(j, "scenario_hash", "$");
  const json& pj = io_detail::field(j, "planner", "$");
  f.algorithm = get<std::string>(pj, "algorithm", "$.planner");
  f.seed = get<std::uint64_t>(pj, "seed", "$.planner");
  f.config_hash = get<std::string>(pj, "config_hash", "$.planner");
  f.lambda = get<double>(j, "lambda", "$");
  f.initial_cost = get<double>(j, "initial_cost", "$");
  f.predicted_final_cost = get<double>(j, "predicted_final_cost", "$");
  f.predicted_final_mse = get<double>(j, "predicted_final_mse", "$");
  const json& aj = io_detail::field(j, "actions", "$");
  if (!aj.is_array()) throw ParseError("$.actions: expected an array");
  for (std::size_t i = 0; i < aj.size(); ++i) {
    const std::string path = "$.actions[" + std::to_string(i) + "]";
    PlanStep<D> s;
    s.action = action_from_json<D>(aj[i], path);
    s.dt = get<double>(aj[i], "dt", path);
    s.predicted_cost = get<double>(aj[i], "predicted_cost", path);
    f.steps.push_back(s);
  }
  return f;
}

// ---------------------------------------------------------------------------
// Reports

template <int D>
json report_to_json(const ExecutionReport<D>& r, const Scenario<D>& s, const PlantSpec& plant,
                    const std::string& plan_hash) {
  json gen = json::object();
  for (const auto& [k, v] : s.generator) gen[k] = v;
  return json{{"schema", kSchemaVersion},
              {"kind", "report"},
              {"mode", to_string(r.mode)},
              {"scenario", s.name},
              {"scenario_hash", config_hash(to_json(s))},
              {"plan_hash", plan_hash},
              {"perturbation", plant.perturbation},
              {"beta_compounding", plant.beta_compounding},
              {"nominal_params", to_json(plant.nominal_params)},
              {"true_params", to_json(plant.true_params)},
              {"generator", std::move(gen)},
              {"mse", r.metrics.mse},
              {"violation_count", r.metrics.violation_count},
              {"violation_fraction", r.metrics.violation_fraction},
              {"original_tumor_volume", r.metrics.original_tumor_volume},
              {"removed_healthy_volume", r.metrics.removed_healthy_volume},
              {"remaining_tumor_volume", r.metrics.remaining_tumor_volume},
              {"cuts_executed", r.cuts_executed},
              {"wall_time", r.wall_time}};
}

template <int D>
json metrics_to_json(const MetricsReport& m, const Scenario<D>& s) {
  json gen = json::object();
  for (const auto& [k, v] : s.generator) gen[k] = v;
  return json{{"schema", kSchemaVersion},
              {"kind", "metrics"},
              {"scenario", s.name},
              {"scenario_hash", config_hash(to_json(s))},
              {"generator", std::move(gen)},
              {"mse", m.mse},
              {"violation_count", m.violation_count},
              {"violation_fraction", m.violation_fraction},
              {"original_tumor_volume", m.original_tumor_volume},
              {"removed_healthy_volume", m.removed_healthy_volume},
              {"remaining_tumor_volume", m.remaining_tumor_volume}};
}

// ---------------------------------------------------------------------------
// Files and CSV

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path + ": cannot open");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError(path + ": cannot open for writing");
  out << text;
  if (!out) throw ParseError(path + ": write failed");
}

inline void write_json_file(const std::string& path, const json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

template <int D>
std::string surface_to_csv(const TissueSurface<D>& s) {
  std::string out = D == 2 ? "x,z\n" : "x,y,z\n";
  for (const auto& p : s.points()) {
    for (int k = 0; k < D; ++k) {
      out += format_double(p[k]);
      out += k + 1 < D ? ',' : '\n';
    }
  }
  return out;
}

/// Parses a surface CSV; `shape` comes from the scenario the surface belongs to.
template <int D>
TissueSurface<D> surface_from_csv(std::istream& in, typename TissueSurface<D>::Shape shape,
                                  const std::string& name = "surface.csv") {
  const std::string expect = D == 2 ? "x,z" : "x,y,z";
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError(name + ":1: missing header");
  ++lineno;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != expect) throw ParseError(name + ":1: expected header '" + expect + "'");
  std::vector<Point<D>> pts;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream row(line);
    Point<D> p{};
    for (int k = 0; k < D; ++k) {
      std::string cell;
      if (!std::getline(row, cell, ',')) {
        throw ParseError(name + ":" + std::to_string(lineno) + ": expected " + std::to_string(D) + " fields");
      }
      try {
        std::size_t used = 0;
        p[k] = std::stod(cell, &used);
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw ParseError(name + ":" + std::to_string(lineno) + ": field " + std::to_string(k + 1) +
                         " is not a number");
      }
    }
    std::string extra;
    if (std::getline(row, extra, ',')) {
      throw ParseError(name + ":" + std::to_string(lineno) + ": too many fields");
    }
    pts.push_back(p);
  }
  try {
    return TissueSurface<D>(std::move(pts), shape);
  } catch (const std::invalid_argument&) {
    throw ValidationError(name + ": point count does not match the scenario grid");
  }
}

template <int D>
std::string trace_to_csv(const std::vector<TraceRecord<D>>& trace) {
  std::string out = D == 2 ? "cut,x,theta,power,mse,violations,time\n"
                           : "cut,x,y,theta_x,theta_y,power,mse,violations,time\n";
  for (const auto& r : trace) {
    out += std::to_string(r.cut);
    for (double v : r.action.position) out += "," + format_double(v);
    for (double v : r.action.angles) out += "," + format_double(v);
    out += "," + format_double(r.action.power);
    out += "," + format_double(r.mse);
    out += "," + std::to_string(r.violations);
    out += "," + format_double(r.time_s);
    out += "\n";
  }
  return out;
}

}  // namespace ablate
