#pragma once

#include "hjplan/solver.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace hjplan {

/// Planning problem as described by a scenario: the full scene (hidden
/// obstacles included), agents, solver settings and planner policies.
struct Scenario {
  std::string name;
  Scene scene;
  std::vector<ModelPtr> models;
  std::vector<Vec> starts;
  SolverParams solver;
  /// Explicit horizon; empty selects it with horizon_estimate.
  std::optional<double> horizon;
  double kappa = 1.5;
  /// Non-positive means 3 * delta.
  double sense_radius = 0.0;
  double goal_tolerance = 0.05;
  int max_retries = 3;
  int step_budget = 100000;

  double effective_sense_radius() const { return sense_radius > 0.0 ? sense_radius : 3.0 * scene.delta; }
};

/// kappa * max_i (straight-line time bound of agent i), rounded up to a
/// multiple of dt.
double horizon_estimate(std::span<const ModelPtr> models, std::span<const Vec> starts,
                        std::span<const Vec> goals, double kappa, double dt);

struct ValidationOptions {
  int substeps = 4;
  double feasibility_tol = 5e-2;
  double goal_tolerance = 0.05;
};

struct CollisionEvent {
  double time = 0.0;
  int agent = -1;
  int other = -1;     // second agent for pair collisions, else -1
  int obstacle = -1;  // obstacle index for obstacle collisions, else -1
};

struct FeasibilityViolation {
  int agent = -1;
  int step = -1;  // segment [step, step + 1]
};

struct ValidationReport {
  bool collision_free = true;
  double min_pair_distance = kNoObstacleDistance;
  double min_obstacle_clearance = kNoObstacleDistance;
  /// Spatial distance from each agent's final position to its goal.
  std::vector<double> goal_errors;
  std::vector<CollisionEvent> collisions;
  std::vector<FeasibilityViolation> feasibility_violations;
  double goal_tolerance = 0.05;

  bool goals_reached() const;
  bool valid() const { return collision_free && feasibility_violations.empty() && goals_reached(); }
};

/// Checks forward-time trajectories (states[i].col(k) at time k*dt) against
/// exact geometry at `substeps` points per step, plus per-step admissibility.
ValidationReport validate_trajectories(const std::vector<Eigen::MatrixXd>& states, double dt,
                                       const Scene& scene, std::span<const ModelPtr> models,
                                       bool include_hidden, const ValidationOptions& options = {});

ValidationReport validate(const Plan& plan, const Scene& scene, std::span<const ModelPtr> models,
                          bool include_hidden, const ValidationOptions& options = {});

struct PlanOutcome {
  Plan plan;
  ValidationReport validation;
  int attempts = 0;
  std::vector<double> horizons_tried;
  bool ok() const { return plan.diagnostics.converged && validation.valid(); }
};

/// Solves the scenario from its own starts with known obstacles only.
/// With automatic horizon, a non-converged or invalid plan is retried with
/// doubled horizon up to `max_retries` times. A non-empty `initial_guess`
/// (forward-time path per agent) replaces straight-line initialization.
PlanOutcome plan_once(const Scenario& scenario, const std::vector<Eigen::MatrixXd>& initial_guess = {});

struct RolloutEvent {
  enum class Kind { kDiscovery, kReplan, kArrival };
  Kind kind = Kind::kDiscovery;
  double time = 0.0;
  int step = 0;        // executed step index
  int obstacle = -1;   // discovery
  int plan_index = -1; // replan
};

std::string to_string(RolloutEvent::Kind kind);

struct RolloutResult {
  std::vector<PlanOutcome> plans;
  std::vector<RolloutEvent> events;
  /// Executed forward-time trajectory, one matrix per agent.
  std::vector<Eigen::MatrixXd> executed;
  /// Executed step k came from plans[executed_plan[k]] (k >= 1).
  std::vector<int> executed_plan;
  Scene final_scene;
  bool arrived = false;
  bool aborted = false;
  std::string abort_reason;
};

/// Executes plans step by step; hidden obstacles within `sense_radius` of
/// an agent become known and trigger a replan from the current states,
/// warm-started from the unexecuted rest of the current plan.
/// `on_plan` is called after every solve with the plan and the executed
/// step it starts from.
using PlanCallback = std::function<void(const PlanOutcome&, int step)>;
RolloutResult rollout_with_discovery(const Scenario& scenario, double sense_radius,
                                     const PlanCallback& on_plan = {});

}  // namespace hjplan
