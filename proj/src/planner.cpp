#include "hjplan/planner.hpp"

#include <algorithm>
#include <cmath>

namespace hjplan {
namespace {

Problem problem_from(const Scenario& scenario, const std::vector<Vec>& starts, double horizon) {
  Problem problem;
  problem.scene = scenario.scene;
  problem.models = scenario.models;
  problem.starts = starts;
  problem.horizon = horizon;
  return problem;
}

double goal_error(const Scene& scene, int agent, const Vec& state) {
  return (scene.spatial(agent, state) - scene.spatial(agent, scene.goal[static_cast<std::size_t>(agent)]))
      .norm();
}

}  // namespace

double horizon_estimate(std::span<const ModelPtr> models, std::span<const Vec> starts,
                        std::span<const Vec> goals, double kappa, double dt) {
  if (!(kappa > 0.0)) throw InvalidInput("horizon slack kappa must be positive");
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  double longest = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    longest = std::max(longest, models[i]->travel_time_bound(starts[i], goals[i]));
  }
  // Snap to the grid from above; the 1e-9 keeps exact multiples exact.
  const double steps = std::ceil(kappa * longest / dt - 1e-9);
  return std::max(steps, 2.0) * dt;
}

bool ValidationReport::goals_reached() const {
  return std::all_of(goal_errors.begin(), goal_errors.end(),
                     [&](double e) { return e < goal_tolerance; });
}

ValidationReport validate_trajectories(const std::vector<Eigen::MatrixXd>& states, double dt,
                                       const Scene& scene, std::span<const ModelPtr> models,
                                       bool include_hidden, const ValidationOptions& options) {
  ValidationReport report;
  report.goal_tolerance = options.goal_tolerance;
  const int n = static_cast<int>(states.size());
  if (n == 0) return report;
  if (n != scene.agent_count() || static_cast<int>(models.size()) != n) {
    throw InvalidInput("validate: agent count mismatch");
  }
  const int steps = static_cast<int>(states.front().cols()) - 1;
  const int sub = std::max(1, options.substeps);

  std::vector<Vec> q(static_cast<std::size_t>(n));
  auto check_at = [&](int k, int s) {
    const double frac = static_cast<double>(s) / sub;
    for (int i = 0; i < n; ++i) {
      const auto& m = states[static_cast<std::size_t>(i)];
      const Vec a = scene.spatial(i, m.col(k));
      q[static_cast<std::size_t>(i)] = (s == 0 || k == steps) ? a : Vec(a + frac * (scene.spatial(i, m.col(k + 1)) - a));
    }
    const double time = (k + frac) * dt;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        report.min_pair_distance = std::min(report.min_pair_distance,
                                            (q[static_cast<std::size_t>(a)] - q[static_cast<std::size_t>(b)]).norm());
      }
      for (const auto& o : scene.obstacles) {
        if (o.hidden && !include_hidden) continue;
        report.min_obstacle_clearance =
            std::min(report.min_obstacle_clearance, o.signed_distance(q[static_cast<std::size_t>(a)]));
      }
    }
    const auto hits = hard_collision_report(scene, q, time, include_hidden);
    for (const auto& [a, b] : hits.pair_violations) report.collisions.push_back({time, a, b, -1});
    for (const auto& [a, o] : hits.obstacle_violations) report.collisions.push_back({time, a, -1, o});
  };

  for (int k = 0; k < steps; ++k) {
    for (int s = 0; s < sub; ++s) check_at(k, s);
  }
  check_at(steps, 0);
  report.collision_free = report.collisions.empty();

  for (int i = 0; i < n; ++i) {
    const auto& m = states[static_cast<std::size_t>(i)];
    for (int k = 0; k < steps; ++k) {
      // The goal indicator switches dynamics off near the goal, so motion
      // inside the arrival ball is not held to the dynamics.
      if (goal_error(scene, i, m.col(k)) < options.goal_tolerance &&
          goal_error(scene, i, m.col(k + 1)) < options.goal_tolerance) {
        continue;
      }
      if (!models[static_cast<std::size_t>(i)]->admissible_step(m.col(k), m.col(k + 1), dt,
                                                               options.feasibility_tol)) {
        report.feasibility_violations.push_back({i, k});
      }
    }
    report.goal_errors.push_back(goal_error(scene, i, m.col(steps)));
  }
  return report;
}

ValidationReport validate(const Plan& plan, const Scene& scene, std::span<const ModelPtr> models,
                          bool include_hidden, const ValidationOptions& options) {
  return validate_trajectories(plan.states, plan.dt, scene, models, include_hidden, options);
}

PlanOutcome plan_once(const Scenario& scenario, const std::vector<Eigen::MatrixXd>& initial_guess) {
  const bool auto_horizon = !scenario.horizon.has_value();
  double horizon = auto_horizon
                       ? horizon_estimate(scenario.models, scenario.starts, scenario.scene.goal,
                                          scenario.kappa, scenario.solver.dt)
                       : *scenario.horizon;
  ValidationOptions options;
  options.goal_tolerance = scenario.goal_tolerance;

  PlanOutcome outcome;
  const int attempts_allowed = auto_horizon ? 1 + scenario.max_retries : 1;
  for (int attempt = 0; attempt < attempts_allowed; ++attempt) {
    Problem problem = problem_from(scenario, scenario.starts, horizon);
    problem.initial_guess = initial_guess;
    auto result = solve(problem, scenario.solver);
    outcome.plan = std::move(result.plan);
    outcome.validation = validate(outcome.plan, scenario.scene, scenario.models, false, options);
    outcome.attempts = attempt + 1;
    outcome.horizons_tried.push_back(outcome.plan.horizon);
    if (outcome.ok()) break;
    horizon *= 2.0;
  }
  return outcome;
}

std::string to_string(RolloutEvent::Kind kind) {
  switch (kind) {
    case RolloutEvent::Kind::kDiscovery: return "discovery";
    case RolloutEvent::Kind::kReplan: return "replan";
    case RolloutEvent::Kind::kArrival: return "arrival";
  }
  return "unknown";
}

RolloutResult rollout_with_discovery(const Scenario& scenario, double sense_radius,
                                     const PlanCallback& on_plan) {
  if (!(sense_radius > 0.0)) throw InvalidInput("sense radius must be positive");
  scenario.scene.validate();
  const int n = static_cast<int>(scenario.models.size());
  const double dt = scenario.solver.dt;

  RolloutResult out;
  Scenario current = scenario;
  std::vector<Vec> positions(static_cast<std::size_t>(n));
  std::vector<Vec> now = scenario.starts;

  out.executed.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.executed[static_cast<std::size_t>(i)] = now[static_cast<std::size_t>(i)];
  out.executed_plan.push_back(-1);

  auto sense = [&](int step) {
    bool found = false;
    for (int i = 0; i < n; ++i) positions[static_cast<std::size_t>(i)] = current.scene.spatial(i, now[static_cast<std::size_t>(i)]);
    for (std::size_t o = 0; o < current.scene.obstacles.size(); ++o) {
      auto& obs = current.scene.obstacles[o];
      if (!obs.hidden) continue;
      for (const auto& q : positions) {
        if (obs.signed_distance(q) <= sense_radius) {
          obs.hidden = false;
          out.events.push_back({RolloutEvent::Kind::kDiscovery, step * dt, step, static_cast<int>(o), -1});
          found = true;
          break;
        }
      }
    }
    return found;
  };
  auto arrived = [&] {
    for (int i = 0; i < n; ++i) {
      if (goal_error(current.scene, i, now[static_cast<std::size_t>(i)]) >= scenario.goal_tolerance) return false;
    }
    return true;
  };
  auto replan = [&](int step, int from) {
    current.starts = now;
    std::vector<Eigen::MatrixXd> guess;
    if (step > 0) {
      // Remaining horizon is re-estimated from the current configuration.
      current.horizon.reset();
      const Plan& previous = out.plans.back().plan;
      if (from < previous.steps()) {
        for (const auto& m : previous.states) guess.push_back(m.rightCols(m.cols() - from));
      }
    }
    out.plans.push_back(plan_once(current, guess));
    if (on_plan) on_plan(out.plans.back(), step);
    return out.plans.back().ok();
  };

  sense(0);
  if (!replan(0, 0)) {
    out.aborted = true;
    out.abort_reason = "initial plan failed";
    out.final_scene = current.scene;
    return out;
  }

  int plan_index = 0;
  int local = 0;
  for (int step = 1; step <= scenario.step_budget; ++step) {
    const Plan& plan = out.plans.back().plan;
    if (local < plan.steps()) ++local;
    for (int i = 0; i < n; ++i) {
      auto& trace = out.executed[static_cast<std::size_t>(i)];
      now[static_cast<std::size_t>(i)] = plan.state(i, local);
      trace.conservativeResize(Eigen::NoChange, trace.cols() + 1);
      trace.col(trace.cols() - 1) = now[static_cast<std::size_t>(i)];
    }
    out.executed_plan.push_back(plan_index);

    if (arrived()) {
      out.arrived = true;
      out.events.push_back({RolloutEvent::Kind::kArrival, step * dt, step, -1, -1});
      break;
    }
    if (sense(step)) {
      if (!replan(step, local)) {
        out.aborted = true;
        out.abort_reason = "replanning failed at step " + std::to_string(step);
        break;
      }
      plan_index = static_cast<int>(out.plans.size()) - 1;
      local = 0;
      out.events.push_back({RolloutEvent::Kind::kReplan, step * dt, step, -1, plan_index});
    }
  }
  if (!out.arrived && !out.aborted) {
    out.aborted = true;
    out.abort_reason = "step budget exhausted";
  }
  out.final_scene = current.scene;
  return out;
}

}  // namespace hjplan
