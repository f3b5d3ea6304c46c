#pragma once

#include "hjplan/planner.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjplan {

inline constexpr const char* kToolName = "hjplan";
inline constexpr const char* kToolVersion = "1.0.0";

/// Malformed or schema-violating input file. The message carries the line
/// (syntax errors) or the JSON pointer of the offending field.
class ScenarioError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct AgentSpec {
  ModelKind kind = ModelKind::kIsotropic;
  double speed = 1.0;         // V: isotropic, simple_car
  double turn_rate = 2.0;     // W: simple_car
  double gravity = 0.1;       // g: quadcopter
  double cruise_speed = 0.0;  // quadcopter horizon proxy; 0 selects 2 sqrt(D)
  Vec start;
  Vec goal;
  std::vector<bool> goal_mask;  // empty: full state

  bool operator==(const AgentSpec& other) const;
};

/// In-memory form of a scenario file.
struct ScenarioFile {
  std::string name;
  std::vector<AgentSpec> agents;
  std::vector<Obstacle> obstacles;
  double delta = 0.5;
  double a2 = 100.0;
  double a3 = 100.0;
  SolverParams solver;
  std::optional<double> horizon;  // empty: "auto"
  double kappa = 1.5;
  double sense_radius = 0.0;  // 0: 3 * delta
  double goal_tolerance = 0.05;
  int max_retries = 3;
  int step_budget = 100000;

  bool operator==(const ScenarioFile& other) const;
};

bool same_obstacle(const Obstacle& a, const Obstacle& b);
bool same_solver_params(const SolverParams& a, const SolverParams& b);

ScenarioFile parse_scenario(const std::filesystem::path& path);
ScenarioFile parse_scenario_text(const std::string& text, const std::string& origin = "<input>");
nlohmann::ordered_json scenario_to_json(const ScenarioFile& file);
void write_scenario(const ScenarioFile& file, const std::filesystem::path& path);

/// Instantiates dynamics models and the scene.
Scenario build_scenario(const ScenarioFile& file);

/// Writes `<dir>/plan.json` and one `<dir>/agent_<i>.csv` per agent.
void write_plan_outputs(const PlanOutcome& outcome, const ScenarioFile& file,
                        const std::filesystem::path& dir);

/// Writes `<dir>/rollout.json`, the executed trajectory as
/// `<dir>/agent_<i>.csv`, and each plan as `<dir>/plan_<k>_agent_<i>.csv`.
void write_rollout_outputs(const RolloutResult& rollout, const ScenarioFile& file,
                           const std::filesystem::path& dir);

nlohmann::ordered_json plan_to_json(const PlanOutcome& outcome, const Scenario& scenario);
nlohmann::ordered_json rollout_to_json(const RolloutResult& rollout, const Scenario& scenario);

/// CSV with header `t,x1..xn` and fixed 9-digit decimals.
std::string trajectory_csv(const Eigen::MatrixXd& states, double dt);

/// Trajectories stored in an output file: the plan for a solve, the
/// executed trajectory for a rollout.
struct StoredTrajectories {
  std::string kind;  // "plan" or "rollout"
  std::vector<Eigen::MatrixXd> states;
  double dt = 0.1;
  bool converged = false;
};

StoredTrajectories read_output(const std::filesystem::path& path);

nlohmann::ordered_json validation_to_json(const ValidationReport& report);

}  // namespace hjplan
