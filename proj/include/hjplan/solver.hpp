#pragma once

#include "hjplan/dynamics.hpp"
#include "hjplan/scene.hpp"

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace hjplan {

enum class ExecutionMode { kSequential, kParallel };

/// How the holistic Hamiltonian couples agents. kFrozen sets every
/// indicator factor to one (running cost -1 kept); it exists for testing
/// the reduction to the classical space-independent case.
enum class IndicatorMode { kSmooth, kFrozen };

/// Where the single gradient step that approximates the state proximal
/// update starts. kProxCenter steps from xi, where the quadratic term has
/// zero gradient. kCurrent steps from x_{i,j} on the full objective
/// -dt H + |x - xi|^2 / (2 tau); it tightens free-space values slightly
/// but oscillates badly in congested multi-agent crossings.
enum class DescentAnchor { kProxCenter, kCurrent };

struct SolverParams {
  double sigma = 1.0;
  double tau = 0.25;
  double dt = 0.1;
  int max_iters = 20000;
  double conv_tol = 1e-5;
  int conv_window = 10;

  // A1 starts at a1_start and grows by a1_increment every a1_every
  // iterations, capped at a1_cap.
  double a1_start = 10.0;
  double a1_increment = 50.0;
  int a1_every = 1000;
  double a1_cap = 1000.0;

  // Single gradient step rate for the state update, halved every
  // rate_halve_every iterations.
  double rate_start = 0.1;
  int rate_halve_every = 1000;

  std::uint64_t seed = 0;
  double init_noise = 0.1;

  ExecutionMode mode = ExecutionMode::kSequential;
  int threads = 0;  // 0: hardware concurrency (parallel mode only)
  DescentAnchor descent_anchor = DescentAnchor::kProxCenter;
  IndicatorMode indicators = IndicatorMode::kSmooth;
  int history_every = 100;

  void validate() const;
};

double a1_at(const SolverParams& params, int iter);
double descent_rate_at(const SolverParams& params, int iter);

/// Number of time steps for a horizon: round(t / dt).
int steps_for(double horizon, double dt);

struct Problem {
  /// Obstacles, sharpness constants, goal configuration.
  Scene scene;
  std::vector<ModelPtr> models;
  std::vector<Vec> starts;
  /// Total (reversed) time t at which the value is resolved.
  double horizon = 1.0;
  /// Optional forward-time path per agent (columns are states, at least
  /// two) used instead of straight lines. It is resampled uniformly onto
  /// the time grid; endpoints are still pinned to start and goal.
  std::vector<Eigen::MatrixXd> initial_guess;

  int agent_count() const { return static_cast<int>(models.size()); }
  void validate() const;
};

/// Discrete saddle-point variables. Column j of x[i] is x_{i,j}; column 0
/// is pinned to the goal and column J to the query point. p[i].col(0) is 0.
struct SaddleState {
  std::vector<Eigen::MatrixXd> x;
  std::vector<Eigen::MatrixXd> p;
  std::vector<Eigen::MatrixXd> z;

  int steps() const { return x.empty() ? 0 : static_cast<int>(x.front().cols()) - 1; }
  int agents() const { return static_cast<int>(x.size()); }
  std::vector<Vec> slice(const std::vector<Eigen::MatrixXd>& field, int j) const;
};

struct SolveDiagnostics {
  int iterations = 0;
  double residual = 0.0;
  bool converged = false;
  double wall_seconds = 0.0;
  double requested_horizon = 0.0;
  double horizon = 0.0;  // J * dt
  int steps = 0;
  double final_a1 = 0.0;
  /// (iteration, value) samples.
  std::vector<std::pair<int, double>> value_history;
};

/// Converged (or last) iterate in forward time. states[i].col(k) is the state
/// of agent i at time k*dt; controls[i].col(k) is applied on [k dt, (k+1) dt).
struct Plan {
  std::vector<Eigen::MatrixXd> states;
  std::vector<Eigen::MatrixXd> controls;
  double value = 0.0;
  double horizon = 0.0;
  double dt = 0.1;
  SolveDiagnostics diagnostics;

  int steps() const { return states.empty() ? 0 : static_cast<int>(states.front().cols()) - 1; }
  Vec state(int agent, int k) const { return states[static_cast<std::size_t>(agent)].col(k); }
};

struct SolveResult {
  Plan plan;
  SaddleState state;
};

/// H = chi_f (C sum_i O_i H_i - 1) at one time slice.
double holistic_hamiltonian(const Scene& scene, std::span<const ModelPtr> models,
                            std::span<const Vec> x, std::span<const Vec> p, double t,
                            IndicatorMode mode = IndicatorMode::kSmooth);

/// Gradient of the holistic Hamiltonian with respect to one agent's state,
/// other agents held fixed.
Vec holistic_hamiltonian_gradient(const Scene& scene, std::span<const ModelPtr> models,
                                  std::span<const Vec> x, std::span<const Vec> p, double t,
                                  int agent, IndicatorMode mode = IndicatorMode::kSmooth);

/// Straight-line interpolation from goal to query point plus seeded Gaussian
/// noise on interior states, or the resampled initial guess when one is
/// given (no noise); costates uniform in (-0.01, 0.01); z = x.
SaddleState initialize(const Problem& problem, const SolverParams& params);

/// Proximal ascent in every costate p_{i,j}, j = 1..J. Reads only the
/// pre-sweep p and z. `scene.a1` is taken as the current A1.
void costate_sweep(SaddleState& state, const Scene& scene, std::span<const ModelPtr> models,
                   const SolverParams& params, int iter);

/// One gradient step on -dt H(x~) + |x~ - xi|^2 / (2 tau), with
/// xi = x - tau (p_j - p_{j+1}), for every interior x_{i,j}; then
/// z = 2 x_new - x_old. Returns max |x_new - x_old|.
double state_descent(SaddleState& state, const Scene& scene, std::span<const ModelPtr> models,
                     const SolverParams& params, int iter);

/// Discrete saddle objective sum <p_j, x_j - x_{j-1}> - dt sum H_j.
double value_of(const SaddleState& state, const Scene& scene, std::span<const ModelPtr> models,
                const SolverParams& params);

/// Copy of the scene with A1 set from the schedule at `iter`.
Scene scheduled_scene(const Scene& scene, const SolverParams& params, int iter);

/// Forward-time plan from a saddle state.
Plan extract_plan(const SaddleState& state, const Problem& problem, const SolverParams& params);

SolveResult solve(const Problem& problem, const SolverParams& params);

}  // namespace hjplan
