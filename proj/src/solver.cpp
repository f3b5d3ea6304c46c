#include "hjplan/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <random>
#include <thread>

namespace hjplan {
namespace {

// Runs fn(j) for j in [begin, end). Parallel mode splits the range into
// contiguous blocks; callers only write to per-j storage.
template <typename Fn>
void for_each_step(int begin, int end, const SolverParams& params, Fn&& fn) {
  if (params.mode == ExecutionMode::kSequential || end - begin < 2) {
    for (int j = begin; j < end; ++j) fn(j);
    return;
  }
  int workers = params.threads > 0 ? params.threads
                                   : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::clamp(workers, 1, end - begin);
  if (workers == 1) {
    for (int j = begin; j < end; ++j) fn(j);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const int n = end - begin;
  for (int w = 0; w < workers; ++w) {
    const int lo = begin + n * w / workers;
    const int hi = begin + n * (w + 1) / workers;
    pool.emplace_back([&, lo, hi] {
      try {
        for (int j = lo; j < hi; ++j) fn(j);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::vector<Vec> spatial_positions(const Scene& scene, std::span<const Vec> x) {
  std::vector<Vec> q(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) q[i] = scene.spatial(static_cast<int>(i), x[i]);
  return q;
}

void scatter_add(Vec& target, const std::vector<int>& index, const Vec& spatial_grad) {
  for (std::size_t k = 0; k < index.size(); ++k) {
    target[index[k]] += spatial_grad[static_cast<Eigen::Index>(k)];
  }
}

// Gating factors alpha_i = chi_f * C * O_i at one time slice.
std::vector<double> gating(const Scene& scene, std::span<const Vec> x, double t, IndicatorMode mode) {
  std::vector<double> alpha(x.size(), 1.0);
  if (mode == IndicatorMode::kFrozen) return alpha;
  const auto q = spatial_positions(scene, x);
  const double common = goal_indicator(scene, x) * holistic_collision(scene, q);
  for (std::size_t i = 0; i < x.size(); ++i) {
    alpha[i] = common * obstacle_indicator(scene, q[i], t).value;
  }
  return alpha;
}

}  // namespace

void SolverParams::validate() const {
  if (!(sigma > 0.0 && tau > 0.0)) throw InvalidInput("sigma and tau must be positive");
  if (sigma * tau > 0.25 + 1e-15) {
    throw InvalidInput("step sizes violate sigma * tau <= 0.25 (sigma=" + std::to_string(sigma) +
                       ", tau=" + std::to_string(tau) + ")");
  }
  if (!(dt > 0.0)) throw InvalidInput("dt must be positive");
  if (max_iters < 1) throw InvalidInput("max_iters must be at least 1");
  if (!(conv_tol > 0.0)) throw InvalidInput("conv_tol must be positive");
  if (conv_window < 1) throw InvalidInput("conv_window must be at least 1");
  if (a1_every < 1 || rate_halve_every < 1) throw InvalidInput("schedule periods must be at least 1");
  if (!(a1_start > 0.0) || a1_cap < a1_start) throw InvalidInput("invalid A1 schedule");
  if (!(rate_start >= 0.0)) throw InvalidInput("descent rate must be nonnegative");
  if (!(init_noise >= 0.0)) throw InvalidInput("init_noise must be nonnegative");
  if (threads < 0) throw InvalidInput("threads must be nonnegative");
}

double a1_at(const SolverParams& params, int iter) {
  const int completed = iter / params.a1_every;
  return std::min(params.a1_start + params.a1_increment * completed, params.a1_cap);
}

double descent_rate_at(const SolverParams& params, int iter) {
  return std::ldexp(params.rate_start, -(iter / params.rate_halve_every));
}

int steps_for(double horizon, double dt) { return static_cast<int>(std::lround(horizon / dt)); }

void Problem::validate() const {
  scene.validate();
  const std::size_t n = models.size();
  if (n == 0) throw InvalidInput("problem has no agents");
  if (starts.size() != n || scene.goal.size() != n) {
    throw InvalidInput("agent, start and goal counts differ");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto& m = *models[i];
    const std::string who = "agent " + std::to_string(i);
    if (starts[i].size() != m.state_dim() || scene.goal[i].size() != m.state_dim()) {
      throw InvalidInput(who + ": start/goal dimension must be " + std::to_string(m.state_dim()));
    }
    if (starts[i].hasNaN() || scene.goal[i].hasNaN()) throw InvalidInput(who + ": NaN in start/goal");
    if (scene.spatial_index[i] != m.spatial_indices()) {
      throw InvalidInput(who + ": spatial projection does not match its dynamics model");
    }
  }
  if (!(horizon > 0.0)) throw InvalidInput("horizon must be positive");
  if (!initial_guess.empty()) {
    if (initial_guess.size() != n) throw InvalidInput("initial guess needs one path per agent");
    for (std::size_t i = 0; i < n; ++i) {
      if (initial_guess[i].rows() != models[i]->state_dim() || initial_guess[i].cols() < 2 ||
          initial_guess[i].hasNaN()) {
        throw InvalidInput("agent " + std::to_string(i) + ": malformed initial guess");
      }
    }
  }
}

std::vector<Vec> SaddleState::slice(const std::vector<Eigen::MatrixXd>& field, int j) const {
  std::vector<Vec> out(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) out[i] = field[i].col(j);
  return out;
}

double holistic_hamiltonian(const Scene& scene, std::span<const ModelPtr> models,
                            std::span<const Vec> x, std::span<const Vec> p, double t,
                            IndicatorMode mode) {
  if (mode == IndicatorMode::kFrozen) {
    double sum = 0.0;
    for (std::size_t i = 0; i < models.size(); ++i) sum += models[i]->hamiltonian(x[i], p[i], t);
    return sum - 1.0;
  }
  const auto q = spatial_positions(scene, x);
  const double chi = goal_indicator(scene, x);
  const double c = holistic_collision(scene, q);
  double sum = 0.0;
  for (std::size_t i = 0; i < models.size(); ++i) {
    sum += obstacle_indicator(scene, q[i], t).value * models[i]->hamiltonian(x[i], p[i], t);
  }
  return chi * (c * sum - 1.0);
}

Vec holistic_hamiltonian_gradient(const Scene& scene, std::span<const ModelPtr> models,
                                  std::span<const Vec> x, std::span<const Vec> p, double t,
                                  int agent, IndicatorMode mode) {
  const auto ia = static_cast<std::size_t>(agent);
  const auto& model = *models[ia];
  if (mode == IndicatorMode::kFrozen) return model.hamiltonian_state_gradient(x[ia], p[ia], t);

  const auto q = spatial_positions(scene, x);
  std::vector<Vec> chi_grads, c_grads;
  const double chi = goal_indicator(scene, x, &chi_grads);
  const double c = holistic_collision(scene, q, &c_grads);

  double sum = 0.0;
  double own_h = 0.0;
  ScalarWithGradient own_o;
  for (std::size_t i = 0; i < models.size(); ++i) {
    const double h = models[i]->hamiltonian(x[i], p[i], t);
    auto o = obstacle_indicator(scene, q[i], t);
    sum += o.value * h;
    if (i == ia) {
      own_h = h;
      own_o = std::move(o);
    }
  }

  const auto& index = scene.spatial_index[ia];
  Vec grad = chi_grads[ia] * (c * sum - 1.0);
  Vec spatial = c_grads[ia] * (chi * sum) + own_o.grad * (chi * c * own_h);
  scatter_add(grad, index, spatial);
  grad += model.hamiltonian_state_gradient(x[ia], p[ia], t) * (chi * c * own_o.value);
  return grad;
}

Scene scheduled_scene(const Scene& scene, const SolverParams& params, int iter) {
  Scene s = scene;
  s.a1 = a1_at(params, iter);
  return s;
}

SaddleState initialize(const Problem& problem, const SolverParams& params) {
  const int steps = steps_for(problem.horizon, params.dt);
  if (steps < 2) throw InvalidInput("horizon too short: need at least two time steps");
  std::mt19937_64 rng(params.seed);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::uniform_real_distribution<double> costate(-0.01, 0.01);

  SaddleState s;
  const std::size_t n = problem.models.size();
  s.x.resize(n);
  s.p.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec& goal = problem.scene.goal[i];
    const Vec& start = problem.starts[i];
    auto& x = s.x[i];
    x.resize(goal.size(), steps + 1);
    if (!problem.initial_guess.empty()) {
      const Eigen::MatrixXd& guess = problem.initial_guess[i];
      const double last = static_cast<double>(guess.cols() - 1);
      for (int j = 0; j <= steps; ++j) {
        // Reversed index j is forward position (J - j) / J along the guess.
        const double pos = last * static_cast<double>(steps - j) / steps;
        const auto lo = std::min(static_cast<Eigen::Index>(pos), guess.cols() - 2);
        const double w = pos - static_cast<double>(lo);
        x.col(j) = (1.0 - w) * guess.col(lo) + w * guess.col(lo + 1);
      }
    } else {
      for (int j = 0; j <= steps; ++j) {
        x.col(j) = goal + (start - goal) * (static_cast<double>(j) / steps);
      }
    }
    if (params.init_noise > 0.0 && problem.initial_guess.empty()) {
      for (int j = 1; j < steps; ++j) {
        for (Eigen::Index k = 0; k < x.rows(); ++k) x(k, j) += params.init_noise * noise(rng);
      }
    }
    x.col(0) = goal;
    x.col(steps) = start;
  }
  for (std::size_t i = 0; i < n; ++i) {
    auto& p = s.p[i];
    p.resize(s.x[i].rows(), steps + 1);
    p.col(0).setZero();
    for (int j = 1; j <= steps; ++j) {
      for (Eigen::Index k = 0; k < p.rows(); ++k) p(k, j) = costate(rng);
    }
  }
  s.z = s.x;
  return s;
}

void costate_sweep(SaddleState& state, const Scene& scene, std::span<const ModelPtr> models,
                   const SolverParams& params, int /*iter*/) {
  const int steps = state.steps();
  const std::size_t n = models.size();
  // Every p_{i,j} depends only on its own pre-sweep value, so updating in
  // place is equivalent to reading a snapshot.
  for_each_step(1, steps + 1, params, [&](int j) {
    const double t = j * params.dt;
    const auto x = state.slice(state.x, j);
    const auto alpha = gating(scene, x, t, params.indicators);
    for (std::size_t i = 0; i < n; ++i) {
      CostateProxInput in;
      in.x = x[i];
      in.beta = state.p[i].col(j) + params.sigma * (state.z[i].col(j) - state.z[i].col(j - 1));
      in.alpha = alpha[i];
      in.sigma = params.sigma;
      in.dt = params.dt;
      in.t = t;
      state.p[i].col(j) = models[i]->costate_prox(in);
    }
  });
}

double state_descent(SaddleState& state, const Scene& scene, std::span<const ModelPtr> models,
                     const SolverParams& params, int iter) {
  const int steps = state.steps();
  const std::size_t n = models.size();
  const double rate = descent_rate_at(params, iter);
  const std::vector<Eigen::MatrixXd> x_old = state.x;
  std::vector<double> residual(static_cast<std::size_t>(steps + 1), 0.0);

  for_each_step(1, steps, params, [&](int j) {
    const double t = j * params.dt;
    std::vector<Vec> x(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      x[i] = x_old[i].col(j);
      p[i] = state.p[i].col(j);
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec xi = x[i] - params.tau * (p[i] - state.p[i].col(j + 1));
      Vec updated;
      if (params.descent_anchor == DescentAnchor::kCurrent) {
        // Gradient of -dt H(x~) + |x~ - xi|^2 / (2 tau) at x~ = x.
        const Vec grad = holistic_hamiltonian_gradient(scene, models, x, p, t,
                                                       static_cast<int>(i), params.indicators);
        updated = x[i] - rate * ((x[i] - xi) / params.tau - params.dt * grad);
      } else {
        // Other agents stay at their pre-update values for this step.
        std::vector<Vec> probe = x;
        probe[i] = xi;
        const Vec grad = holistic_hamiltonian_gradient(scene, models, probe, p, t,
                                                       static_cast<int>(i), params.indicators);
        updated = xi + rate * params.dt * grad;
      }
      worst = std::max(worst, (updated - x[i]).lpNorm<Eigen::Infinity>());
      state.x[i].col(j) = updated;
    }
    residual[static_cast<std::size_t>(j)] = worst;
  });

  for (std::size_t i = 0; i < n; ++i) state.z[i] = 2.0 * state.x[i] - x_old[i];
  return *std::max_element(residual.begin(), residual.end());
}

double value_of(const SaddleState& state, const Scene& scene, std::span<const ModelPtr> models,
                const SolverParams& params) {
  const int steps = state.steps();
  double coupling = 0.0;
  for (std::size_t i = 0; i < state.x.size(); ++i) {
    for (int j = 1; j <= steps; ++j) {
      coupling += state.p[i].col(j).dot(state.x[i].col(j) - state.x[i].col(j - 1));
    }
  }
  double running = 0.0;
  for (int j = 1; j <= steps; ++j) {
    const auto x = state.slice(state.x, j);
    const auto p = state.slice(state.p, j);
    running += holistic_hamiltonian(scene, models, x, p, j * params.dt, params.indicators);
  }
  return coupling - params.dt * running;
}

Plan extract_plan(const SaddleState& state, const Problem& problem, const SolverParams& params) {
  const int steps = state.steps();
  Plan plan;
  plan.dt = params.dt;
  plan.horizon = steps * params.dt;
  for (std::size_t i = 0; i < state.x.size(); ++i) {
    const auto& model = *problem.models[i];
    Eigen::MatrixXd forward(state.x[i].rows(), steps + 1);
    Eigen::MatrixXd controls(model.control_dim(), steps);
    for (int k = 0; k <= steps; ++k) forward.col(k) = state.x[i].col(steps - k);
    for (int k = 0; k < steps; ++k) {
      const int j = steps - k;
      controls.col(k) = model.optimal_control(state.x[i].col(j), state.p[i].col(j), j * params.dt);
    }
    plan.states.push_back(std::move(forward));
    plan.controls.push_back(std::move(controls));
  }
  return plan;
}

SolveResult solve(const Problem& problem, const SolverParams& params) {
  problem.validate();
  params.validate();
  const auto started = std::chrono::steady_clock::now();

  SolveResult result;
  auto& state = result.state;
  state = initialize(problem, params);
  const std::span<const ModelPtr> models(problem.models);

  SolveDiagnostics diag;
  diag.requested_horizon = problem.horizon;
  diag.steps = state.steps();
  diag.horizon = diag.steps * params.dt;

  Scene scene = scheduled_scene(problem.scene, params, 0);
  int quiet_streak = 0;
  int iter = 0;
  for (; iter < params.max_iters; ++iter) {
    if (iter > 0 && iter % params.a1_every == 0) scene.a1 = a1_at(params, iter);
    costate_sweep(state, scene, models, params, iter);
    diag.residual = state_descent(state, scene, models, params, iter);
    if (params.history_every > 0 && iter % params.history_every == 0) {
      diag.value_history.emplace_back(iter, value_of(state, scene, models, params));
    }
    quiet_streak = diag.residual < params.conv_tol ? quiet_streak + 1 : 0;
    if (quiet_streak >= params.conv_window) {
      diag.converged = true;
      ++iter;
      break;
    }
  }
  diag.iterations = iter;
  diag.final_a1 = scene.a1;

  result.plan = extract_plan(state, problem, params);
  result.plan.value = value_of(state, scene, models, params);
  diag.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  result.plan.diagnostics = std::move(diag);
  return result;
}

}  // namespace hjplan
