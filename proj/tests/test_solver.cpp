#include "hjplan/solver.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <memory>
#include <random>

using namespace hjplan;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

Problem isotropic_problem(Vec start, Vec goal, double horizon, double speed = 1.0) {
  Problem pr;
  pr.scene.spatial_dim = static_cast<int>(goal.size());
  pr.scene.goal = {goal};
  pr.scene.spatial_index = {{0, 1}};
  pr.models = {std::make_shared<IsotropicModel>(static_cast<int>(goal.size()), speed)};
  pr.starts = {std::move(start)};
  pr.horizon = horizon;
  return pr;
}

Problem car_pair_problem() {
  Problem pr;
  pr.scene.spatial_dim = 2;
  pr.scene.goal = {(Vec(3) << 4, 2, 0).finished(), (Vec(3) << 4, 0, 0).finished()};
  pr.scene.spatial_index = {{0, 1}, {0, 1}};
  pr.models = {std::make_shared<SimpleCarModel>(1.0, 2.0), std::make_shared<SimpleCarModel>(1.0, 2.0)};
  pr.starts = {(Vec(3) << 0, 0, 0).finished(), (Vec(3) << 0, 2, 0).finished()};
  pr.horizon = 1.0;
  return pr;
}

SolverParams quick(int iters) {
  SolverParams p;
  p.max_iters = iters;
  return p;
}

}  // namespace

TEST_CASE("schedules") {
  SolverParams p;
  CHECK(a1_at(p, 0) == 10.0);
  CHECK(a1_at(p, 999) == 10.0);
  CHECK(a1_at(p, 1000) == 60.0);
  CHECK(a1_at(p, 25000) == 1000.0);
  CHECK(descent_rate_at(p, 0) == 0.1);
  CHECK(descent_rate_at(p, 1999) == 0.05);
  CHECK(descent_rate_at(p, 3000) == 0.0125);
  CHECK(steps_for(6.0, 0.1) == 60);
  CHECK(steps_for(6.04, 0.1) == 60);
}

TEST_CASE("parameter validation") {
  SolverParams p;
  p.sigma = 1.0;
  p.tau = 0.3;
  CHECK_THROWS_AS(p.validate(), InvalidInput);
  p.tau = 0.25;
  CHECK_NOTHROW(p.validate());
  p.dt = 0.0;
  CHECK_THROWS_AS(p.validate(), InvalidInput);

  Problem pr = isotropic_problem(v2(0, 0), v2(1, 0), 0.1);
  CHECK_THROWS_AS(initialize(pr, SolverParams{}), InvalidInput);  // J = 1
  pr.starts[0] = Vec(3);
  CHECK_THROWS_AS(pr.validate(), InvalidInput);
}

TEST_CASE("holistic hamiltonian examples") {
  Problem pr = car_pair_problem();
  pr.scene.a1 = 10;
  const std::span<const ModelPtr> models(pr.models);
  const std::vector<Vec> zero = {Vec::Zero(3), Vec::Zero(3)};
  const std::vector<Vec> p = {(Vec(3) << 1, 2, 3).finished(), (Vec(3) << -1, 0, 1).finished()};
  CHECK(holistic_hamiltonian(pr.scene, models, pr.scene.goal, p, 0) == 0.0);

  std::vector<Vec> far = {(Vec(3) << -20, 0, 0).finished(), (Vec(3) << -20, 30, 0).finished()};
  CHECK(holistic_hamiltonian(pr.scene, models, far, zero, 0) == doctest::Approx(-1.0).epsilon(1e-12));

  std::vector<Vec> touching = {(Vec(3) << -20, 0, 0).finished(), (Vec(3) << -20, 0.5, 0).finished()};
  CHECK(holistic_hamiltonian(pr.scene, models, touching, zero, 0) == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("holistic hamiltonian gradient matches central differences") {
  Problem pr = car_pair_problem();
  pr.scene.a1 = 0.3;
  pr.scene.a2 = 2.0;
  pr.scene.a3 = 2.0;
  pr.scene.obstacles.push_back(Obstacle{Ball{v2(2, 1), 0.5}, false});
  const std::span<const ModelPtr> models(pr.models);
  std::mt19937_64 rng(31);
  double worst = 0.0;
  int checked = 0;
  while (checked < 200) {
    std::vector<Vec> x = {oracle::random_vec(rng, 3, 1.5), oracle::random_vec(rng, 3, 1.5)};
    x[0].head<2>() += v2(2, 1);
    const std::vector<Vec> p = {oracle::random_vec(rng, 3), oracle::random_vec(rng, 3)};
    if (std::abs(std::cos(x[0][2]) * p[0][0] + std::sin(x[0][2]) * p[0][1]) < 1e-3) continue;
    if ((x[0].head<2>() - v2(2, 1)).norm() < 1e-2) continue;
    ++checked;
    const Vec g = holistic_hamiltonian_gradient(pr.scene, models, x, p, 0, 0);
    const Vec fd = oracle::central_difference(
        [&](const Vec& y) {
          auto xs = x;
          xs[0] = y;
          return holistic_hamiltonian(pr.scene, models, xs, p, 0);
        },
        x[0]);
    for (int k = 0; k < 3; ++k) worst = std::max(worst, oracle::relative_error(g[k], fd[k]));
  }
  CHECK(worst <= 1e-4);
}

TEST_CASE("initialization") {
  Problem pr = isotropic_problem(v2(3, 4), v2(0, 0), 1.0);
  SolverParams params;
  params.init_noise = 0.0;
  const SaddleState s = initialize(pr, params);
  REQUIRE(s.steps() == 10);
  for (int j = 0; j <= 10; ++j) {
    CHECK((s.x[0].col(j) - v2(0.3 * j, 0.4 * j)).norm() < 1e-12);
  }
  CHECK(s.z[0] == s.x[0]);
  CHECK(s.p[0].col(0).norm() == 0.0);
  CHECK(s.p[0].rightCols(10).cwiseAbs().maxCoeff() < 0.01);

  params.init_noise = 0.1;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    params.seed = seed;
    const SaddleState a = initialize(pr, params);
    const SaddleState b = initialize(pr, params);
    CHECK(a.x[0] == b.x[0]);
    CHECK(a.p[0] == b.p[0]);
    CHECK(a.x[0].col(0) == pr.scene.goal[0]);
    CHECK(a.x[0].col(10) == pr.starts[0]);
    CHECK(a.x[0] != s.x[0]);
  }
}

TEST_CASE("initial guess is resampled onto the grid") {
  Problem pr = isotropic_problem(v2(2, 0), v2(0, 0), 0.4);
  Eigen::MatrixXd guess(2, 3);
  guess << 2, 1, 0,  //
      0, 1, 0;
  pr.initial_guess = {guess};
  const SaddleState s = initialize(pr, SolverParams{});
  // Reversed index: column j is forward time (J - j) / J.
  CHECK(s.x[0].col(4) == v2(2, 0));
  CHECK((s.x[0].col(3) - v2(1.5, 0.5)).norm() < 1e-12);
  CHECK((s.x[0].col(2) - v2(1, 1)).norm() < 1e-12);
  CHECK((s.x[0].col(1) - v2(0.5, 0.5)).norm() < 1e-12);
  CHECK(s.x[0].col(0) == v2(0, 0));

  pr.initial_guess = {Eigen::MatrixXd(2, 1)};
  CHECK_THROWS_AS(pr.validate(), InvalidInput);
}

TEST_CASE("costate sweep examples") {
  SolverParams params;
  Problem pr = isotropic_problem(v2(3, 4), v2(0, 0), 1.0);
  SaddleState s = initialize(pr, params);
  for (int j = 0; j <= s.steps(); ++j) s.z[0].col(j) = v2(1, 1);
  s.p[0].setZero();
  costate_sweep(s, pr.scene, pr.models, params, 0);
  CHECK(s.p[0].norm() == 0.0);

  // Every agent deep inside an obstacle: alpha = 0 and p = beta.
  pr.scene.obstacles.push_back(Obstacle{Ball{v2(1.5, 2), 50.0}, false});
  s = initialize(pr, params);
  Eigen::MatrixXd beta = s.p[0];
  for (int j = 1; j <= s.steps(); ++j) beta.col(j) += params.sigma * (s.z[0].col(j) - s.z[0].col(j - 1));
  costate_sweep(s, pr.scene, pr.models, params, 0);
  CHECK((s.p[0] - beta).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("single drone sweep matches the numeric prox entry by entry") {
  Problem pr;
  pr.scene.spatial_dim = 3;
  Vec goal = Vec::Zero(12);
  goal.head<3>() << 2, 0, 1;
  Vec start = Vec::Zero(12);
  start[2] = 1;
  pr.scene.goal = {goal};
  pr.scene.spatial_index = {{0, 1, 2}};
  pr.models = {std::make_shared<QuadcopterModel>(0.1)};
  pr.starts = {start};
  pr.horizon = 2.0;
  SolverParams params;
  params.seed = 4;
  params.init_noise = 0.3;
  SaddleState s = initialize(pr, params);
  std::mt19937_64 rng(32);
  s.p[0] += oracle::random_vec(rng, static_cast<int>(s.p[0].size()), 0.2).reshaped(12, s.steps() + 1);
  s.p[0].col(0).setZero();
  const SaddleState before = s;
  costate_sweep(s, pr.scene, pr.models, params, 0);
  double worst = 0.0;
  for (int j = 1; j <= s.steps(); ++j) {
    CostateProxInput in;
    in.x = before.x[0].col(j);
    in.beta = before.p[0].col(j) + params.sigma * (before.z[0].col(j) - before.z[0].col(j - 1));
    in.alpha = 1.0 - std::exp(-pr.scene.a1 * (in.x - goal).squaredNorm());
    in.sigma = params.sigma;
    in.dt = params.dt;
    worst = std::max(worst, (s.p[0].col(j) - oracle::numeric_prox(*pr.models[0], in)).lpNorm<Eigen::Infinity>());
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("state descent leaves a stationary straight line alone and never moves pinned entries") {
  SolverParams params;
  params.init_noise = 0.0;
  Problem pr = isotropic_problem(v2(103, 104), v2(100, 100), 1.0);
  pr.scene.goal[0] = v2(0, 0);  // goal far away: chi_f = 1 and flat
  SaddleState s = initialize(pr, params);
  for (int j = 0; j <= s.steps(); ++j) s.x[0].col(j) = v2(100 + 0.3 * j, 100 + 0.4 * j);
  s.z = s.x;
  s.p[0].setZero();
  const Eigen::MatrixXd before = s.x[0];
  const double moved = state_descent(s, pr.scene, pr.models, params, 0);
  CHECK(moved == 0.0);
  CHECK(s.x[0] == before);

  Problem toy = isotropic_problem(v2(3, 4), v2(0, 0), 1.0);
  s = initialize(toy, params);
  for (int it = 0; it < 50; ++it) {
    costate_sweep(s, toy.scene, toy.models, params, it);
    state_descent(s, toy.scene, toy.models, params, it);
    REQUIRE(s.x[0].col(0) == toy.scene.goal[0]);
    REQUIRE(s.x[0].col(s.steps()) == toy.starts[0]);
    REQUIRE(s.p[0].col(0).norm() == 0.0);
  }
}

TEST_CASE("one iteration matches a hand-rolled reference") {
  // Single isotropic agent, no obstacles: alpha = chi_f, grad of the
  // holistic Hamiltonian = grad(chi_f) (V |p| - 1).
  const double V = 1.0;
  Problem pr = isotropic_problem(v2(1.2, 0.7), v2(0.1, -0.2), 0.6, V);
  SolverParams params;
  params.seed = 9;
  SaddleState s = initialize(pr, params);
  const Eigen::MatrixXd x0 = s.x[0];
  const Eigen::MatrixXd p0 = s.p[0];
  const Eigen::MatrixXd z0 = s.z[0];
  const int J = s.steps();
  const double a1 = params.a1_start;
  const Vec goal = pr.scene.goal[0];

  auto chi = [&](const Vec& x) { return 1.0 - std::exp(-a1 * (x - goal).squaredNorm()); };
  Eigen::MatrixXd p = p0;
  for (int j = 1; j <= J; ++j) {
    const Vec beta = p0.col(j) + params.sigma * (z0.col(j) - z0.col(j - 1));
    const double thresh = params.sigma * params.dt * chi(x0.col(j)) * V;
    const double n = beta.norm();
    p.col(j) = n > thresh ? Vec((1.0 - thresh / n) * beta) : Vec(Vec::Zero(2));
  }
  Eigen::MatrixXd x = x0;
  for (int j = 1; j < J; ++j) {
    const Vec xi = x0.col(j) - params.tau * (p.col(j) - p.col(j + 1));
    const Vec dchi = 2.0 * a1 * (xi - goal) * std::exp(-a1 * (xi - goal).squaredNorm());
    const Vec grad = dchi * (V * p.col(j).norm() - 1.0);
    x.col(j) = xi + params.rate_start * params.dt * grad;
  }
  const Eigen::MatrixXd z = 2.0 * x - x0;

  Scene scene = scheduled_scene(pr.scene, params, 0);
  costate_sweep(s, scene, pr.models, params, 0);
  state_descent(s, scene, pr.models, params, 0);
  CHECK((s.p[0] - p).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s.x[0] - x).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((s.z[0] - z).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("value of the running cost alone") {
  SolverParams params;
  params.init_noise = 0.0;
  Problem pr = isotropic_problem(v2(50, 50), v2(0, 0), 2.0);
  SaddleState s = initialize(pr, params);
  for (int j = 1; j < s.steps(); ++j) s.x[0].col(j) = v2(50, 50);
  s.p[0].setZero();
  CHECK(value_of(s, pr.scene, pr.models, params) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("solve: free space, start at goal, frozen indicators") {
  // With slack in the horizon the costate can collapse to zero before the
  // path is straight; stepping from the current iterate keeps the goal pull
  // alive on every seed, so single-agent free-space runs use it.
  SolverParams current;
  current.descent_anchor = DescentAnchor::kCurrent;
  SUBCASE("straight line with value close to the distance") {
    const auto r = solve(isotropic_problem(v2(0, 0), v2(3, 4), 6.0), current);
    CHECK(r.plan.diagnostics.converged);
    CHECK(std::abs(r.plan.value - 5.0) <= 0.05 * 5.0);
  }
  SUBCASE("query point equal to goal") {
    for (const bool car : {false, true}) {
      Problem pr = isotropic_problem(v2(1, 1), v2(1, 1), 2.0);
      if (car) {
        pr.models = {std::make_shared<SimpleCarModel>(1.0, 2.0)};
        pr.scene.goal = {(Vec(3) << 1, 1, 0.5).finished()};
        pr.starts = pr.scene.goal;
      }
      const auto r = solve(pr, quick(5000));
      CHECK(std::abs(r.plan.value) <= 0.05);
      const auto& st = r.plan.states[0];
      CHECK((st.colwise() - pr.starts[0]).cwiseAbs().maxCoeff() <= 0.05);
    }
  }
  SUBCASE("frozen indicators give a constant costate and a straight path") {
    SolverParams params;
    params.indicators = IndicatorMode::kFrozen;
    const auto r = solve(isotropic_problem(v2(0, 0), v2(3, 4), 5.0), params);
    const Eigen::MatrixXd& p = r.state.p[0];
    const Eigen::MatrixXd inner = p.rightCols(p.cols() - 1);
    const Vec mean = inner.rowwise().mean();
    CHECK((inner.colwise() - mean).cwiseAbs().maxCoeff() <= 1e-3);
    const auto& st = r.plan.states[0];
    const int J = static_cast<int>(st.cols()) - 1;
    const Vec dir = v2(0.6, 0.8);
    double worst = 0.0;
    for (int k = 0; k <= J; ++k) {
      const Vec q = st.col(k);
      worst = std::max(worst, (q - std::clamp(q.dot(dir), 0.0, 5.0) * dir).norm());
    }
    CHECK(worst <= 1e-3);
  }
}

TEST_CASE("converged free-space plans respect the speed bound") {
  SUBCASE("isotropic") {
    SolverParams params;
    params.descent_anchor = DescentAnchor::kCurrent;
    const auto r = solve(isotropic_problem(v2(0, 0), v2(3, 4), 6.0), params);
    REQUIRE(r.plan.diagnostics.converged);
    const auto& st = r.plan.states[0];
    for (int k = 0; k + 1 < st.cols(); ++k) {
      CHECK((st.col(k + 1) - st.col(k)).norm() <= 0.1 * 1.01);
    }
  }
  SUBCASE("simple car") {
    Problem pr = isotropic_problem(Vec::Zero(3), (Vec(3) << 2, 0, 0).finished(), 4.0);
    pr.models = {std::make_shared<SimpleCarModel>(1.0, 2.0)};
    pr.scene.spatial_dim = 2;
    const auto r = solve(pr, SolverParams{});
    REQUIRE(r.plan.diagnostics.converged);
    const auto& st = r.plan.states[0];
    for (int k = 0; k + 1 < st.cols(); ++k) {
      // Gating is near one only away from the goal.
      if ((st.col(k).head<2>() - Vec(pr.scene.goal[0]).head<2>()).norm() < 0.1) continue;
      CHECK((st.col(k + 1).head<2>() - st.col(k).head<2>()).norm() <= 0.1 * 1.01);
      CHECK(std::abs(st(2, k + 1) - st(2, k)) <= 0.1 * 2.0 * 1.01);
    }
  }
}

TEST_CASE("solve is deterministic and parallel sweeps match sequential ones") {
  Problem pr = car_pair_problem();
  pr.horizon = 6.0;
  SolverParams params = quick(400);
  params.seed = 5;
  const auto a = solve(pr, params);
  const auto b = solve(pr, params);
  for (int i = 0; i < 2; ++i) {
    CHECK(a.plan.states[static_cast<std::size_t>(i)] == b.plan.states[static_cast<std::size_t>(i)]);
    CHECK(a.state.p[static_cast<std::size_t>(i)] == b.state.p[static_cast<std::size_t>(i)]);
  }
  CHECK(a.plan.value == b.plan.value);

  params.mode = ExecutionMode::kParallel;
  params.threads = 3;
  const auto c = solve(pr, params);
  for (int i = 0; i < 2; ++i) {
    CHECK(a.plan.states[static_cast<std::size_t>(i)] == c.plan.states[static_cast<std::size_t>(i)]);
  }
}

TEST_CASE("diagnostics") {
  const auto r = solve(isotropic_problem(v2(0, 0), v2(3, 4), 6.04), SolverParams{});
  const auto& d = r.plan.diagnostics;
  CHECK(d.converged);
  CHECK(d.iterations <= SolverParams{}.max_iters);
  CHECK(d.residual < SolverParams{}.conv_tol);
  CHECK(d.steps == 60);
  CHECK(d.requested_horizon == 6.04);
  CHECK(d.horizon == doctest::Approx(6.0));
  CHECK(!d.value_history.empty());

  const auto capped = solve(isotropic_problem(v2(0, 0), v2(3, 4), 6.0), quick(50));
  CHECK_FALSE(capped.plan.diagnostics.converged);
  CHECK(capped.plan.diagnostics.iterations == 50);
}
