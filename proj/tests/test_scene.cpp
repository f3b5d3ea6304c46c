#include "hjplan/scene.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using hjplan::Ball;
using hjplan::Cylinder;
using hjplan::Obstacle;
using hjplan::Scene;
using hjplan::Vec;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

Obstacle disk(double x, double y, double r, bool hidden = false) { return Obstacle{Ball{v2(x, y), r}, hidden}; }

Scene planar_scene(int agents = 1) {
  Scene s;
  s.spatial_dim = 2;
  for (int i = 0; i < agents; ++i) {
    s.goal.push_back(v2(10.0 * i, 0.0));
    s.spatial_index.push_back({0, 1});
  }
  return s;
}

}  // namespace

TEST_CASE("signed distance to disks") {
  Scene s = planar_scene();
  s.obstacles.push_back(disk(0, 0, 1));
  CHECK(hjplan::signed_distance(s, v2(2, 0), 0) == doctest::Approx(1.0));
  CHECK(hjplan::signed_distance(s, v2(0, 0), 0) == doctest::Approx(-1.0));
  s.obstacles.push_back(disk(3, 0, 1));
  CHECK(hjplan::signed_distance(s, v2(1.5, 0), 0) == doctest::Approx(0.5));
  CHECK(hjplan::nearest_obstacle(s, v2(2.9, 0.1), 0) == 1);
}

TEST_CASE("no known obstacles means infinite distance and free indicator") {
  Scene s = planar_scene();
  CHECK(std::isinf(hjplan::signed_distance(s, v2(0, 0), 0)));
  s.obstacles.push_back(disk(0, 0, 1, true));
  CHECK(std::isinf(hjplan::signed_distance(s, v2(0, 0), 0)));
  CHECK(hjplan::nearest_obstacle(s, v2(0, 0), 0) == -1);
  const auto o = hjplan::obstacle_indicator(s, v2(0, 0), 0);
  CHECK(o.value == 1.0);
  CHECK(o.grad.norm() == 0.0);
}

TEST_CASE("cylinders: unbounded and capped") {
  Scene s;
  s.spatial_dim = 3;
  s.obstacles.push_back(Obstacle{Cylinder{Eigen::Vector2d(0, 0), 1.0, std::nullopt}, false});
  CHECK(hjplan::signed_distance(s, v3(3, 0, 50), 0) == doctest::Approx(2.0));
  CHECK(hjplan::signed_distance(s, v3(0, 0.5, -7), 0) == doctest::Approx(-0.5));

  s.obstacles[0] = Obstacle{Cylinder{Eigen::Vector2d(0, 0), 1.0, std::make_pair(0.0, 2.0)}, false};
  CHECK(hjplan::signed_distance(s, v3(0, 0, 3), 0) == doctest::Approx(1.0));
  CHECK(hjplan::signed_distance(s, v3(4, 0, 6), 0) == doctest::Approx(5.0));  // corner: (3, 4)
  CHECK(hjplan::signed_distance(s, v3(0, 0, 1.8), 0) == doctest::Approx(-0.2));
  CHECK(hjplan::signed_distance(s, v3(0.9, 0, 1), 0) == doctest::Approx(-0.1));
}

TEST_CASE("planar disk in a 3-D scene is a vertical cylinder; 3-D ball is a sphere") {
  Scene s;
  s.spatial_dim = 3;
  s.obstacles.push_back(disk(0, 0, 1));
  CHECK(hjplan::signed_distance(s, v3(2, 0, 9), 0) == doctest::Approx(1.0));
  s.obstacles[0] = Obstacle{Ball{v3(0, 0, 0), 1.0}, false};
  CHECK(hjplan::signed_distance(s, v3(0, 0, 3), 0) == doctest::Approx(2.0));
}

TEST_CASE("obstacle indicator values") {
  using hjplan::obstacle_indicator_of_distance;
  CHECK(obstacle_indicator_of_distance(0.0, 100).value == 0.5);
  CHECK(std::abs(obstacle_indicator_of_distance(1.0, 100).value - 1.0) < 1e-12);
  // 1/2 (1 + tanh(-1)) = 1 / (1 + e^2)
  const double expected = 1.0 / (1.0 + std::exp(2.0));
  CHECK(obstacle_indicator_of_distance(-0.1, 100).value == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.11920).epsilon(1e-4));
  // Inside is small, outside is large: the sign-aware form.
  CHECK(obstacle_indicator_of_distance(-0.5, 100).value < 1e-6);
  CHECK(obstacle_indicator_of_distance(0.5, 100).value > 1.0 - 1e-6);
}

TEST_CASE("pair collision indicator values") {
  Scene s = planar_scene(2);
  s.delta = 0.2;
  s.a2 = 100;
  CHECK(hjplan::pair_collision_indicator(s, v2(0, 0), v2(0.2, 0)).value == doctest::Approx(0.5).epsilon(1e-12));
  const double expected = 1.0 / (1.0 + std::exp(8.0));  // 1/2 (1 + tanh(-4))
  CHECK(hjplan::pair_collision_indicator(s, v2(1, 1), v2(1, 1)).value ==
        doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(3.35e-4).epsilon(1e-2));
  CHECK(std::abs(hjplan::pair_collision_indicator(s, v2(0, 0), v2(2.0, 0)).value - 1.0) < 1e-12);
}

TEST_CASE("goal indicator values") {
  Scene s = planar_scene(2);
  s.a1 = 10;
  std::vector<Vec> at_goal = s.goal;
  CHECK(hjplan::goal_indicator(s, at_goal) == 0.0);
  std::vector<Vec> x = s.goal;
  x[0][0] += std::sqrt(0.06);
  x[1][1] += std::sqrt(0.04);  // total squared distance 0.1
  CHECK(hjplan::goal_indicator(s, x) == doctest::Approx(1.0 - std::exp(-1.0)).epsilon(1e-12));
  CHECK(1.0 - std::exp(-1.0) == doctest::Approx(0.63212).epsilon(1e-5));
  s.a1 = 1000;
  x = s.goal;
  x[0][0] += std::sqrt(10.0);
  CHECK(std::abs(hjplan::goal_indicator(s, x) - 1.0) < 1e-12);
}

TEST_CASE("goal indicator mask ignores masked components") {
  Scene s;
  s.spatial_dim = 2;
  s.goal = {v3(1, 2, 0.5)};
  s.spatial_index = {{0, 1}};
  s.goal_mask = {{true, true, false}};
  std::vector<Vec> x = {v3(1, 2, 3.0)};
  std::vector<Vec> grads;
  CHECK(hjplan::goal_indicator(s, x, &grads) == 0.0);
  CHECK(grads[0].norm() == 0.0);
}

TEST_CASE("holistic collision") {
  Scene s = planar_scene(3);
  s.delta = 0.5;
  std::vector<Vec> one = {v2(0, 0)};
  Scene single = planar_scene(1);
  CHECK(hjplan::holistic_collision(single, one) == 1.0);

  std::vector<Vec> q = {v2(0, 0), v2(0.5, 0), v2(50, 0)};
  CHECK(hjplan::holistic_collision(s, q) == doctest::Approx(0.5).epsilon(1e-12));

  Scene two = planar_scene(2);
  std::vector<Vec> q2 = {v2(0, 0), v2(0.3, 0.2)};
  CHECK(hjplan::holistic_collision(two, q2) == hjplan::pair_collision_indicator(two, q2[0], q2[1]).value);
}

TEST_CASE("hard collision report") {
  Scene s = planar_scene(2);
  s.delta = 0.5;
  s.obstacles.push_back(disk(5, 5, 1));
  s.obstacles.push_back(disk(-5, -5, 1, true));

  std::vector<Vec> close = {v2(0, 0), v2(0.5 * 0.99, 0)};
  auto r = hjplan::hard_collision_report(s, close, 0, false);
  REQUIRE(r.pair_violations.size() == 1);
  CHECK(r.pair_violations[0] == std::make_pair(0, 1));

  std::vector<Vec> touching = {v2(0, 0), v2(0.5, 0)};
  CHECK(hjplan::hard_collision_report(s, touching, 0, false).clear());

  std::vector<Vec> on_surface = {v2(4, 5), v2(20, 20)};
  CHECK(hjplan::hard_collision_report(s, on_surface, 0, false).clear());

  std::vector<Vec> in_hidden = {v2(-5, -5), v2(20, 20)};
  CHECK(hjplan::hard_collision_report(s, in_hidden, 0, false).clear());
  r = hjplan::hard_collision_report(s, in_hidden, 0, true);
  REQUIRE(r.obstacle_violations.size() == 1);
  CHECK(r.obstacle_violations[0] == std::make_pair(0, 1));
}

TEST_CASE("scene validation rejects bad input") {
  Scene s = planar_scene();
  s.delta = 0.0;
  CHECK_THROWS_AS(s.validate(), hjplan::InvalidInput);
  s = planar_scene();
  s.obstacles.push_back(disk(0, 0, -1));
  CHECK_THROWS_AS(s.validate(), hjplan::InvalidInput);
  s = planar_scene();
  s.goal[0] = v2(std::nan(""), 0);
  CHECK_THROWS_AS(s.validate(), hjplan::InvalidInput);
}

// ---- properties -----------------------------------------------------------

TEST_CASE("indicators stay in [0, 1] on random samples") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::uniform_real_distribution<double> sharp(0.1, 1000.0);
  Scene s = planar_scene(2);
  s.obstacles.push_back(disk(0.3, -0.2, 0.8));
  for (int k = 0; k < 100000; ++k) {
    s.a1 = sharp(rng);
    s.a2 = sharp(rng);
    s.a3 = sharp(rng);
    const Vec a = v2(u(rng), u(rng));
    const Vec b = v2(u(rng), u(rng));
    const double o = hjplan::obstacle_indicator(s, a, 0).value;
    const double c = hjplan::pair_collision_indicator(s, a, b).value;
    std::vector<Vec> x = {a, b};
    const double g = hjplan::goal_indicator(s, x);
    REQUIRE((o >= 0.0 && o <= 1.0));
    REQUIRE((c >= 0.0 && c <= 1.0));
    REQUIRE((g >= 0.0 && g <= 1.0));
  }
}

TEST_CASE("pair indicator is symmetric and monotone; obstacle indicator is monotone") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Scene s = planar_scene(2);
  for (int k = 0; k < 10000; ++k) {
    const Vec a = v2(u(rng), u(rng));
    const Vec b = v2(u(rng), u(rng));
    REQUIRE(hjplan::pair_collision_indicator(s, a, b).value == hjplan::pair_collision_indicator(s, b, a).value);
  }
  double prev_c = -1.0;
  double prev_o = -1.0;
  for (int k = 0; k <= 4000; ++k) {
    const double r = k * 0.001;
    const double c = hjplan::pair_collision_indicator(s, v2(0, 0), v2(r, 0)).value;
    const double o = hjplan::obstacle_indicator_of_distance(r - 2.0, s.a3).value;
    REQUIRE(c >= prev_c);
    REQUIRE(o >= prev_o);
    prev_c = c;
    prev_o = o;
  }
}

TEST_CASE("smooth indicators agree with hard steps away from the boundary") {
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> d(0.5, 5.0);
  for (int k = 0; k < 10000; ++k) {
    const double dist = d(rng);
    REQUIRE(std::abs(hjplan::obstacle_indicator_of_distance(dist, 100).value - 1.0) < 1e-6);
    REQUIRE(hjplan::obstacle_indicator_of_distance(-dist, 100).value < 1e-6);
  }
  // For pairs the step error is exactly 1/2 (1 - tanh(A2 g)) at squared-distance
  // gap g; it drops below 1e-6 only once A2 g >= 6.91, so at g = 0.05 the
  // error is 4.54e-5. Check that value exactly and the 1e-6 bound from g = 0.07.
  Scene s = planar_scene(2);
  s.delta = 0.5;
  s.a2 = 100;
  const double at_gap = 1.0 - hjplan::pair_collision_indicator(s, v2(0, 0), v2(std::sqrt(0.25 + 0.05), 0)).value;
  CHECK(at_gap == doctest::Approx(0.5 * (1.0 - std::tanh(5.0))).epsilon(1e-9));
  std::uniform_real_distribution<double> gap(0.07, 4.0);
  for (int k = 0; k < 10000; ++k) {
    const double g = gap(rng);
    const double far = std::sqrt(s.delta * s.delta + g);
    REQUIRE(std::abs(hjplan::pair_collision_indicator(s, v2(0, 0), v2(far, 0)).value - 1.0) < 1e-6);
    if (s.delta * s.delta - g >= 0.0) {
      const double near = std::sqrt(s.delta * s.delta - g);
      REQUIRE(hjplan::pair_collision_indicator(s, v2(0, 0), v2(0, near)).value < 1e-6);
    }
  }
}

TEST_CASE("indicator gradients match central differences") {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Scene s = planar_scene(3);
  s.a1 = 2.0;
  s.a2 = 5.0;
  s.a3 = 5.0;
  s.obstacles.push_back(disk(0.2, 0.1, 0.7));
  s.obstacles.push_back(disk(-1.0, 1.0, 0.4));
  int checked = 0;
  double worst = 0.0;
  while (checked < 1000) {
    std::vector<Vec> q = {v2(u(rng), u(rng)), v2(u(rng), u(rng)), v2(u(rng), u(rng))};
    // Stay away from tanh saturation and from the medial axis of the union.
    const double d = hjplan::signed_distance(s, q[0], 0);
    const double d0 = s.obstacles[0].signed_distance(q[0]);
    const double d1 = s.obstacles[1].signed_distance(q[0]);
    const double sep = (q[0] - q[1]).squaredNorm() - s.delta * s.delta;
    if (std::abs(d) > 0.6 || std::abs(d0 - d1) < 1e-3 || std::abs(sep) > 0.5 ||
        (q[0] - v2(0.2, 0.1)).norm() < 1e-2 || (q[0] - v2(-1.0, 1.0)).norm() < 1e-2) {
      continue;
    }
    ++checked;

    const auto o = hjplan::obstacle_indicator(s, q[0], 0);
    const Vec fd_o = oracle::central_difference(
        [&](const Vec& p) { return hjplan::obstacle_indicator(s, p, 0).value; }, q[0]);
    const auto c = hjplan::pair_collision_indicator(s, q[0], q[1]);
    const Vec fd_c = oracle::central_difference(
        [&](const Vec& p) { return hjplan::pair_collision_indicator(s, p, q[1]).value; }, q[0]);
    std::vector<Vec> gg;
    hjplan::goal_indicator(s, q, &gg);
    const Vec fd_g = oracle::central_difference(
        [&](const Vec& p) {
          auto x = q;
          x[0] = p;
          return hjplan::goal_indicator(s, x);
        },
        q[0]);
    std::vector<Vec> gc;
    hjplan::holistic_collision(s, q, &gc);
    const Vec fd_h = oracle::central_difference(
        [&](const Vec& p) {
          auto x = q;
          x[0] = p;
          return hjplan::holistic_collision(s, x);
        },
        q[0]);
    for (int k = 0; k < 2; ++k) {
      worst = std::max({worst, oracle::relative_error(o.grad[k], fd_o[k]),
                        oracle::relative_error(c.grad[k], fd_c[k]), oracle::relative_error(gg[0][k], fd_g[k]),
                        oracle::relative_error(gc[0][k], fd_h[k])});
    }
  }
  CHECK(worst <= 1e-4);
}
