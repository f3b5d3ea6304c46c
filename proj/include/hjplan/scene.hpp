#pragma once

#include <Eigen/Dense>

#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace hjplan {

using Vec = Eigen::VectorXd;

class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Signed distance reported when no known obstacle exists.
inline constexpr double kNoObstacleDistance = std::numeric_limits<double>::infinity();

/// Disk in a planar scene; sphere when the center has three coordinates.
/// A planar disk placed in a 3-D scene acts as an unbounded vertical cylinder.
struct Ball {
  Vec center;
  double radius = 1.0;
};

/// Vertical cylinder around the axis through (x, y). Unbounded in z unless
/// a z-interval is given.
struct Cylinder {
  Eigen::Vector2d axis = Eigen::Vector2d::Zero();
  double radius = 1.0;
  std::optional<std::pair<double, double>> z_range;
};

struct Obstacle {
  std::variant<Ball, Cylinder> shape;
  bool hidden = false;

  /// Exact signed distance (negative inside). Writes the spatial gradient
  /// into `grad` when non-null; the gradient is zero where undefined.
  double signed_distance(const Vec& q, Vec* grad = nullptr) const;

  void validate() const;
};

struct Scene {
  int spatial_dim = 2;
  std::vector<Obstacle> obstacles;
  double delta = 0.5;
  double a1 = 10.0;
  double a2 = 100.0;
  double a3 = 100.0;
  /// Final full state of each agent.
  std::vector<Vec> goal;
  /// Indices of the spatial coordinates within each agent's state.
  std::vector<std::vector<int>> spatial_index;
  /// Optional per-agent mask of state components used by the goal
  /// indicator. Empty means every component counts.
  std::vector<std::vector<bool>> goal_mask;

  int agent_count() const { return static_cast<int>(goal.size()); }

  /// Spatial projection of an agent's state.
  Vec spatial(int agent, const Vec& state) const;

  /// Throws InvalidInput when the scene violates its invariants.
  void validate() const;
};

struct ScalarWithGradient {
  double value = 0.0;
  Vec grad;
};

/// Minimum signed distance over known obstacles; +inf when there are none.
double signed_distance(const Scene& scene, const Vec& q, double t, Vec* grad = nullptr);

/// Index of the known obstacle attaining the minimum distance, or -1.
int nearest_obstacle(const Scene& scene, const Vec& q, double t);

/// O(q) = 1/2 (1 + tanh(A3 d|d|)): about 0 inside, 1 outside, 1/2 on the surface.
ScalarWithGradient obstacle_indicator(const Scene& scene, const Vec& q, double t);

/// Same smoothing applied to a given signed distance; gradient is d/dd.
ScalarWithGradient obstacle_indicator_of_distance(double d, double a3);

/// c(q_k, q_l) = 1/2 (1 + tanh(A2 (|q_k - q_l|^2 - delta^2))).
/// The returned gradient is with respect to q_k; the q_l gradient is its negation.
ScalarWithGradient pair_collision_indicator(const Scene& scene, const Vec& qk, const Vec& ql);

/// chi_f = 1 - exp(-A1 sum_i |x_i - x_{i,f}|^2). `grads` receives the
/// per-agent gradients with respect to the full states when non-null.
double goal_indicator(const Scene& scene, std::span<const Vec> states,
                      std::vector<Vec>* grads = nullptr);

/// Product of pair indicators over all unordered pairs of spatial positions.
/// `grads` receives per-agent gradients with respect to the spatial positions.
double holistic_collision(const Scene& scene, std::span<const Vec> positions,
                          std::vector<Vec>* grads = nullptr);

struct CollisionReport {
  std::vector<std::pair<int, int>> pair_violations;      // (k, l), k < l
  std::vector<std::pair<int, int>> obstacle_violations;  // (agent, obstacle index)

  bool clear() const { return pair_violations.empty() && obstacle_violations.empty(); }
};

/// Exact-geometry collision check. Contact at distance delta or on an
/// obstacle surface is legal.
CollisionReport hard_collision_report(const Scene& scene, std::span<const Vec> positions,
                                      double t, bool include_hidden);

}  // namespace hjplan
