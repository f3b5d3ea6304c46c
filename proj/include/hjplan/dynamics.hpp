#pragma once

#include "hjplan/scene.hpp"

#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace hjplan {

enum class ModelKind { kIsotropic, kSimpleCar, kQuadcopter };

std::string to_string(ModelKind kind);

/// Arguments of the costate proximal step
///   argmin_p  dt * alpha * H(x, p, t) + |p - beta|^2 / (2 sigma).
struct CostateProxInput {
  Vec x;
  Vec beta;
  double alpha = 1.0;
  double sigma = 1.0;
  double dt = 0.1;
  double t = 0.0;
};

/// sign with sign(0) = 0.
inline double sgn(double v) { return (v > 0.0) - (v < 0.0); }

/// Motion law of one agent together with its Hamiltonian
///   H(x, p, t) = sup_a <-f(x, a, t), p>
/// and the closed-form operators the saddle-point iteration needs.
/// Implementations are immutable and safe to share between threads.
class DynamicsModel {
 public:
  virtual ~DynamicsModel() = default;

  virtual ModelKind kind() const = 0;
  virtual int state_dim() const = 0;
  virtual int control_dim() const = 0;
  /// Indices of the spatial coordinates within the state.
  virtual std::vector<int> spatial_indices() const = 0;

  /// State derivative. Out-of-bounds controls are clamped with a warning.
  virtual Vec flow(const Vec& x, const Vec& a, double t) const = 0;
  virtual double hamiltonian(const Vec& x, const Vec& p, double t) const = 0;
  virtual Vec hamiltonian_state_gradient(const Vec& x, const Vec& p, double t) const = 0;
  /// Exact minimizer of the costate proximal objective.
  virtual Vec costate_prox(const CostateProxInput& in) const = 0;
  /// A control attaining the supremum in the Hamiltonian.
  virtual Vec optimal_control(const Vec& x, const Vec& p, double t) const = 0;

  /// Straight-line lower bound on the time to move between two states,
  /// used for horizon selection.
  virtual double travel_time_bound(const Vec& from, const Vec& to) const = 0;

  /// True when moving from `from` to `to` over `dt` respects the control
  /// bounds up to relative slack `tol`.
  virtual bool admissible_step(const Vec& from, const Vec& to, double dt, double tol) const = 0;

  /// Prox objective value, exposed for oracles and diagnostics.
  double prox_objective(const CostateProxInput& in, const Vec& p) const;

 protected:
  void check_state(const Vec& x) const;
};

using ModelPtr = std::shared_ptr<const DynamicsModel>;

/// Isotropic motion x' = V(x) a with |a| = 1, H = V(x)|p|.
class IsotropicModel final : public DynamicsModel {
 public:
  struct SpeedField {
    std::function<double(const Vec&)> value;
    /// Optional; central differences are used when empty.
    std::function<Vec(const Vec&)> gradient;
  };

  IsotropicModel(int dim, double speed);
  IsotropicModel(int dim, SpeedField field, double speed_bound);

  ModelKind kind() const override { return ModelKind::kIsotropic; }
  int state_dim() const override { return dim_; }
  int control_dim() const override { return dim_; }
  std::vector<int> spatial_indices() const override;

  Vec flow(const Vec& x, const Vec& a, double t) const override;
  double hamiltonian(const Vec& x, const Vec& p, double t) const override;
  Vec hamiltonian_state_gradient(const Vec& x, const Vec& p, double t) const override;
  Vec costate_prox(const CostateProxInput& in) const override;
  Vec optimal_control(const Vec& x, const Vec& p, double t) const override;
  double travel_time_bound(const Vec& from, const Vec& to) const override;
  bool admissible_step(const Vec& from, const Vec& to, double dt, double tol) const override;

  double speed(const Vec& x) const;
  bool constant_speed() const { return !field_.value; }

 private:
  int dim_;
  double speed_;
  double speed_bound_;
  SpeedField field_;
};

/// Simple car (x, y, theta) with x' = v cos(theta), y' = v sin(theta),
/// theta' = w, |v| <= V, |w| <= W.
class SimpleCarModel final : public DynamicsModel {
 public:
  SimpleCarModel(double max_speed, double max_turn_rate);

  ModelKind kind() const override { return ModelKind::kSimpleCar; }
  int state_dim() const override { return 3; }
  int control_dim() const override { return 2; }
  std::vector<int> spatial_indices() const override { return {0, 1}; }

  Vec flow(const Vec& x, const Vec& a, double t) const override;
  double hamiltonian(const Vec& x, const Vec& p, double t) const override;
  Vec hamiltonian_state_gradient(const Vec& x, const Vec& p, double t) const override;
  Vec costate_prox(const CostateProxInput& in) const override;
  Vec optimal_control(const Vec& x, const Vec& p, double t) const override;
  double travel_time_bound(const Vec& from, const Vec& to) const override;
  bool admissible_step(const Vec& from, const Vec& to, double dt, double tol) const override;

  double max_speed() const { return v_; }
  double max_turn_rate() const { return w_; }

 private:
  double v_;
  double w_;
};

/// Quadcopter with state (x, y, z, psi, theta, phi, and their rates) and
/// control (thrust, three angular accelerations), each in [-1, 1]:
///   (x'', y'', z'') = thrust * gamma(psi, theta, phi) - (0, 0, g).
class QuadcopterModel final : public DynamicsModel {
 public:
  /// `cruise_speed` > 0 makes horizon selection use distance / cruise_speed;
  /// otherwise it uses the rest-to-rest bound 2 sqrt(D / a) with unit
  /// horizontal acceleration a.
  explicit QuadcopterModel(double gravity, double cruise_speed = 0.0);

  ModelKind kind() const override { return ModelKind::kQuadcopter; }
  int state_dim() const override { return 12; }
  int control_dim() const override { return 4; }
  std::vector<int> spatial_indices() const override { return {0, 1, 2}; }

  Vec flow(const Vec& x, const Vec& a, double t) const override;
  double hamiltonian(const Vec& x, const Vec& p, double t) const override;
  Vec hamiltonian_state_gradient(const Vec& x, const Vec& p, double t) const override;
  Vec costate_prox(const CostateProxInput& in) const override;
  Vec optimal_control(const Vec& x, const Vec& p, double t) const override;
  double travel_time_bound(const Vec& from, const Vec& to) const override;
  bool admissible_step(const Vec& from, const Vec& to, double dt, double tol) const override;

  double gravity() const { return g_; }
  double cruise_speed() const { return cruise_speed_; }

  /// Unit thrust direction for Euler angles (psi, theta, phi).
  static Eigen::Vector3d thrust_direction(double psi, double theta, double phi);
  /// Columns are d(gamma)/d(psi), d(gamma)/d(theta), d(gamma)/d(phi).
  static Eigen::Matrix3d thrust_direction_jacobian(double psi, double theta, double phi);

 private:
  double g_;
  double cruise_speed_;
};

}  // namespace hjplan
