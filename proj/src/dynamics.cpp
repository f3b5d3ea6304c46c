#include "hjplan/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

namespace hjplan {
namespace {

void warn_clamped(const char* model) {
  std::cerr << "warning: " << model << " control outside bounds; clamped\n";
}

double clamp_unit(double v, bool& clamped) {
  if (v > 1.0 || v < -1.0) {
    clamped = true;
    return std::clamp(v, -1.0, 1.0);
  }
  return v;
}

// argmin_p  s|p| + |p - b|^2 / 2  for scalar p.
double soft_threshold(double b, double s) {
  if (b == 0.0) return 0.0;
  return std::max(0.0, 1.0 - s / std::abs(b)) * b;
}

// argmin_p  s|<u, p>| + |p - b|^2 / 2  for a unit vector u: shrink the
// component of b along u toward zero by s.
template <typename V, typename U>
Vec shrink_along(const V& b, const U& u, double s) {
  const double ub = u.dot(b);
  if (ub == 0.0) return b;
  return b - std::min(1.0, s / std::abs(ub)) * ub * u;
}

}  // namespace

std::string to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kIsotropic: return "isotropic";
    case ModelKind::kSimpleCar: return "simple_car";
    case ModelKind::kQuadcopter: return "quadcopter";
  }
  return "unknown";
}

double DynamicsModel::prox_objective(const CostateProxInput& in, const Vec& p) const {
  return in.dt * in.alpha * hamiltonian(in.x, p, in.t) + (p - in.beta).squaredNorm() / (2.0 * in.sigma);
}

void DynamicsModel::check_state(const Vec& x) const {
  if (x.size() != state_dim()) {
    throw InvalidInput(to_string(kind()) + ": state has " + std::to_string(x.size()) +
                       " components, expected " + std::to_string(state_dim()));
  }
  if (x.hasNaN()) throw InvalidInput(to_string(kind()) + ": NaN in state");
}

// ---------------------------------------------------------------------------
// Isotropic

IsotropicModel::IsotropicModel(int dim, double speed)
    : dim_(dim), speed_(speed), speed_bound_(speed) {
  if (dim != 2 && dim != 3) throw InvalidInput("isotropic model needs dimension 2 or 3");
  if (!(speed > 0.0)) throw InvalidInput("isotropic speed V must be positive");
}

IsotropicModel::IsotropicModel(int dim, SpeedField field, double speed_bound)
    : dim_(dim), speed_(speed_bound), speed_bound_(speed_bound), field_(std::move(field)) {
  if (dim != 2 && dim != 3) throw InvalidInput("isotropic model needs dimension 2 or 3");
  if (!field_.value) throw InvalidInput("isotropic speed field needs a value function");
  if (!(speed_bound > 0.0)) throw InvalidInput("isotropic speed bound must be positive");
}

std::vector<int> IsotropicModel::spatial_indices() const {
  std::vector<int> idx(static_cast<std::size_t>(dim_));
  for (int k = 0; k < dim_; ++k) idx[static_cast<std::size_t>(k)] = k;
  return idx;
}

double IsotropicModel::speed(const Vec& x) const { return field_.value ? field_.value(x) : speed_; }

Vec IsotropicModel::flow(const Vec& x, const Vec& a, double) const {
  check_state(x);
  Vec dir = a;
  const double n = a.norm();
  if (n > 1.0 + 1e-12) {
    warn_clamped("isotropic");
    dir /= n;
  }
  return speed(x) * dir;
}

double IsotropicModel::hamiltonian(const Vec& x, const Vec& p, double) const {
  return speed(x) * p.norm();
}

Vec IsotropicModel::hamiltonian_state_gradient(const Vec& x, const Vec& p, double) const {
  if (!field_.value) return Vec::Zero(dim_);
  const double pn = p.norm();
  if (field_.gradient) return field_.gradient(x) * pn;
  Vec g(dim_);
  constexpr double h = 1e-6;
  for (int k = 0; k < dim_; ++k) {
    Vec xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (field_.value(xp) - field_.value(xm)) / (2.0 * h);
  }
  return g * pn;
}

Vec IsotropicModel::costate_prox(const CostateProxInput& in) const {
  const double threshold = in.sigma * in.dt * in.alpha * speed(in.x);
  const double bn = in.beta.norm();
  if (bn == 0.0) return Vec::Zero(in.beta.size());
  return std::max(0.0, 1.0 - threshold / bn) * in.beta;
}

Vec IsotropicModel::optimal_control(const Vec& x, const Vec& p, double) const {
  check_state(x);
  const double pn = p.norm();
  if (pn == 0.0) return Vec::Unit(dim_, 0);  // any unit vector is optimal
  return -p / pn;
}

double IsotropicModel::travel_time_bound(const Vec& from, const Vec& to) const {
  return (to - from).norm() / speed_bound_;
}

bool IsotropicModel::admissible_step(const Vec& from, const Vec& to, double dt, double tol) const {
  return (to - from).norm() <= dt * speed(from) * (1.0 + tol);
}

// ---------------------------------------------------------------------------
// Simple car

SimpleCarModel::SimpleCarModel(double max_speed, double max_turn_rate)
    : v_(max_speed), w_(max_turn_rate) {
  if (!(v_ > 0.0) || !(w_ > 0.0)) throw InvalidInput("simple car needs V > 0 and W > 0");
}

Vec SimpleCarModel::flow(const Vec& x, const Vec& a, double) const {
  check_state(x);
  if (a.size() != 2) throw InvalidInput("simple car control is (v, omega)");
  double v = a[0], w = a[1];
  if (std::abs(v) > v_ || std::abs(w) > w_) {
    warn_clamped("simple_car");
    v = std::clamp(v, -v_, v_);
    w = std::clamp(w, -w_, w_);
  }
  Vec f(3);
  f << v * std::cos(x[2]), v * std::sin(x[2]), w;
  return f;
}

double SimpleCarModel::hamiltonian(const Vec& x, const Vec& p, double) const {
  return v_ * std::abs(std::cos(x[2]) * p[0] + std::sin(x[2]) * p[1]) + w_ * std::abs(p[2]);
}

Vec SimpleCarModel::hamiltonian_state_gradient(const Vec& x, const Vec& p, double) const {
  const double c = std::cos(x[2]), s = std::sin(x[2]);
  Vec g = Vec::Zero(3);
  g[2] = v_ * sgn(c * p[0] + s * p[1]) * (-s * p[0] + c * p[1]);
  return g;
}

Vec SimpleCarModel::costate_prox(const CostateProxInput& in) const {
  const double s = in.sigma * in.dt * in.alpha;
  const Eigen::Vector2d heading(std::cos(in.x[2]), std::sin(in.x[2]));
  Vec p(3);
  p.head<2>() = shrink_along(Eigen::Vector2d(in.beta.head<2>()), heading, s * v_);
  p[2] = soft_threshold(in.beta[2], s * w_);
  return p;
}

Vec SimpleCarModel::optimal_control(const Vec& x, const Vec& p, double) const {
  check_state(x);
  Vec a(2);
  a << -v_ * sgn(std::cos(x[2]) * p[0] + std::sin(x[2]) * p[1]), -w_ * sgn(p[2]);
  return a;
}

double SimpleCarModel::travel_time_bound(const Vec& from, const Vec& to) const {
  return (to.head<2>() - from.head<2>()).norm() / v_;
}

bool SimpleCarModel::admissible_step(const Vec& from, const Vec& to, double dt, double tol) const {
  const double planar = (to.head<2>() - from.head<2>()).norm();
  const double turn = std::abs(to[2] - from[2]);
  return planar <= dt * v_ * (1.0 + tol) && turn <= dt * w_ * (1.0 + tol);
}

// ---------------------------------------------------------------------------
// Quadcopter

QuadcopterModel::QuadcopterModel(double gravity, double cruise_speed)
    : g_(gravity), cruise_speed_(cruise_speed) {
  if (!(g_ >= 0.0)) throw InvalidInput("quadcopter gravity must be nonnegative");
  if (!(cruise_speed_ >= 0.0)) throw InvalidInput("quadcopter cruise speed must be nonnegative");
}

double QuadcopterModel::travel_time_bound(const Vec& from, const Vec& to) const {
  const double d = (to.head<3>() - from.head<3>()).norm();
  if (cruise_speed_ > 0.0) return d / cruise_speed_;
  return 2.0 * std::sqrt(d);
}

Eigen::Vector3d QuadcopterModel::thrust_direction(double psi, double theta, double phi) {
  const double sps = std::sin(psi), cps = std::cos(psi);
  const double sth = std::sin(theta), cth = std::cos(theta);
  const double sph = std::sin(phi), cph = std::cos(phi);
  return {sph * sps + cph * cps * sth, cph * sth * sps - cps * sph, cth * cph};
}

Eigen::Matrix3d QuadcopterModel::thrust_direction_jacobian(double psi, double theta, double phi) {
  const double sps = std::sin(psi), cps = std::cos(psi);
  const double sth = std::sin(theta), cth = std::cos(theta);
  const double sph = std::sin(phi), cph = std::cos(phi);
  Eigen::Matrix3d j;
  j.col(0) << sph * cps - cph * sps * sth, cph * sth * cps + sps * sph, 0.0;
  j.col(1) << cph * cps * cth, cph * cth * sps, -sth * cph;
  j.col(2) << cph * sps - sph * cps * sth, -sph * sth * sps - cps * cph, -cth * sph;
  return j;
}

Vec QuadcopterModel::flow(const Vec& x, const Vec& a, double) const {
  check_state(x);
  if (a.size() != 4) throw InvalidInput("quadcopter control is (thrust, tau_psi, tau_theta, tau_phi)");
  bool clamped = false;
  Vec u(4);
  for (int k = 0; k < 4; ++k) u[k] = clamp_unit(a[k], clamped);
  if (clamped) warn_clamped("quadcopter");

  Vec f(12);
  f.head<6>() = x.tail<6>();
  f.segment<3>(6) = u[0] * thrust_direction(x[3], x[4], x[5]);
  f[8] -= g_;
  f.tail<3>() = u.tail<3>();
  return f;
}

double QuadcopterModel::hamiltonian(const Vec& x, const Vec& p, double) const {
  const Eigen::Vector3d gamma = thrust_direction(x[3], x[4], x[5]);
  return -x.tail<6>().dot(p.head<6>()) + std::abs(p.segment<3>(6).dot(gamma)) + g_ * p[8] +
         p.tail<3>().lpNorm<1>();
}

Vec QuadcopterModel::hamiltonian_state_gradient(const Vec& x, const Vec& p, double) const {
  Vec g = Vec::Zero(12);
  const Eigen::Vector3d pv = p.segment<3>(6);
  const double s = sgn(pv.dot(thrust_direction(x[3], x[4], x[5])));
  g.segment<3>(3) = s * thrust_direction_jacobian(x[3], x[4], x[5]).transpose() * pv;
  g.tail<6>() = -p.head<6>();
  return g;
}

Vec QuadcopterModel::costate_prox(const CostateProxInput& in) const {
  const double s = in.alpha * in.sigma * in.dt;
  const Eigen::Vector3d gamma = thrust_direction(in.x[3], in.x[4], in.x[5]);
  Vec p(12);
  p.head<6>() = in.beta.head<6>() + s * in.x.tail<6>();
  Eigen::Vector3d b = in.beta.segment<3>(6);
  b[2] -= s * g_;
  p.segment<3>(6) = shrink_along(b, gamma, s);
  for (int k = 9; k < 12; ++k) p[k] = soft_threshold(in.beta[k], s);
  return p;
}

Vec QuadcopterModel::optimal_control(const Vec& x, const Vec& p, double) const {
  check_state(x);
  const Eigen::Vector3d gamma = thrust_direction(x[3], x[4], x[5]);
  Vec a(4);
  a << -sgn(gamma.dot(p.segment<3>(6))), -sgn(p[9]), -sgn(p[10]), -sgn(p[11]);
  return a;
}

bool QuadcopterModel::admissible_step(const Vec& from, const Vec& to, double dt, double tol) const {
  // The discrete dynamics evaluate rates at one end of the step; either
  // end is accepted. The absolute slack absorbs solver residual at rest.
  constexpr double kAbsSlack = 1e-3;
  const double slack = 1.0 + tol;
  const Vec d = to - from;
  const double rates = std::max(from.tail<6>().norm(), to.tail<6>().norm());
  if (d.head<6>().norm() > dt * rates * slack + kAbsSlack) return false;
  if (d.segment<3>(6).norm() > dt * (1.0 + g_) * slack + kAbsSlack) return false;
  return d.tail<3>().lpNorm<Eigen::Infinity>() <= dt * slack + kAbsSlack;
}

}  // namespace hjplan
