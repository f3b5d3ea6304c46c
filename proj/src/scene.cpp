#include "hjplan/scene.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hjplan {
namespace {

// d/du tanh(u) without overflow for large |u|.
double sech2(double u) {
  const double th = std::tanh(u);
  return 1.0 - th * th;
}

void require_dim(const Vec& q, int dim, const char* what) {
  if (q.size() != dim) {
    std::ostringstream os;
    os << what << ": expected a " << dim << "-D point, got " << q.size() << "-D";
    throw InvalidInput(os.str());
  }
}

// Distance to an infinite vertical cylinder (or planar disk) through `axis`.
double radial_distance(const Vec& q, const Eigen::Vector2d& axis, double radius, Vec* grad) {
  const Eigen::Vector2d rel(q[0] - axis[0], q[1] - axis[1]);
  const double r = rel.norm();
  if (grad) {
    grad->setZero(q.size());
    if (r > 0.0) {
      (*grad)[0] = rel[0] / r;
      (*grad)[1] = rel[1] / r;
    }
  }
  return r - radius;
}

double capped_cylinder_distance(const Vec& q, const Cylinder& c, Vec* grad) {
  Vec radial_grad;
  const double dr = radial_distance(q, c.axis, c.radius, grad ? &radial_grad : nullptr);
  const auto [z0, z1] = *c.z_range;
  const double mid = 0.5 * (z0 + z1);
  const double half = 0.5 * (z1 - z0);
  const double dz = std::abs(q[2] - mid) - half;
  const double zsign = q[2] >= mid ? 1.0 : -1.0;

  if (dr <= 0.0 && dz <= 0.0) {
    if (grad) {
      if (dr >= dz) {
        *grad = radial_grad;
      } else {
        grad->setZero(3);
        (*grad)[2] = zsign;
      }
    }
    return std::max(dr, dz);
  }
  const double er = std::max(dr, 0.0);
  const double ez = std::max(dz, 0.0);
  const double len = std::hypot(er, ez);
  if (grad) {
    *grad = radial_grad * (er / len);
    (*grad)[2] += zsign * ez / len;
  }
  return len;
}

}  // namespace

double Obstacle::signed_distance(const Vec& q, Vec* grad) const {
  if (const auto* ball = std::get_if<Ball>(&shape)) {
    if (ball->center.size() == 2 && q.size() == 3) {
      return radial_distance(q, Eigen::Vector2d(ball->center[0], ball->center[1]), ball->radius,
                             grad);
    }
    require_dim(q, static_cast<int>(ball->center.size()), "signed_distance");
    const Vec rel = q - ball->center;
    const double r = rel.norm();
    if (grad) {
      *grad = r > 0.0 ? Vec(rel / r) : Vec::Zero(q.size());
    }
    return r - ball->radius;
  }
  const auto& cyl = std::get<Cylinder>(shape);
  if (q.size() != 2 && q.size() != 3) {
    throw InvalidInput("signed_distance: cylinder needs a 2-D or 3-D point");
  }
  if (q.size() == 2 || !cyl.z_range) {
    return radial_distance(q, cyl.axis, cyl.radius, grad);
  }
  return capped_cylinder_distance(q, cyl, grad);
}

void Obstacle::validate() const {
  if (const auto* ball = std::get_if<Ball>(&shape)) {
    if (!(ball->radius > 0.0)) throw InvalidInput("obstacle radius must be positive");
    if (ball->center.size() != 2 && ball->center.size() != 3) {
      throw InvalidInput("disk/sphere center must have 2 or 3 coordinates");
    }
    return;
  }
  const auto& cyl = std::get<Cylinder>(shape);
  if (!(cyl.radius > 0.0)) throw InvalidInput("obstacle radius must be positive");
  if (cyl.z_range && !(cyl.z_range->first < cyl.z_range->second)) {
    throw InvalidInput("cylinder z-interval must be nonempty");
  }
}

Vec Scene::spatial(int agent, const Vec& state) const {
  const auto& idx = spatial_index.at(static_cast<std::size_t>(agent));
  Vec q(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) q[static_cast<Eigen::Index>(k)] = state[idx[k]];
  return q;
}

void Scene::validate() const {
  if (spatial_dim != 2 && spatial_dim != 3) throw InvalidInput("spatial dimension must be 2 or 3");
  if (!(delta > 0.0)) throw InvalidInput("collision radius delta must be positive");
  if (!(a1 > 0.0 && a2 > 0.0 && a3 > 0.0)) throw InvalidInput("A1, A2, A3 must be positive");
  if (spatial_index.size() != goal.size()) {
    throw InvalidInput("spatial projection count does not match agent count");
  }
  if (!goal_mask.empty() && goal_mask.size() != goal.size()) {
    throw InvalidInput("goal mask count does not match agent count");
  }
  for (std::size_t i = 0; i < goal.size(); ++i) {
    if (!goal[i].allFinite()) throw InvalidInput("agent " + std::to_string(i) + ": goal is not finite");
    if (static_cast<int>(spatial_index[i].size()) != spatial_dim) {
      throw InvalidInput("agent " + std::to_string(i) + ": spatial projection must select " +
                         std::to_string(spatial_dim) + " coordinates");
    }
    for (int k : spatial_index[i]) {
      if (k < 0 || k >= goal[i].size()) {
        throw InvalidInput("agent " + std::to_string(i) + ": spatial index out of range");
      }
    }
    if (!goal_mask.empty() && !goal_mask[i].empty() &&
        static_cast<Eigen::Index>(goal_mask[i].size()) != goal[i].size()) {
      throw InvalidInput("agent " + std::to_string(i) + ": goal mask length mismatch");
    }
  }
  for (const auto& o : obstacles) {
    o.validate();
    if (const auto* ball = std::get_if<Ball>(&o.shape);
        ball && ball->center.size() == 3 && spatial_dim == 2) {
      throw InvalidInput("sphere obstacle in a planar scene");
    }
  }
}

double signed_distance(const Scene& scene, const Vec& q, double /*t*/, Vec* grad) {
  require_dim(q, scene.spatial_dim, "signed_distance");
  double best = kNoObstacleDistance;
  Vec g;
  if (grad) grad->setZero(q.size());
  for (const auto& o : scene.obstacles) {
    if (o.hidden) continue;
    const double d = o.signed_distance(q, grad ? &g : nullptr);
    if (d < best) {
      best = d;
      if (grad) *grad = g;
    }
  }
  return best;
}

int nearest_obstacle(const Scene& scene, const Vec& q, double /*t*/) {
  require_dim(q, scene.spatial_dim, "nearest_obstacle");
  int best_index = -1;
  double best = kNoObstacleDistance;
  for (std::size_t k = 0; k < scene.obstacles.size(); ++k) {
    if (scene.obstacles[k].hidden) continue;
    const double d = scene.obstacles[k].signed_distance(q);
    if (d < best) {
      best = d;
      best_index = static_cast<int>(k);
    }
  }
  return best_index;
}

ScalarWithGradient obstacle_indicator_of_distance(double d, double a3) {
  if (!std::isfinite(d)) return {d > 0 ? 1.0 : 0.0, Vec::Zero(1)};
  const double u = a3 * d * std::abs(d);
  Vec g(1);
  g[0] = 0.5 * sech2(u) * a3 * 2.0 * std::abs(d);
  return {0.5 * (1.0 + std::tanh(u)), g};
}

ScalarWithGradient obstacle_indicator(const Scene& scene, const Vec& q, double t) {
  Vec dgrad;
  const double d = signed_distance(scene, q, t, &dgrad);
  const auto o = obstacle_indicator_of_distance(d, scene.a3);
  return {o.value, dgrad * o.grad[0]};
}

ScalarWithGradient pair_collision_indicator(const Scene& scene, const Vec& qk, const Vec& ql) {
  if (qk.size() != ql.size()) throw InvalidInput("pair_collision_indicator: dimension mismatch");
  const Vec rel = qk - ql;
  const double u = scene.a2 * (rel.squaredNorm() - scene.delta * scene.delta);
  return {0.5 * (1.0 + std::tanh(u)), rel * (scene.a2 * sech2(u))};
}

double goal_indicator(const Scene& scene, std::span<const Vec> states, std::vector<Vec>* grads) {
  if (states.size() != scene.goal.size()) throw InvalidInput("goal_indicator: agent count mismatch");
  double sum = 0.0;
  std::vector<Vec> diffs(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (states[i].size() != scene.goal[i].size()) {
      throw InvalidInput("goal_indicator: state dimension mismatch for agent " + std::to_string(i));
    }
    diffs[i] = states[i] - scene.goal[i];
    if (!scene.goal_mask.empty() && !scene.goal_mask[i].empty()) {
      for (Eigen::Index k = 0; k < diffs[i].size(); ++k) {
        if (!scene.goal_mask[i][static_cast<std::size_t>(k)]) diffs[i][k] = 0.0;
      }
    }
    sum += diffs[i].squaredNorm();
  }
  const double e = std::exp(-scene.a1 * sum);
  if (grads) {
    grads->resize(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) (*grads)[i] = diffs[i] * (2.0 * scene.a1 * e);
  }
  return 1.0 - e;
}

double holistic_collision(const Scene& scene, std::span<const Vec> positions,
                          std::vector<Vec>* grads) {
  const std::size_t n = positions.size();
  struct PairTerm {
    std::size_t k, l;
    double value;
    Vec dk;  // gradient w.r.t. q_k
  };
  std::vector<PairTerm> pairs;
  pairs.reserve(n * (n - 1) / 2);
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t l = k + 1; l < n; ++l) {
      auto c = pair_collision_indicator(scene, positions[k], positions[l]);
      pairs.push_back({k, l, c.value, std::move(c.grad)});
    }
  }
  // Product of all pairs but one via prefix/suffix products, so a saturated
  // zero elsewhere never produces 0/0.
  const std::size_t m = pairs.size();
  std::vector<double> prefix(m + 1, 1.0), suffix(m + 1, 1.0);
  for (std::size_t k = 0; k < m; ++k) prefix[k + 1] = prefix[k] * pairs[k].value;
  for (std::size_t k = m; k-- > 0;) suffix[k] = suffix[k + 1] * pairs[k].value;
  if (grads) {
    grads->assign(n, Vec());
    for (std::size_t i = 0; i < n; ++i) (*grads)[i] = Vec::Zero(positions[i].size());
    for (std::size_t k = 0; k < m; ++k) {
      const double rest = prefix[k] * suffix[k + 1];
      (*grads)[pairs[k].k] += pairs[k].dk * rest;
      (*grads)[pairs[k].l] -= pairs[k].dk * rest;
    }
  }
  return prefix[m];
}

CollisionReport hard_collision_report(const Scene& scene, std::span<const Vec> positions,
                                      double /*t*/, bool include_hidden) {
  CollisionReport report;
  const int n = static_cast<int>(positions.size());
  for (int k = 0; k < n; ++k) {
    for (int l = k + 1; l < n; ++l) {
      if ((positions[k] - positions[l]).norm() < scene.delta) report.pair_violations.emplace_back(k, l);
    }
  }
  for (int i = 0; i < n; ++i) {
    require_dim(positions[i], scene.spatial_dim, "hard_collision_report");
    for (std::size_t o = 0; o < scene.obstacles.size(); ++o) {
      const auto& obs = scene.obstacles[o];
      if (obs.hidden && !include_hidden) continue;
      if (obs.signed_distance(positions[i]) < 0.0) {
        report.obstacle_violations.emplace_back(i, static_cast<int>(o));
      }
    }
  }
  return report;
}

}  // namespace hjplan
