#include "hjplan/io.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace hjplan {
namespace {

using Json = nlohmann::ordered_json;

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ScenarioError(where + ": " + what);
}

// Strict view of one JSON object: every key read is recorded and any key
// that was never read is reported by finish().
class Fields {
 public:
  Fields(const Json& node, std::string path) : node_(node), path_(std::move(path)) {
    if (!node_.is_object()) fail(here(), "expected an object");
  }

  bool has(const std::string& key) const { return node_.contains(key); }
  std::string at(const std::string& key) const { return path_ + "/" + key; }

  const Json& raw(const std::string& key) {
    seen_.insert(key);
    if (!node_.contains(key)) fail(at(key), "missing required field");
    return node_.at(key);
  }

  double number(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_number()) fail(at(key), "expected a number");
    return v.get<double>();
  }
  double number(const std::string& key, double fallback) {
    return has(key) ? number(key) : (seen_.insert(key), fallback);
  }
  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0)) fail(at(key), "must be positive");
    return v;
  }
  int integer(const std::string& key, int fallback) {
    if (!has(key)) return (seen_.insert(key), fallback);
    const Json& v = raw(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<int>();
  }
  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return (seen_.insert(key), fallback);
    const Json& v = raw(key);
    if (!v.is_number_unsigned()) fail(at(key), "expected a nonnegative integer");
    return v.get<std::uint64_t>();
  }
  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return (seen_.insert(key), fallback);
    const Json& v = raw(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }
  std::string string(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }
  std::string string(const std::string& key, const std::string& fallback) {
    return has(key) ? string(key) : (seen_.insert(key), fallback);
  }
  Vec vector(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array()) fail(at(key), "expected an array of numbers");
    Vec out(static_cast<Eigen::Index>(v.size()));
    for (std::size_t k = 0; k < v.size(); ++k) {
      if (!v[k].is_number()) fail(at(key) + "/" + std::to_string(k), "expected a number");
      out[static_cast<Eigen::Index>(k)] = v[k].get<double>();
    }
    return out;
  }
  const Json& array(const std::string& key) {
    const Json& v = raw(key);
    if (!v.is_array()) fail(at(key), "expected an array");
    return v;
  }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!seen_.count(key)) fail(at(key), "unknown key");
    }
  }

  const std::string& here() const { return path_; }

 private:
  const Json& node_;
  std::string path_;
  std::set<std::string> seen_;
};

Json to_json_vec(const Vec& v) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back(v[k]);
  return a;
}

ModelKind parse_kind(const std::string& text, const std::string& where) {
  if (text == "isotropic") return ModelKind::kIsotropic;
  if (text == "simple_car") return ModelKind::kSimpleCar;
  if (text == "quadcopter") return ModelKind::kQuadcopter;
  fail(where, "unknown agent kind '" + text + "' (isotropic, simple_car, quadcopter)");
}

int state_dim_of(const AgentSpec& a) {
  switch (a.kind) {
    case ModelKind::kIsotropic: return static_cast<int>(a.start.size());
    case ModelKind::kSimpleCar: return 3;
    case ModelKind::kQuadcopter: return 12;
  }
  return 0;
}

Vec expand_quadcopter_state(const Vec& v, const std::string& where) {
  if (v.size() == 12) return v;
  if (v.size() == 3) {
    Vec full = Vec::Zero(12);
    full.head<3>() = v;
    return full;
  }
  fail(where, "quadcopter state needs 12 components (or 3 for position at rest)");
}

AgentSpec parse_agent(const Json& node, const std::string& path) {
  Fields f(node, path);
  AgentSpec a;
  a.kind = parse_kind(f.string("kind"), f.at("kind"));
  a.start = f.vector("start");
  a.goal = f.vector("goal");
  switch (a.kind) {
    case ModelKind::kIsotropic:
      a.speed = f.positive("V", 1.0);
      if (a.start.size() != 2 && a.start.size() != 3) fail(f.at("start"), "isotropic agents live in 2-D or 3-D");
      break;
    case ModelKind::kSimpleCar:
      a.speed = f.positive("V", 1.0);
      a.turn_rate = f.positive("W", 2.0);
      if (a.start.size() != 3) fail(f.at("start"), "simple_car state is (x, y, theta)");
      break;
    case ModelKind::kQuadcopter:
      a.gravity = f.number("g", 0.1);
      if (a.gravity < 0.0) fail(f.at("g"), "gravity must be nonnegative");
      a.cruise_speed = f.number("cruise_speed", 0.0);
      if (a.cruise_speed < 0.0) fail(f.at("cruise_speed"), "must be nonnegative");
      a.start = expand_quadcopter_state(a.start, f.at("start"));
      a.goal = expand_quadcopter_state(a.goal, f.at("goal"));
      break;
  }
  if (a.goal.size() != a.start.size()) fail(f.at("goal"), "goal dimension differs from start");
  if (f.has("goal_mask")) {
    const Json& m = f.array("goal_mask");
    if (static_cast<Eigen::Index>(m.size()) != a.goal.size()) {
      fail(f.at("goal_mask"), "needs one flag per state component");
    }
    for (std::size_t k = 0; k < m.size(); ++k) {
      if (!m[k].is_boolean()) fail(f.at("goal_mask") + "/" + std::to_string(k), "expected true or false");
      a.goal_mask.push_back(m[k].get<bool>());
    }
  }
  f.finish();
  return a;
}

Obstacle parse_obstacle(const Json& node, const std::string& path) {
  Fields f(node, path);
  Obstacle o;
  const std::string shape = f.string("shape");
  const Vec center = f.vector("center");
  const double radius = f.number("radius");
  if (!(radius > 0.0)) fail(f.at("radius"), "must be positive");
  o.hidden = f.boolean("hidden", false);
  if (shape == "disk") {
    if (center.size() != 2 && center.size() != 3) fail(f.at("center"), "needs 2 or 3 coordinates");
    o.shape = Ball{center, radius};
  } else if (shape == "cylinder") {
    if (center.size() != 2) fail(f.at("center"), "cylinder axis point is (x, y)");
    Cylinder c;
    c.axis = Eigen::Vector2d(center[0], center[1]);
    c.radius = radius;
    if (f.has("z") && !f.raw("z").is_null()) {
      const Vec z = f.vector("z");
      if (z.size() != 2 || !(z[0] < z[1])) fail(f.at("z"), "expected a nonempty interval [z0, z1]");
      c.z_range = std::make_pair(z[0], z[1]);
    } else if (f.has("z")) {
      f.raw("z");
    }
    o.shape = c;
  } else {
    fail(f.at("shape"), "unknown shape '" + shape + "' (disk, cylinder)");
  }
  f.finish();
  return o;
}

SolverParams parse_solver(const Json& node, const std::string& path) {
  Fields f(node, path);
  SolverParams p;
  p.sigma = f.positive("sigma", p.sigma);
  p.tau = f.positive("tau", p.tau);
  p.dt = f.positive("dt", p.dt);
  p.max_iters = f.integer("max_iters", p.max_iters);
  p.conv_tol = f.positive("conv_tol", p.conv_tol);
  p.conv_window = f.integer("conv_window", p.conv_window);
  p.init_noise = f.number("init_noise", p.init_noise);
  p.history_every = f.integer("history_every", p.history_every);
  const std::string anchor = f.string("descent_anchor", "prox_center");
  if (anchor == "current") {
    p.descent_anchor = DescentAnchor::kCurrent;
  } else if (anchor == "prox_center") {
    p.descent_anchor = DescentAnchor::kProxCenter;
  } else {
    fail(f.at("descent_anchor"), "expected 'current' or 'prox_center'");
  }
  if (f.has("A1")) {
    Fields a(f.raw("A1"), f.at("A1"));
    p.a1_start = a.positive("start", p.a1_start);
    p.a1_increment = a.number("increment", p.a1_increment);
    p.a1_every = a.integer("every", p.a1_every);
    p.a1_cap = a.positive("cap", p.a1_cap);
    a.finish();
  }
  if (f.has("descent_rate")) {
    Fields r(f.raw("descent_rate"), f.at("descent_rate"));
    p.rate_start = r.number("start", p.rate_start);
    p.rate_halve_every = r.integer("halve_every", p.rate_halve_every);
    r.finish();
  }
  f.finish();
  if (p.sigma * p.tau > 0.25 + 1e-15) {
    std::ostringstream os;
    os << "sigma * tau = " << p.sigma * p.tau << " exceeds 0.25";
    fail(path, os.str());
  }
  try {
    p.validate();
  } catch (const InvalidInput& e) {
    fail(path, e.what());
  }
  return p;
}

Json solver_to_json(const SolverParams& p) {
  Json j;
  j["sigma"] = p.sigma;
  j["tau"] = p.tau;
  j["dt"] = p.dt;
  j["max_iters"] = p.max_iters;
  j["conv_tol"] = p.conv_tol;
  j["conv_window"] = p.conv_window;
  j["A1"] = {{"start", p.a1_start}, {"increment", p.a1_increment}, {"every", p.a1_every}, {"cap", p.a1_cap}};
  j["descent_rate"] = {{"start", p.rate_start}, {"halve_every", p.rate_halve_every}};
  j["descent_anchor"] = p.descent_anchor == DescentAnchor::kCurrent ? "current" : "prox_center";
  j["init_noise"] = p.init_noise;
  j["history_every"] = p.history_every;
  return j;
}

Json obstacle_to_json(const Obstacle& o) {
  Json j;
  if (const auto* b = std::get_if<Ball>(&o.shape)) {
    j["shape"] = "disk";
    j["center"] = to_json_vec(b->center);
    j["radius"] = b->radius;
  } else {
    const auto& c = std::get<Cylinder>(o.shape);
    j["shape"] = "cylinder";
    j["center"] = {c.axis[0], c.axis[1]};
    j["radius"] = c.radius;
    j["z"] = c.z_range ? Json{c.z_range->first, c.z_range->second} : Json(nullptr);
  }
  j["hidden"] = o.hidden;
  return j;
}

Json agent_to_json(const AgentSpec& a) {
  Json j;
  j["kind"] = to_string(a.kind);
  switch (a.kind) {
    case ModelKind::kIsotropic: j["V"] = a.speed; break;
    case ModelKind::kSimpleCar:
      j["V"] = a.speed;
      j["W"] = a.turn_rate;
      break;
    case ModelKind::kQuadcopter:
      j["g"] = a.gravity;
      j["cruise_speed"] = a.cruise_speed;
      break;
  }
  j["start"] = to_json_vec(a.start);
  j["goal"] = to_json_vec(a.goal);
  if (!a.goal_mask.empty()) j["goal_mask"] = a.goal_mask;
  return j;
}

Json matrix_columns(const Eigen::MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index k = 0; k < m.cols(); ++k) rows.push_back(to_json_vec(m.col(k)));
  return rows;
}

Json times_json(int count, double dt) {
  Json t = Json::array();
  for (int k = 0; k < count; ++k) t.push_back(k * dt);
  return t;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

Json event_to_json(const RolloutEvent& e) {
  Json j;
  j["kind"] = to_string(e.kind);
  j["time"] = e.time;
  j["step"] = e.step;
  if (e.kind == RolloutEvent::Kind::kDiscovery) j["obstacle"] = e.obstacle;
  if (e.kind == RolloutEvent::Kind::kReplan) j["plan"] = e.plan_index;
  return j;
}

bool same_vec(const Vec& a, const Vec& b) { return a.size() == b.size() && a == b; }

}  // namespace

bool AgentSpec::operator==(const AgentSpec& o) const {
  return kind == o.kind && speed == o.speed && turn_rate == o.turn_rate && gravity == o.gravity &&
         cruise_speed == o.cruise_speed && same_vec(start, o.start) && same_vec(goal, o.goal) &&
         goal_mask == o.goal_mask;
}

bool same_obstacle(const Obstacle& a, const Obstacle& b) {
  if (a.hidden != b.hidden || a.shape.index() != b.shape.index()) return false;
  if (const auto* ba = std::get_if<Ball>(&a.shape)) {
    const auto& bb = std::get<Ball>(b.shape);
    return same_vec(ba->center, bb.center) && ba->radius == bb.radius;
  }
  const auto& ca = std::get<Cylinder>(a.shape);
  const auto& cb = std::get<Cylinder>(b.shape);
  return ca.axis == cb.axis && ca.radius == cb.radius && ca.z_range == cb.z_range;
}

bool same_solver_params(const SolverParams& a, const SolverParams& b) {
  return a.sigma == b.sigma && a.tau == b.tau && a.dt == b.dt && a.max_iters == b.max_iters &&
         a.conv_tol == b.conv_tol && a.conv_window == b.conv_window && a.a1_start == b.a1_start &&
         a.a1_increment == b.a1_increment && a.a1_every == b.a1_every && a.a1_cap == b.a1_cap &&
         a.rate_start == b.rate_start && a.rate_halve_every == b.rate_halve_every &&
         a.seed == b.seed && a.init_noise == b.init_noise && a.descent_anchor == b.descent_anchor &&
         a.history_every == b.history_every;
}

bool ScenarioFile::operator==(const ScenarioFile& o) const {
  if (obstacles.size() != o.obstacles.size()) return false;
  for (std::size_t k = 0; k < obstacles.size(); ++k) {
    if (!same_obstacle(obstacles[k], o.obstacles[k])) return false;
  }
  return name == o.name && agents == o.agents && delta == o.delta && a2 == o.a2 && a3 == o.a3 &&
         same_solver_params(solver, o.solver) && horizon == o.horizon && kappa == o.kappa &&
         sense_radius == o.sense_radius && goal_tolerance == o.goal_tolerance &&
         max_retries == o.max_retries && step_budget == o.step_budget;
}

ScenarioFile parse_scenario_text(const std::string& text, const std::string& origin) {
  Json root;
  try {
    root = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(origin + ": malformed JSON: " + e.what());
  }
  Fields f(root, origin + ":");
  ScenarioFile s;
  s.name = f.string("name", "");
  const Json& agents = f.array("agents");
  if (agents.empty()) fail(f.at("agents"), "at least one agent is required");
  for (std::size_t i = 0; i < agents.size(); ++i) {
    s.agents.push_back(parse_agent(agents[i], f.at("agents") + "/" + std::to_string(i)));
  }
  if (f.has("obstacles")) {
    const Json& obs = f.array("obstacles");
    for (std::size_t k = 0; k < obs.size(); ++k) {
      s.obstacles.push_back(parse_obstacle(obs[k], f.at("obstacles") + "/" + std::to_string(k)));
    }
  }
  s.delta = f.positive("delta", s.delta);
  s.a2 = f.positive("A2", s.a2);
  s.a3 = f.positive("A3", s.a3);
  s.solver = f.has("solver") ? parse_solver(f.raw("solver"), f.at("solver")) : SolverParams{};
  s.solver.seed = f.unsigned_integer("seed", 0);
  if (f.has("horizon")) {
    const Json& h = f.raw("horizon");
    if (h.is_string() && h.get<std::string>() == "auto") {
      s.horizon.reset();
    } else if (h.is_number() && h.get<double>() > 0.0) {
      s.horizon = h.get<double>();
    } else {
      fail(f.at("horizon"), "expected a positive number or \"auto\"");
    }
  }
  s.kappa = f.positive("kappa", s.kappa);
  s.sense_radius = f.number("sense_radius", s.sense_radius);
  if (s.sense_radius < 0.0) fail(f.at("sense_radius"), "must be nonnegative");
  s.goal_tolerance = f.positive("goal_tolerance", s.goal_tolerance);
  s.max_retries = f.integer("max_retries", s.max_retries);
  if (s.max_retries < 0) fail(f.at("max_retries"), "must be nonnegative");
  s.step_budget = f.integer("step_budget", s.step_budget);
  if (s.step_budget < 1) fail(f.at("step_budget"), "must be positive");
  f.finish();

  try {
    build_scenario(s).scene.validate();
  } catch (const InvalidInput& e) {
    throw ScenarioError(origin + ": " + e.what());
  }
  return s;
}

ScenarioFile parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path.string() + ": cannot open file");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_scenario_text(buffer.str(), path.string());
}

Json scenario_to_json(const ScenarioFile& s) {
  Json j;
  j["name"] = s.name;
  j["agents"] = Json::array();
  for (const auto& a : s.agents) j["agents"].push_back(agent_to_json(a));
  j["obstacles"] = Json::array();
  for (const auto& o : s.obstacles) j["obstacles"].push_back(obstacle_to_json(o));
  j["delta"] = s.delta;
  j["A2"] = s.a2;
  j["A3"] = s.a3;
  j["solver"] = solver_to_json(s.solver);
  j["seed"] = s.solver.seed;
  j["horizon"] = s.horizon ? Json(*s.horizon) : Json("auto");
  j["kappa"] = s.kappa;
  j["sense_radius"] = s.sense_radius;
  j["goal_tolerance"] = s.goal_tolerance;
  j["max_retries"] = s.max_retries;
  j["step_budget"] = s.step_budget;
  return j;
}

void write_scenario(const ScenarioFile& file, const std::filesystem::path& path) {
  write_text(path, scenario_to_json(file).dump(2) + "\n");
}

Scenario build_scenario(const ScenarioFile& file) {
  Scenario sc;
  sc.name = file.name;
  sc.solver = file.solver;
  sc.horizon = file.horizon;
  sc.kappa = file.kappa;
  sc.sense_radius = file.sense_radius;
  sc.goal_tolerance = file.goal_tolerance;
  sc.max_retries = file.max_retries;
  sc.step_budget = file.step_budget;

  Scene& scene = sc.scene;
  scene.obstacles = file.obstacles;
  scene.delta = file.delta;
  scene.a1 = file.solver.a1_start;
  scene.a2 = file.a2;
  scene.a3 = file.a3;
  bool any_mask = false;
  int spatial_dim = 0;
  for (std::size_t i = 0; i < file.agents.size(); ++i) {
    const auto& a = file.agents[i];
    ModelPtr model;
    switch (a.kind) {
      case ModelKind::kIsotropic:
        model = std::make_shared<IsotropicModel>(state_dim_of(a), a.speed);
        break;
      case ModelKind::kSimpleCar: model = std::make_shared<SimpleCarModel>(a.speed, a.turn_rate); break;
      case ModelKind::kQuadcopter: model = std::make_shared<QuadcopterModel>(a.gravity, a.cruise_speed); break;
    }
    const int dim = static_cast<int>(model->spatial_indices().size());
    if (spatial_dim != 0 && dim != spatial_dim) {
      throw InvalidInput("agents " + std::to_string(i) + ": all agents must share one spatial dimension");
    }
    spatial_dim = dim;
    sc.models.push_back(model);
    sc.starts.push_back(a.start);
    scene.goal.push_back(a.goal);
    scene.spatial_index.push_back(model->spatial_indices());
    scene.goal_mask.push_back(a.goal_mask);
    any_mask = any_mask || !a.goal_mask.empty();
  }
  if (!any_mask) scene.goal_mask.clear();
  scene.spatial_dim = spatial_dim;
  return sc;
}

std::string trajectory_csv(const Eigen::MatrixXd& states, double dt) {
  std::ostringstream os;
  os << "t";
  for (Eigen::Index r = 0; r < states.rows(); ++r) os << ",x" << (r + 1);
  os << "\n" << std::fixed << std::setprecision(9);
  for (Eigen::Index k = 0; k < states.cols(); ++k) {
    os << static_cast<double>(k) * dt;
    for (Eigen::Index r = 0; r < states.rows(); ++r) os << "," << states(r, k);
    os << "\n";
  }
  return os.str();
}

Json validation_to_json(const ValidationReport& r) {
  Json j;
  j["valid"] = r.valid();
  j["collision_free"] = r.collision_free;
  j["min_pair_distance"] = std::isfinite(r.min_pair_distance) ? Json(r.min_pair_distance) : Json(nullptr);
  j["min_obstacle_clearance"] =
      std::isfinite(r.min_obstacle_clearance) ? Json(r.min_obstacle_clearance) : Json(nullptr);
  j["goal_tolerance"] = r.goal_tolerance;
  j["goal_errors"] = r.goal_errors;
  j["collisions"] = Json::array();
  for (const auto& c : r.collisions) {
    Json e{{"time", c.time}, {"agent", c.agent}};
    if (c.other >= 0) e["other_agent"] = c.other;
    if (c.obstacle >= 0) e["obstacle"] = c.obstacle;
    j["collisions"].push_back(e);
  }
  j["feasibility_violations"] = Json::array();
  for (const auto& v : r.feasibility_violations) {
    j["feasibility_violations"].push_back({{"agent", v.agent}, {"step", v.step}});
  }
  return j;
}

Json plan_to_json(const PlanOutcome& outcome, const Scenario& scenario) {
  const Plan& plan = outcome.plan;
  const auto& d = plan.diagnostics;
  Json j;
  j["value"] = plan.value;
  j["horizon"] = plan.horizon;
  j["dt"] = plan.dt;
  j["steps"] = plan.steps();
  j["attempts"] = outcome.attempts;
  j["horizons_tried"] = outcome.horizons_tried;
  Json diag;
  diag["converged"] = d.converged;
  diag["iterations"] = d.iterations;
  diag["residual"] = d.residual;
  diag["requested_horizon"] = d.requested_horizon;
  diag["final_A1"] = d.final_a1;
  diag["value_history"] = Json::array();
  for (const auto& [it, v] : d.value_history) diag["value_history"].push_back({it, v});
  j["diagnostics"] = diag;
  j["validation"] = validation_to_json(outcome.validation);
  j["times"] = times_json(plan.steps() + 1, plan.dt);
  j["agents"] = Json::array();
  for (std::size_t i = 0; i < plan.states.size(); ++i) {
    j["agents"].push_back({{"kind", to_string(scenario.models[i]->kind())},
                           {"states", matrix_columns(plan.states[i])},
                           {"controls", matrix_columns(plan.controls[i])}});
  }
  return j;
}

Json rollout_to_json(const RolloutResult& r, const Scenario& scenario) {
  Json j;
  j["arrived"] = r.arrived;
  j["aborted"] = r.aborted;
  j["abort_reason"] = r.abort_reason;
  j["events"] = Json::array();
  for (const auto& e : r.events) j["events"].push_back(event_to_json(e));
  j["plans"] = Json::array();
  for (const auto& p : r.plans) j["plans"].push_back(plan_to_json(p, scenario));
  Json exec;
  const int count = r.executed.empty() ? 0 : static_cast<int>(r.executed.front().cols());
  exec["times"] = times_json(count, scenario.solver.dt);
  exec["source_plan"] = r.executed_plan;
  exec["agents"] = Json::array();
  for (const auto& m : r.executed) exec["agents"].push_back({{"states", matrix_columns(m)}});
  j["executed"] = exec;
  ValidationOptions options;
  options.goal_tolerance = scenario.goal_tolerance;
  if (count > 0) {
    j["ground_truth_validation"] = validation_to_json(
        validate_trajectories(r.executed, scenario.solver.dt, scenario.scene, scenario.models, true, options));
  }
  return j;
}

void write_plan_outputs(const PlanOutcome& outcome, const ScenarioFile& file,
                        const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Scenario scenario = build_scenario(file);
  Json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["kind"] = "plan";
  doc["scenario"] = scenario_to_json(file);
  doc["resolved"] = {{"horizon", outcome.plan.horizon},
                     {"sense_radius", scenario.effective_sense_radius()},
                     {"spatial_dim", scenario.scene.spatial_dim}};
  doc["plan"] = plan_to_json(outcome, scenario);
  write_text(dir / "plan.json", doc.dump(2) + "\n");
  for (std::size_t i = 0; i < outcome.plan.states.size(); ++i) {
    write_text(dir / ("agent_" + std::to_string(i) + ".csv"),
               trajectory_csv(outcome.plan.states[i], outcome.plan.dt));
  }
}

void write_rollout_outputs(const RolloutResult& rollout, const ScenarioFile& file,
                           const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Scenario scenario = build_scenario(file);
  Json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["kind"] = "rollout";
  doc["scenario"] = scenario_to_json(file);
  doc["resolved"] = {{"sense_radius", scenario.effective_sense_radius()},
                     {"spatial_dim", scenario.scene.spatial_dim}};
  doc["rollout"] = rollout_to_json(rollout, scenario);
  write_text(dir / "rollout.json", doc.dump(2) + "\n");
  const double dt = scenario.solver.dt;
  for (std::size_t i = 0; i < rollout.executed.size(); ++i) {
    write_text(dir / ("agent_" + std::to_string(i) + ".csv"), trajectory_csv(rollout.executed[i], dt));
  }
  for (std::size_t k = 0; k < rollout.plans.size(); ++k) {
    const auto& plan = rollout.plans[k].plan;
    for (std::size_t i = 0; i < plan.states.size(); ++i) {
      write_text(dir / ("plan_" + std::to_string(k) + "_agent_" + std::to_string(i) + ".csv"),
                 trajectory_csv(plan.states[i], plan.dt));
    }
  }
}

StoredTrajectories read_output(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScenarioError(path.string() + ": cannot open file");
  Json doc;
  try {
    doc = Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ScenarioError(path.string() + ": malformed JSON: " + e.what());
  }
  StoredTrajectories out;
  auto read_states = [&](const Json& agents) {
    for (const auto& agent : agents) {
      const Json& rows = agent.at("states");
      Eigen::MatrixXd m;
      for (std::size_t k = 0; k < rows.size(); ++k) {
        const auto& row = rows[k];
        if (k == 0) m.resize(static_cast<Eigen::Index>(row.size()), static_cast<Eigen::Index>(rows.size()));
        for (std::size_t r = 0; r < row.size(); ++r) {
          m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = row[r].get<double>();
        }
      }
      out.states.push_back(std::move(m));
    }
  };
  try {
    out.kind = doc.at("kind").get<std::string>();
    if (out.kind == "plan") {
      const Json& plan = doc.at("plan");
      out.dt = plan.at("dt").get<double>();
      out.converged = plan.at("diagnostics").at("converged").get<bool>();
      read_states(plan.at("agents"));
    } else if (out.kind == "rollout") {
      const Json& r = doc.at("rollout");
      out.dt = doc.at("scenario").at("solver").at("dt").get<double>();
      out.converged = r.at("arrived").get<bool>() && !r.at("aborted").get<bool>();
      read_states(r.at("executed").at("agents"));
    } else {
      throw ScenarioError(path.string() + ": unknown output kind '" + out.kind + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(path.string() + ": not a planner output file: " + e.what());
  }
  return out;
}

}  // namespace hjplan
