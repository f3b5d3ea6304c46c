// Command-line front end: solve, rollout, bench, validate.

#include "hjplan/bench.hpp"
#include "hjplan/io.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitRejected = 2;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iters;
  bool sequential = false;
  bool parallel = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Override the scenario seed");
  cmd->add_option("--max-iters", c.max_iters, "Override the iteration cap")->check(CLI::PositiveNumber);
  auto* seq = cmd->add_flag("--sequential", c.sequential, "Deterministic sequential sweeps (default)");
  cmd->add_flag("--parallel", c.parallel, "Partition prox and descent updates across threads")->excludes(seq);
  cmd->add_flag("-q,--quiet", c.quiet, "Suppress the summary on stdout");
}

hjplan::ScenarioFile load(const std::string& path, const Common& c) {
  auto file = hjplan::parse_scenario(path);
  if (c.seed) file.solver.seed = *c.seed;
  if (c.max_iters) file.solver.max_iters = *c.max_iters;
  file.solver.mode = c.parallel ? hjplan::ExecutionMode::kParallel : hjplan::ExecutionMode::kSequential;
  return file;
}

void print_validation(const hjplan::ValidationReport& v) {
  std::cout << "  collision-free " << (v.collision_free ? "yes" : "no") << ", min pair distance "
            << v.min_pair_distance << ", min obstacle clearance " << v.min_obstacle_clearance
            << ", feasibility violations " << v.feasibility_violations.size() << "\n  goal errors:";
  for (double e : v.goal_errors) std::cout << " " << e;
  std::cout << "\n";
}

int run_solve(const std::string& path, const std::string& out, const Common& c) {
  const auto file = load(path, c);
  const auto scenario = hjplan::build_scenario(file);
  const auto outcome = hjplan::plan_once(scenario);
  hjplan::write_plan_outputs(outcome, file, out);
  if (!c.quiet) {
    const auto& d = outcome.plan.diagnostics;
    std::cout << (file.name.empty() ? path : file.name) << ": value " << outcome.plan.value << ", horizon "
              << outcome.plan.horizon << ", " << d.iterations << " iterations, "
              << (d.converged ? "converged" : "not converged") << ", " << d.wall_seconds << " s\n";
    print_validation(outcome.validation);
  }
  return outcome.ok() ? kExitOk : kExitRejected;
}

int run_rollout(const std::string& path, const std::string& out, const Common& c) {
  const auto file = load(path, c);
  const auto scenario = hjplan::build_scenario(file);
  hjplan::PlanCallback progress;
  if (!c.quiet) {
    progress = [](const hjplan::PlanOutcome& o, int step) {
      const auto& d = o.plan.diagnostics;
      std::cerr << "  plan from step " << step << ": horizon " << o.plan.horizon << ", " << d.iterations
                << " iterations, " << (o.ok() ? "ok" : "rejected") << ", " << d.wall_seconds << " s\n";
    };
  }
  const auto result = hjplan::rollout_with_discovery(scenario, scenario.effective_sense_radius(), progress);
  hjplan::write_rollout_outputs(result, file, out);
  if (!c.quiet) {
    std::cout << (file.name.empty() ? path : file.name) << ": " << result.plans.size() << " plan(s), "
              << (result.arrived ? "arrived" : "did not arrive");
    if (result.aborted) std::cout << " (" << result.abort_reason << ")";
    std::cout << "\n";
    for (const auto& e : result.events) {
      std::cout << "  t=" << e.time << " " << hjplan::to_string(e.kind);
      if (e.kind == hjplan::RolloutEvent::Kind::kDiscovery) std::cout << " obstacle " << e.obstacle;
      if (e.kind == hjplan::RolloutEvent::Kind::kReplan) std::cout << " plan " << e.plan_index;
      std::cout << "\n";
    }
  }
  return result.arrived && !result.aborted ? kExitOk : kExitRejected;
}

int run_bench(const std::vector<std::string>& paths, int reps, const Common& c) {
  hjplan::BenchmarkOptions options;
  options.repetitions = reps;
  options.concurrent = c.parallel;
  options.seed = c.seed;
  options.max_iters = c.max_iters;
  const std::vector<std::filesystem::path> files(paths.begin(), paths.end());
  const auto entries = hjplan::run_benchmark(files, options);
  std::cout << hjplan::benchmark_to_json(entries).dump(2) << "\n";
  return kExitOk;
}

int run_validate(const std::string& output, const std::string& path, const Common& c) {
  const auto file = hjplan::parse_scenario(path);
  const auto scenario = hjplan::build_scenario(file);
  const auto stored = hjplan::read_output(output);
  if (stored.states.size() != scenario.models.size()) {
    throw hjplan::ScenarioError(output + ": agent count differs from " + path);
  }
  hjplan::ValidationOptions options;
  options.goal_tolerance = scenario.goal_tolerance;
  const auto report =
      hjplan::validate_trajectories(stored.states, stored.dt, scenario.scene, scenario.models, true, options);
  if (!c.quiet) {
    auto doc = hjplan::validation_to_json(report);
    doc["converged"] = stored.converged;
    std::cout << doc.dump(2) << "\n";
  }
  return stored.converged && report.valid() ? kExitOk : kExitRejected;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent trajectory planner based on a discrete Hopf-Lax saddle problem"};
  app.set_version_flag("--version", std::string(hjplan::kToolVersion));
  app.require_subcommand(1);

  Common common;
  std::string scenario;
  std::string out_dir;
  std::string output;
  std::vector<std::string> bench_files;
  int reps = 1;

  auto* solve = app.add_subcommand("solve", "Plan once with known obstacles and write plan outputs");
  solve->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  solve->add_option("-o,--output", out_dir, "Output directory")->required();
  add_common(solve, common);

  auto* rollout = app.add_subcommand("rollout", "Execute plans, discovering hidden obstacles and replanning");
  rollout->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  rollout->add_option("-o,--output", out_dir, "Output directory")->required();
  add_common(rollout, common);

  auto* bench = app.add_subcommand("bench", "Time scenarios and report median wall time as JSON");
  bench->add_option("scenarios", bench_files, "Scenario files")->check(CLI::ExistingFile);
  bench->add_option("--reps", reps, "Repetitions per scenario")->check(CLI::PositiveNumber);
  add_common(bench, common);

  auto* check = app.add_subcommand("validate", "Check an output file against a scenario, hidden obstacles included");
  check->add_option("output", output, "plan.json or rollout.json")->required()->check(CLI::ExistingFile);
  check->add_option("scenario", scenario, "Scenario file")->required()->check(CLI::ExistingFile);
  add_common(check, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (*solve) return run_solve(scenario, out_dir, common);
    if (*rollout) return run_rollout(scenario, out_dir, common);
    if (*bench) return run_bench(bench_files, reps, common);
    if (*check) return run_validate(output, scenario, common);
  } catch (const std::exception& e) {
    std::cerr << "hjplan: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
