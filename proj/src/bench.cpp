#include "hjplan/bench.hpp"

#include <algorithm>
#include <chrono>
#include <thread>

namespace hjplan {
namespace {

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

BenchmarkEntry bench_one(const std::filesystem::path& path, const BenchmarkOptions& options) {
  ScenarioFile file = parse_scenario(path);
  if (options.seed) file.solver.seed = *options.seed;
  if (options.max_iters) file.solver.max_iters = *options.max_iters;
  file.solver.mode = ExecutionMode::kSequential;
  const Scenario scenario = build_scenario(file);

  BenchmarkEntry entry;
  entry.scenario = path.string();
  entry.name = file.name;
  entry.repetitions = options.repetitions;
  entry.rollout = std::any_of(file.obstacles.begin(), file.obstacles.end(),
                              [](const Obstacle& o) { return o.hidden; });
  for (int r = 0; r < options.repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    int iterations = 0;
    bool converged = false;
    int plans = 1;
    if (entry.rollout) {
      const auto result = rollout_with_discovery(scenario, scenario.effective_sense_radius());
      for (const auto& p : result.plans) iterations += p.plan.diagnostics.iterations;
      converged = result.arrived && !result.aborted;
      plans = static_cast<int>(result.plans.size());
    } else {
      const auto outcome = plan_once(scenario);
      iterations = outcome.plan.diagnostics.iterations;
      converged = outcome.plan.diagnostics.converged;
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - t0;
    entry.seconds.push_back(elapsed.count());
    entry.iterations.push_back(iterations);
    entry.converged.push_back(converged);
    entry.plans.push_back(plans);
  }
  entry.median_seconds = median(entry.seconds);
  return entry;
}

}  // namespace

std::vector<BenchmarkEntry> run_benchmark(const std::vector<std::filesystem::path>& scenarios,
                                          const BenchmarkOptions& options) {
  if (options.repetitions < 1) throw InvalidInput("benchmark repetitions must be positive");
  std::vector<BenchmarkEntry> entries(scenarios.size());
  if (!options.concurrent || scenarios.size() < 2) {
    for (std::size_t k = 0; k < scenarios.size(); ++k) entries[k] = bench_one(scenarios[k], options);
    return entries;
  }
  std::vector<std::exception_ptr> errors(scenarios.size());
  std::vector<std::thread> workers;
  for (std::size_t k = 0; k < scenarios.size(); ++k) {
    workers.emplace_back([&, k] {
      try {
        entries[k] = bench_one(scenarios[k], options);
      } catch (...) {
        errors[k] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return entries;
}

nlohmann::ordered_json benchmark_to_json(const std::vector<BenchmarkEntry>& entries) {
  nlohmann::ordered_json doc;
  doc["tool"] = kToolName;
  doc["version"] = kToolVersion;
  doc["kind"] = "benchmark";
  doc["scenarios"] = nlohmann::ordered_json::array();
  for (const auto& e : entries) {
    nlohmann::ordered_json j;
    j["scenario"] = e.scenario;
    j["name"] = e.name;
    j["mode"] = e.rollout ? "rollout" : "solve";
    j["repetitions"] = e.repetitions;
    j["median_seconds"] = e.median_seconds;
    j["seconds"] = e.seconds;
    j["iterations"] = e.iterations;
    j["converged"] = e.converged;
    if (e.rollout) j["plans"] = e.plans;
    doc["scenarios"].push_back(j);
  }
  return doc;
}

}  // namespace hjplan
