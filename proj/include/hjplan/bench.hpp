#pragma once

#include "hjplan/io.hpp"

#include <filesystem>
#include <vector>

namespace hjplan {

struct BenchmarkEntry {
  std::string scenario;  // file path as given
  std::string name;
  int repetitions = 0;
  bool rollout = false;  // scenarios with hidden obstacles are benchmarked as rollouts
  double median_seconds = 0.0;
  std::vector<double> seconds;
  /// Solver iterations per repetition, summed over plans for a rollout.
  std::vector<int> iterations;
  std::vector<bool> converged;
  std::vector<int> plans;
};

struct BenchmarkOptions {
  int repetitions = 1;
  /// Run scenarios concurrently, one per worker thread.
  bool concurrent = false;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_iters;
};

std::vector<BenchmarkEntry> run_benchmark(const std::vector<std::filesystem::path>& scenarios,
                                          const BenchmarkOptions& options);

nlohmann::ordered_json benchmark_to_json(const std::vector<BenchmarkEntry>& entries);

}  // namespace hjplan
