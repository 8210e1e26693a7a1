#pragma once

// Fixed-policy Monte-Carlo evaluation and the CSV forms of its results.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "batchrl/plants.hpp"
#include "batchrl/policy.hpp"
#include "batchrl/reinforce.hpp"
#include "batchrl/stats.hpp"

namespace batchrl {

struct EvaluationResult {
  EvalReport report;
  std::vector<Trajectory> trajectories;
};

// Rollouts without learning. Episode k uses the stream (seed, 3, 0, k), so
// results do not depend on the thread count. Throws ConfigError when
// episodes == 0.
EvaluationResult evaluate(const PolicyParams& params, const PlantModel& plant,
                          std::size_t episodes, std::uint64_t seed, std::size_t threads = 1,
                          ActionMode mode = ActionMode::Sample);

EvaluationResult summarize_trajectories(std::vector<Trajectory> trajectories);

std::vector<double> returns_of(const std::vector<Trajectory>& trajectories);

// episode,return
std::string returns_csv(const std::vector<Trajectory>& trajectories);

// Long format, one row per (episode, interval): episode,interval,time, the
// true states x1..xn, then controls u1..um (empty on the terminal row).
std::string trajectories_csv(const std::vector<Trajectory>& trajectories, double interval_length);

struct TrajectoryTable {
  std::size_t states = 0;
  std::size_t controls = 0;
  std::vector<std::size_t> episode;
  std::vector<std::size_t> interval;
  std::vector<double> time;
  std::vector<std::vector<double>> x;  // per row
  std::vector<std::vector<double>> u;  // per row; empty on terminal rows
};

TrajectoryTable parse_trajectories_csv(const std::string& text);

}  // namespace batchrl
