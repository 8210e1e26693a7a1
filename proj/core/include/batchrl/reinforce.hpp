#pragma once

// Likelihood-ratio policy gradient with a mean-return baseline:
//
//   grad ~= 1/K sum_k (J_k - b) sum_t grad log pi(u_t^k | x_t^k),  b = mean_k J_k
//
// followed by an Adam ascent step on the unfrozen parameters.

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "batchrl/adam.hpp"
#include "batchrl/plants.hpp"
#include "batchrl/policy.hpp"
#include "batchrl/stats.hpp"

namespace batchrl {

struct Trajectory {
  std::vector<std::vector<double>> states;        // T + 1 true states
  std::vector<std::vector<double>> measurements;  // T + 1 measured states
  std::vector<std::vector<double>> actions;       // T applied (clipped) controls
  std::vector<std::vector<double>> draws;         // T pre-clip draws
  std::vector<double> rewards;                    // T + 1
  double total_return = 0.0;
  double log_prob = 0.0;
  std::vector<double> log_prob_gradient;  // empty unless requested
  std::uint64_t params_version = 0;
};

enum class ActionMode {
  Sample,  // draw from the policy
  Mean,    // zero-variance limit: apply the mean
};

struct RolloutOptions {
  ActionMode mode = ActionMode::Sample;
  double discount = 1.0;
  bool compute_gradient = true;
};

// sum_t discount^t rewards[t]
double discounted_return(std::span<const double> rewards, double discount);

Trajectory rollout(PolicyEvaluator& evaluator, const PolicyParams& params, const PlantModel& plant,
                   Rng& rng, const RolloutOptions& options = {});

// Arithmetic mean. Throws ConfigError on an empty sample.
double compute_baseline(std::span<const double> returns);

// Baseline-corrected estimate averaged over the trajectories. Throws
// StateError if the trajectories come from different parameter snapshots.
std::vector<double> gradient_estimate(std::span<const Trajectory> trajectories, double baseline);

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t episodes = 800;
  AdamSettings adam;
  double discount = 1.0;
  std::uint64_t seed = 0;
  // Distinguishes RNG streams of different phases that share a master seed.
  std::uint64_t stream = 0;
  std::size_t threads = 1;
  bool record_wall_time = false;
  // Index of the first epoch; training resumed mid-phase keeps its streams.
  std::size_t first_epoch = 1;

  void validate() const;
};

struct EpochReport {
  std::size_t epoch = 0;  // 1-based
  EvalReport returns;
  double baseline = 0.0;
  double gradient_norm = 0.0;
  double wall_time = 0.0;  // seconds; 0 unless record_wall_time
};

using EpochObserver = std::function<void(const EpochReport&, const PolicyParams&)>;

// K episodes with per-episode RNG streams derived from (seed, stream, epoch,
// episode). Results are ordered by episode index whatever the thread count.
std::vector<Trajectory> collect_episodes(const PolicyParams& params, const PlantModel& plant,
                                         std::size_t episodes, std::uint64_t seed,
                                         std::uint64_t stream, std::uint64_t epoch,
                                         std::size_t threads, const RolloutOptions& options);

// Runs config.epochs epochs of {rollout x K, baseline, gradient, Adam step}.
std::vector<EpochReport> train_epochs(PolicyParams& params, const PlantModel& plant,
                                      const TrainConfig& config, AdamState& adam,
                                      const EpochObserver& observer = {});

}  // namespace batchrl
