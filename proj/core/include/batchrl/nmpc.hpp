#pragma once

// Shrinking-horizon nominal NMPC for the smooth case studies. Each solve is a
// direct single-shooting problem over piecewise-constant controls, solved by
// projected gradient ascent with Armijo backtracking and random multistarts.
// Gradients come from the tape through the RK4 rollout.

#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <vector>

#include "batchrl/plants.hpp"
#include "batchrl/random.hpp"
#include "batchrl/reinforce.hpp"

namespace batchrl {

struct NlpSettings {
  std::size_t multistarts = 8;
  std::size_t max_iterations = 300;
  // Stop when the projected-gradient step norm (infinity norm) falls below this.
  double gradient_tolerance = 1e-9;
  double armijo = 1e-4;
  double backtrack = 0.5;
  std::size_t max_backtracks = 40;

  void validate() const;
  bool operator==(const NlpSettings&) const = default;
};

struct OcpProblem {
  const OdeModel* model = nullptr;
  std::size_t start_interval = 0;
  std::vector<double> state;
  // Per-decision bounds, (T - start) * m entries each. Empty means the
  // model's control bounds.
  std::vector<double> lower;
  std::vector<double> upper;
  // Optional extra starting point tried before the random starts.
  std::vector<double> warm_start;

  std::size_t horizon() const;
  std::size_t decision_count() const;
};

struct OcpSolution {
  std::vector<double> controls;  // (T - start) x m, interval-major
  double objective = 0.0;
  // Set when every start failed its line search before making progress.
  bool degraded = false;
  std::size_t iterations = 0;
  // Objective reached from each start, warm start first when given.
  std::vector<double> start_objectives;
};

// Differentiable rollout objective of one model for one horizon length.
class OcpObjective {
 public:
  OcpObjective(const OdeModel& model, std::size_t horizon);
  ~OcpObjective();
  OcpObjective(OcpObjective&&) noexcept;
  OcpObjective& operator=(OcpObjective&&) noexcept;

  std::size_t horizon() const { return horizon_; }

  double value(std::span<const double> state, std::span<const double> controls);
  double value_and_gradient(std::span<const double> state, std::span<const double> controls,
                            std::vector<double>& gradient);

 private:
  struct Impl;
  std::size_t horizon_;
  std::unique_ptr<Impl> impl_;
};

// Caches one objective graph per horizon length; not thread-safe.
class OcpSolver {
 public:
  explicit OcpSolver(const OdeModel& model) : model_(model) {}

  OcpSolution solve(const OcpProblem& problem, const NlpSettings& settings, Rng& rng);

 private:
  OcpObjective& objective(std::size_t horizon);

  const OdeModel& model_;
  std::map<std::size_t, std::unique_ptr<OcpObjective>> objectives_;
};

OcpSolution solve_ocp(const OcpProblem& problem, const NlpSettings& settings, Rng& rng);

// One closed-loop episode on `plant`: at every interval the remaining
// controls are re-optimized on `model` from the measured state, warm-started
// from the previous solution's tail, and the first control is applied.
Trajectory nmpc_rollout(const PlantModel& plant, const OdeModel& model,
                        const NlpSettings& settings, Rng& rng);

// Monte-Carlo episodes with per-episode streams derived from (seed, episode).
std::vector<Trajectory> nmpc_episodes(const PlantModel& plant, const OdeModel& model,
                                      const NlpSettings& settings, std::size_t episodes,
                                      std::uint64_t seed, std::size_t threads);

}  // namespace batchrl
