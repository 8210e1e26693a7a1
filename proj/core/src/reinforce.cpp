#include "batchrl/reinforce.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "batchrl/errors.hpp"
#include "batchrl/parallel.hpp"

namespace batchrl {

double discounted_return(std::span<const double> rewards, double discount) {
  double total = 0.0;
  double weight = 1.0;
  for (double r : rewards) {
    total += weight * r;
    weight *= discount;
  }
  return total;
}

Trajectory rollout(PolicyEvaluator& evaluator, const PolicyParams& params, const PlantModel& plant,
                   Rng& rng, const RolloutOptions& options) {
  const PolicyConfig& pc = evaluator.config();
  if (pc.state_inputs != plant.state_count() || pc.actions != plant.control_count()) {
    throw ConfigError("rollout: policy expects " + std::to_string(pc.state_inputs) + " states and " +
                      std::to_string(pc.actions) + " actions, plant '" + plant.name() + "' has " +
                      std::to_string(plant.state_count()) + " and " +
                      std::to_string(plant.control_count()));
  }
  const std::size_t T = plant.interval_count();
  const std::size_t n = plant.state_count();
  const std::size_t m = plant.control_count();
  const std::size_t depth = pc.history_depth;

  Trajectory traj;
  traj.params_version = params.version();
  traj.states.reserve(T + 1);
  traj.measurements.reserve(T + 1);
  traj.actions.reserve(T);
  traj.draws.reserve(T);
  traj.rewards.reserve(T + 1);

  traj.states.push_back(plant.sample_initial_state(rng));
  traj.measurements.push_back(plant.measure(traj.states.back(), rng));

  Observation obs = initial_observation(pc, traj.measurements.back());
  std::vector<Observation> observations;
  observations.reserve(T);

  for (std::size_t t = 0; t < T; ++t) {
    obs.time_fraction = static_cast<double>(t) / static_cast<double>(T);
    const PolicyOutput out = evaluator.forward(params, obs);

    std::vector<double> action;
    std::vector<double> draw;
    if (options.mode == ActionMode::Sample) {
      ActionSample s =
          sample_action(out.mean, out.std_dev, plant.control_lower(), plant.control_upper(), rng);
      action = std::move(s.action);
      draw = std::move(s.draw);
    } else {
      action = out.mean;
      draw = out.mean;
    }

    // No control precedes the first interval, so it carries no move penalty.
    const std::vector<double>& previous = t == 0 ? action : traj.actions.back();
    traj.rewards.push_back(plant.reward(t, traj.states.back(), action, previous));

    StepResult next;
    try {
      next = plant.step(traj.states.back(), action, t, rng);
    } catch (const IntegrationError& e) {
      throw IntegrationError(std::string(e.what()) + " (plant '" + plant.name() + "', interval " +
                                 std::to_string(t) + ")",
                             e.state());
    }

    if (options.compute_gradient) observations.push_back(obs);
    traj.actions.push_back(std::move(action));
    traj.draws.push_back(std::move(draw));
    traj.states.push_back(std::move(next.state));
    traj.measurements.push_back(std::move(next.measured));

    // Shift the history windows: newest snapshot first.
    if (depth > 1) {
      std::copy_backward(obs.state.begin(), obs.state.end() - static_cast<std::ptrdiff_t>(n),
                         obs.state.end());
      std::copy_backward(obs.previous_action.begin(),
                         obs.previous_action.end() - static_cast<std::ptrdiff_t>(m),
                         obs.previous_action.end());
    }
    std::copy(traj.measurements.back().begin(), traj.measurements.back().end(), obs.state.begin());
    std::copy(traj.actions.back().begin(), traj.actions.back().end(),
              obs.previous_action.begin());
    obs.hidden = out.hidden;
  }
  traj.rewards.push_back(plant.reward(T, traj.states.back(), traj.actions.back(),
                                      traj.actions.back()));
  traj.total_return = discounted_return(traj.rewards, options.discount);

  if (options.compute_gradient) {
    LogProb lp = evaluator.episode_log_prob(params, observations, traj.draws);
    traj.log_prob = lp.value;
    traj.log_prob_gradient = std::move(lp.gradient);
  }
  return traj;
}

double compute_baseline(std::span<const double> returns) {
  if (returns.empty()) {
    throw ConfigError("baseline of an empty set of returns");
  }
  return mean_of(returns);
}

std::vector<double> gradient_estimate(std::span<const Trajectory> trajectories, double baseline) {
  if (trajectories.empty()) {
    throw ConfigError("gradient_estimate: no trajectories");
  }
  const std::uint64_t version = trajectories.front().params_version;
  const std::size_t n = trajectories.front().log_prob_gradient.size();
  std::vector<double> grad(n, 0.0);
  for (const Trajectory& tr : trajectories) {
    if (tr.params_version != version) {
      throw StateError("gradient_estimate: trajectories come from different parameter snapshots");
    }
    if (tr.log_prob_gradient.size() != n) {
      throw StateError("gradient_estimate: trajectory without a log-probability gradient");
    }
    const double weight = tr.total_return - baseline;
    for (std::size_t i = 0; i < n; ++i) {
      grad[i] += weight * tr.log_prob_gradient[i];
    }
  }
  const double inv_k = 1.0 / static_cast<double>(trajectories.size());
  for (double& g : grad) g *= inv_k;
  return grad;
}

void TrainConfig::validate() const {
  if (episodes < 2) {
    throw ConfigError("training needs at least 2 episodes per epoch for the baseline");
  }
  if (!(adam.learning_rate > 0.0)) {
    throw ConfigError("learning rate must be positive");
  }
  if (!(discount > 0.0 && discount <= 1.0)) {
    throw ConfigError("discount factor must lie in (0, 1]");
  }
  if (first_epoch < 1) {
    throw ConfigError("epochs are numbered from 1");
  }
}

std::vector<Trajectory> collect_episodes(const PolicyParams& params, const PlantModel& plant,
                                         std::size_t episodes, std::uint64_t seed,
                                         std::uint64_t stream, std::uint64_t epoch,
                                         std::size_t threads, const RolloutOptions& options) {
  std::vector<Trajectory> out(episodes);
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads, episodes));
  std::vector<PolicyEvaluator> evaluators;
  evaluators.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) evaluators.emplace_back(params.config());
  parallel_for(episodes, workers, [&](std::size_t k, std::size_t w) {
    Rng rng = make_rng(seed, {stream, epoch, k});
    out[k] = rollout(evaluators[w], params, plant, rng, options);
  });
  return out;
}

std::vector<EpochReport> train_epochs(PolicyParams& params, const PlantModel& plant,
                                      const TrainConfig& config, AdamState& adam,
                                      const EpochObserver& observer) {
  config.validate();
  std::vector<EpochReport> reports;
  reports.reserve(config.epochs);
  RolloutOptions options;
  options.mode = ActionMode::Sample;
  options.discount = config.discount;
  options.compute_gradient = true;

  const std::size_t last = config.first_epoch + config.epochs;
  for (std::size_t epoch = config.first_epoch; epoch < last; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto trajectories = collect_episodes(params, plant, config.episodes, config.seed,
                                               config.stream, epoch, config.threads, options);
    std::vector<double> returns;
    returns.reserve(trajectories.size());
    for (const auto& tr : trajectories) returns.push_back(tr.total_return);

    EpochReport report;
    report.epoch = epoch;
    report.returns = summarize(returns);
    report.baseline = compute_baseline(returns);
    const auto grad = gradient_estimate(trajectories, report.baseline);
    double sq = 0.0;
    for (double g : grad) sq += g * g;
    report.gradient_norm = std::sqrt(sq);

    adam_ascent(params, grad, adam, config.adam);

    if (config.record_wall_time) {
      report.wall_time =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
    reports.push_back(report);
    if (observer) observer(report, params);
  }
  return reports;
}

}  // namespace batchrl
