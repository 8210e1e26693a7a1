#pragma once

// Recurrent Gaussian policy.
//
// Each sub-network maps a feature vector (normalized recent states, previous
// actions scaled to [0, 1], and t/T) to the mean and standard deviation of a
// diagonal Gaussian over its actions. The first hidden layer is recurrent: it
// also sees its own activations from the previous step. With split networks
// every action gets its own sub-network; otherwise one network emits all
// actions.
//
// Heads:
//   mean = lower + (upper - lower) * sigmoid(raw_mean)
//   std  = std_scale * softplus(raw_std) + 1e-6

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string_view>
#include <vector>

#include "batchrl/autodiff.hpp"
#include "batchrl/random.hpp"

namespace batchrl {

inline constexpr double kStdFloor = 1e-6;

enum class Activation { Tanh, LeakyRelu };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation activation);

struct LayerBlock {
  std::size_t offset = 0;  // weights (rows x cols, row-major) followed by rows biases
  std::size_t rows = 0;
  std::size_t cols = 0;

  std::size_t size() const { return rows * cols + rows; }
  std::size_t weight(std::size_t r, std::size_t c) const { return offset + r * cols + c; }
  std::size_t bias(std::size_t r) const { return offset + rows * cols + r; }
};

struct PolicyConfig {
  std::size_t state_inputs = 2;
  std::size_t actions = 2;
  std::size_t hidden_layers = 2;
  std::size_t neurons = 20;
  Activation activation = Activation::Tanh;
  std::vector<double> lower{0.0, 0.0};
  std::vector<double> upper{5.0, 5.0};
  bool split_networks = true;
  std::size_t history_depth = 1;
  // Divisors applied to raw states before they enter the network.
  std::vector<double> state_scale{1.0, 1.0};
  // Multipliers on the softplus standard-deviation head, in action units.
  std::vector<double> std_scale{1.0, 1.0};

  // Throws ConfigError when the configuration is inconsistent.
  void validate() const;

  std::size_t subnet_count() const { return split_networks ? actions : 1; }
  std::size_t subnet_actions() const { return split_networks ? 1 : actions; }
  std::size_t feature_count() const { return history_depth * (state_inputs + actions) + 1; }
  std::size_t hidden_size() const { return subnet_count() * neurons; }
  std::size_t layer_count() const { return hidden_layers + 1; }
  std::size_t parameter_count() const;

  // Parameter block of one layer of one sub-network. Layer hidden_layers is
  // the output layer.
  LayerBlock block(std::size_t subnet, std::size_t layer) const;
  // Index of the layer a flat parameter index belongs to.
  std::size_t layer_of(std::size_t parameter) const;

  bool operator==(const PolicyConfig&) const = default;
};

class PolicyParams {
 public:
  PolicyParams() = default;
  // All-zero parameters, nothing frozen.
  explicit PolicyParams(PolicyConfig config);

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)] per layer.
  static PolicyParams initialize(PolicyConfig config, std::uint64_t seed);

  const PolicyConfig& config() const { return config_; }
  std::size_t size() const { return values_.size(); }
  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const std::uint8_t> frozen() const { return frozen_; }
  bool is_frozen(std::size_t i) const { return frozen_[i] != 0; }
  void set_frozen(std::size_t i, bool frozen) { frozen_[i] = frozen ? 1 : 0; }
  std::size_t frozen_count() const;

  // Layers whose every entry is frozen.
  std::vector<std::size_t> frozen_layers() const;

  // Incremented on every optimizer update; trajectories record it.
  std::uint64_t version() const { return version_; }
  void bump_version() { ++version_; }

  bool operator==(const PolicyParams& other) const {
    return config_ == other.config_ && values_ == other.values_ && frozen_ == other.frozen_;
  }

 private:
  PolicyConfig config_;
  std::vector<double> values_;
  std::vector<std::uint8_t> frozen_;
  std::uint64_t version_ = 0;
};

// Freezes every layer except `trainable_layers`. Throws ConfigError when the
// set is empty or an index is out of range.
PolicyParams apply_freeze(PolicyParams params, std::span<const std::size_t> trainable_layers);

// Network inputs for one decision. `state` holds history_depth snapshots
// (most recent first), `previous_action` the matching previous controls.
struct Observation {
  std::vector<double> state;
  std::vector<double> previous_action;
  std::vector<double> hidden;
  double time_fraction = 0.0;
};

struct PolicyOutput {
  std::vector<double> mean;
  std::vector<double> std_dev;
  std::vector<double> hidden;
};

struct LogProb {
  double value = 0.0;
  std::vector<double> gradient;  // zero at frozen slots
};

struct ActionSample {
  std::vector<double> action;  // clipped to bounds
  std::vector<double> draw;    // pre-clip Gaussian draw
};

// mean + std * z with z ~ N(0, I), then clipped to [lower, upper].
ActionSample sample_action(std::span<const double> mean, std::span<const double> std_dev,
                           std::span<const double> lower, std::span<const double> upper, Rng& rng);

// Per-thread evaluation workspace. Graphs are recorded lazily and reused;
// an instance must not be shared between threads.
class PolicyEvaluator {
 public:
  explicit PolicyEvaluator(PolicyConfig config);
  ~PolicyEvaluator();
  PolicyEvaluator(PolicyEvaluator&&) noexcept;
  PolicyEvaluator& operator=(PolicyEvaluator&&) noexcept;

  const PolicyConfig& config() const { return config_; }

  PolicyOutput forward(const PolicyParams& params, const Observation& obs);

  LogProb log_prob(const PolicyParams& params, const Observation& obs,
                   std::span<const double> draw);

  // Sum over an episode of log pi(draw_t | obs_t). Hidden states are
  // propagated inside the graph from zero, so gradients flow back through
  // time; the hidden fields of `steps` are ignored.
  LogProb episode_log_prob(const PolicyParams& params, std::span<const Observation> steps,
                           std::span<const std::vector<double>> draws);

  // Network feature vector for an observation.
  std::vector<double> features(const Observation& obs) const;

 private:
  struct StepGraph;
  struct EpisodeGraph;

  void check(const PolicyParams& params, const Observation& obs) const;
  EpisodeGraph& episode_graph(std::size_t steps);

  PolicyConfig config_;
  std::unique_ptr<StepGraph> step_;
  std::vector<std::unique_ptr<EpisodeGraph>> episodes_;
};

// Convenience wrappers that build a throwaway evaluator.
PolicyOutput policy_forward(const PolicyParams& params, const Observation& obs);
LogProb log_prob(const PolicyParams& params, const Observation& obs, std::span<const double> draw);

// Zero hidden state of the right size for `config`.
Observation initial_observation(const PolicyConfig& config, std::span<const double> state);

}  // namespace batchrl
