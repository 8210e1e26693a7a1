#include "batchrl/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "batchrl/errors.hpp"

namespace batchrl {

using ad::Graph;
using ad::NodeId;

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "leaky-relu" || name == "leaky_relu") return Activation::LeakyRelu;
  throw ConfigError("unknown activation '" + std::string(name) + "' (expected tanh or leaky-relu)");
}

std::string_view to_string(Activation activation) {
  return activation == Activation::Tanh ? "tanh" : "leaky-relu";
}

void PolicyConfig::validate() const {
  if (state_inputs == 0 || actions == 0) {
    throw ConfigError("policy needs at least one state input and one action");
  }
  if (hidden_layers < 1 || neurons < 1) {
    throw ConfigError("policy needs hidden_layers >= 1 and neurons >= 1");
  }
  if (history_depth < 1) {
    throw ConfigError("policy history depth must be at least 1");
  }
  if (lower.size() != actions || upper.size() != actions) {
    throw ConfigError("policy action bounds must have one entry per action");
  }
  for (std::size_t i = 0; i < actions; ++i) {
    if (!(lower[i] < upper[i])) {
      throw ConfigError("policy action bounds: lower must be below upper for action " +
                        std::to_string(i));
    }
  }
  if (state_scale.size() != state_inputs) {
    throw ConfigError("policy state_scale must have one entry per state input");
  }
  for (double s : state_scale) {
    if (!(s > 0.0)) throw ConfigError("policy state_scale entries must be positive");
  }
  if (std_scale.size() != actions) {
    throw ConfigError("policy std_scale must have one entry per action");
  }
  for (double s : std_scale) {
    if (!(s > 0.0)) throw ConfigError("policy std_scale entries must be positive");
  }
}

LayerBlock PolicyConfig::block(std::size_t subnet, std::size_t layer) const {
  auto shape = [this](std::size_t l) {
    const std::size_t rows = l == hidden_layers ? 2 * subnet_actions() : neurons;
    const std::size_t cols = l == 0 ? feature_count() + neurons : neurons;
    return std::pair{rows, cols};
  };
  std::size_t per_subnet = 0;
  for (std::size_t l = 0; l < layer_count(); ++l) {
    auto [r, c] = shape(l);
    per_subnet += r * c + r;
  }
  std::size_t offset = subnet * per_subnet;
  for (std::size_t l = 0; l < layer; ++l) {
    auto [r, c] = shape(l);
    offset += r * c + r;
  }
  auto [rows, cols] = shape(layer);
  return {offset, rows, cols};
}

std::size_t PolicyConfig::parameter_count() const {
  const LayerBlock last = block(subnet_count() - 1, hidden_layers);
  return last.offset + last.size();
}

std::size_t PolicyConfig::layer_of(std::size_t parameter) const {
  for (std::size_t s = 0; s < subnet_count(); ++s) {
    for (std::size_t l = 0; l < layer_count(); ++l) {
      const LayerBlock b = block(s, l);
      if (parameter >= b.offset && parameter < b.offset + b.size()) {
        return l;
      }
    }
  }
  throw ConfigError("parameter index " + std::to_string(parameter) + " out of range");
}

PolicyParams::PolicyParams(PolicyConfig config) : config_(std::move(config)) {
  config_.validate();
  values_.assign(config_.parameter_count(), 0.0);
  frozen_.assign(values_.size(), 0);
}

PolicyParams PolicyParams::initialize(PolicyConfig config, std::uint64_t seed) {
  PolicyParams params(std::move(config));
  Rng rng(seed);
  const PolicyConfig& c = params.config();
  for (std::size_t s = 0; s < c.subnet_count(); ++s) {
    for (std::size_t l = 0; l < c.layer_count(); ++l) {
      const LayerBlock b = c.block(s, l);
      const double bound = 1.0 / std::sqrt(static_cast<double>(b.cols));
      std::uniform_real_distribution<double> dist(-bound, bound);
      for (std::size_t i = 0; i < b.size(); ++i) {
        params.values_[b.offset + i] = dist(rng);
      }
    }
  }
  return params;
}

std::size_t PolicyParams::frozen_count() const {
  return static_cast<std::size_t>(std::count(frozen_.begin(), frozen_.end(), std::uint8_t{1}));
}

std::vector<std::size_t> PolicyParams::frozen_layers() const {
  std::vector<std::size_t> layers;
  for (std::size_t l = 0; l < config_.layer_count(); ++l) {
    bool all = true;
    for (std::size_t s = 0; s < config_.subnet_count() && all; ++s) {
      const LayerBlock b = config_.block(s, l);
      for (std::size_t i = b.offset; i < b.offset + b.size(); ++i) {
        if (!frozen_[i]) {
          all = false;
          break;
        }
      }
    }
    if (all) layers.push_back(l);
  }
  return layers;
}

PolicyParams apply_freeze(PolicyParams params, std::span<const std::size_t> trainable_layers) {
  const PolicyConfig& c = params.config();
  if (trainable_layers.empty()) {
    throw ConfigError("transfer learning needs at least one trainable layer");
  }
  for (std::size_t l : trainable_layers) {
    if (l >= c.layer_count()) {
      throw ConfigError("trainable layer " + std::to_string(l) + " out of range (network has " +
                        std::to_string(c.layer_count()) + " layers)");
    }
  }
  for (std::size_t s = 0; s < c.subnet_count(); ++s) {
    for (std::size_t l = 0; l < c.layer_count(); ++l) {
      const bool train =
          std::find(trainable_layers.begin(), trainable_layers.end(), l) != trainable_layers.end();
      const LayerBlock b = c.block(s, l);
      for (std::size_t i = b.offset; i < b.offset + b.size(); ++i) {
        params.set_frozen(i, !train);
      }
    }
  }
  return params;
}

ActionSample sample_action(std::span<const double> mean, std::span<const double> std_dev,
                           std::span<const double> lower, std::span<const double> upper, Rng& rng) {
  if (mean.size() != std_dev.size() || mean.size() != lower.size() ||
      mean.size() != upper.size()) {
    throw ConfigError("sample_action: size mismatch");
  }
  ActionSample out;
  out.action.resize(mean.size());
  out.draw.resize(mean.size());
  for (std::size_t i = 0; i < mean.size(); ++i) {
    const double z = standard_normal(rng);
    out.draw[i] = mean[i] + std_dev[i] * z;
    out.action[i] = std::clamp(out.draw[i], lower[i], upper[i]);
  }
  return out;
}

namespace {

struct StepNodes {
  std::vector<NodeId> mean;
  std::vector<NodeId> std_dev;
  std::vector<NodeId> hidden;
};

NodeId activate(Graph& g, Activation a, NodeId x) {
  return a == Activation::Tanh ? g.tanh(x) : g.leaky_relu(x);
}

NodeId dense_row(Graph& g, std::span<const NodeId> params, const LayerBlock& b, std::size_t row,
                 std::span<const NodeId> inputs) {
  std::vector<NodeId> weights(b.cols);
  for (std::size_t c = 0; c < b.cols; ++c) {
    weights[c] = params[b.weight(row, c)];
  }
  return g.affine(params[b.bias(row)], weights, inputs);
}

StepNodes build_step(Graph& g, const PolicyConfig& c, std::span<const NodeId> params,
                     std::span<const NodeId> features, std::span<const NodeId> hidden_prev) {
  StepNodes out;
  out.mean.resize(c.actions);
  out.std_dev.resize(c.actions);
  out.hidden.reserve(c.hidden_size());

  for (std::size_t s = 0; s < c.subnet_count(); ++s) {
    std::vector<NodeId> inputs(features.begin(), features.end());
    inputs.insert(inputs.end(), hidden_prev.begin() + static_cast<std::ptrdiff_t>(s * c.neurons),
                  hidden_prev.begin() + static_cast<std::ptrdiff_t>((s + 1) * c.neurons));

    std::vector<NodeId> h;
    const LayerBlock first = c.block(s, 0);
    for (std::size_t r = 0; r < first.rows; ++r) {
      h.push_back(activate(g, c.activation, dense_row(g, params, first, r, inputs)));
    }
    out.hidden.insert(out.hidden.end(), h.begin(), h.end());

    for (std::size_t l = 1; l < c.hidden_layers; ++l) {
      const LayerBlock b = c.block(s, l);
      std::vector<NodeId> next;
      for (std::size_t r = 0; r < b.rows; ++r) {
        next.push_back(activate(g, c.activation, dense_row(g, params, b, r, h)));
      }
      h = std::move(next);
    }

    const LayerBlock head = c.block(s, c.hidden_layers);
    const std::size_t sa = c.subnet_actions();
    for (std::size_t a = 0; a < sa; ++a) {
      const std::size_t action = s * sa + a;
      const double range = c.upper[action] - c.lower[action];
      const NodeId raw_mean = dense_row(g, params, head, a, h);
      out.mean[action] = g.add_const(g.mul_const(g.sigmoid(raw_mean), range), c.lower[action]);
      const NodeId raw_std = dense_row(g, params, head, sa + a, h);
      out.std_dev[action] =
          g.add_const(g.mul_const(g.softplus(raw_std), c.std_scale[action]), kStdFloor);
    }
  }
  return out;
}

std::vector<NodeId> declare_parameters(Graph& g, std::size_t count) {
  std::vector<NodeId> ids(count);
  for (auto& id : ids) id = g.parameter();
  return ids;
}

std::vector<NodeId> declare_inputs(Graph& g, std::size_t count) {
  std::vector<NodeId> ids(count);
  for (auto& id : ids) id = g.input();
  return ids;
}

void mask_frozen(const PolicyParams& params, std::vector<double>& gradient) {
  for (std::size_t i = 0; i < gradient.size(); ++i) {
    if (params.is_frozen(i)) gradient[i] = 0.0;
  }
}

}  // namespace

// Inputs: features, hidden, draw. Outputs: mean, std, hidden, log-density.
struct PolicyEvaluator::StepGraph {
  Graph graph;
  std::size_t log_prob_output = 0;
};

// Inputs per step: features then draw. Single output: summed log-density.
struct PolicyEvaluator::EpisodeGraph {
  Graph graph;
  std::size_t steps = 0;
};

PolicyEvaluator::PolicyEvaluator(PolicyConfig config) : config_(std::move(config)) {
  config_.validate();
  step_ = std::make_unique<StepGraph>();
  Graph& g = step_->graph;
  const auto params = declare_parameters(g, config_.parameter_count());
  const auto features = declare_inputs(g, config_.feature_count());
  const auto hidden = declare_inputs(g, config_.hidden_size());
  const auto draw = declare_inputs(g, config_.actions);
  const StepNodes nodes = build_step(g, config_, params, features, hidden);
  for (NodeId id : nodes.mean) g.add_output(id);
  for (NodeId id : nodes.std_dev) g.add_output(id);
  for (NodeId id : nodes.hidden) g.add_output(id);
  step_->log_prob_output =
      g.add_output(ad::gaussian_log_density(g, draw, nodes.mean, nodes.std_dev));
}

PolicyEvaluator::~PolicyEvaluator() = default;
PolicyEvaluator::PolicyEvaluator(PolicyEvaluator&&) noexcept = default;
PolicyEvaluator& PolicyEvaluator::operator=(PolicyEvaluator&&) noexcept = default;

std::vector<double> PolicyEvaluator::features(const Observation& obs) const {
  const PolicyConfig& c = config_;
  std::vector<double> f;
  f.reserve(c.feature_count());
  for (std::size_t k = 0; k < c.history_depth; ++k) {
    for (std::size_t i = 0; i < c.state_inputs; ++i) {
      f.push_back(obs.state[k * c.state_inputs + i] / c.state_scale[i]);
    }
  }
  for (std::size_t k = 0; k < c.history_depth; ++k) {
    for (std::size_t i = 0; i < c.actions; ++i) {
      f.push_back((obs.previous_action[k * c.actions + i] - c.lower[i]) /
                  (c.upper[i] - c.lower[i]));
    }
  }
  f.push_back(obs.time_fraction);
  return f;
}

void PolicyEvaluator::check(const PolicyParams& params, const Observation& obs) const {
  const PolicyConfig& c = config_;
  if (params.size() != c.parameter_count()) {
    throw ConfigError("policy parameters do not match the evaluator's configuration");
  }
  if (obs.state.size() != c.history_depth * c.state_inputs) {
    throw ConfigError("observation state has " + std::to_string(obs.state.size()) +
                      " entries, expected " + std::to_string(c.history_depth * c.state_inputs));
  }
  if (obs.previous_action.size() != c.history_depth * c.actions) {
    throw ConfigError("observation previous_action has " +
                      std::to_string(obs.previous_action.size()) + " entries, expected " +
                      std::to_string(c.history_depth * c.actions));
  }
  if (!obs.hidden.empty() && obs.hidden.size() != c.hidden_size()) {
    throw ConfigError("observation hidden state has " + std::to_string(obs.hidden.size()) +
                      " entries, expected " + std::to_string(c.hidden_size()));
  }
}

PolicyOutput PolicyEvaluator::forward(const PolicyParams& params, const Observation& obs) {
  check(params, obs);
  const PolicyConfig& c = config_;
  std::vector<double> inputs = features(obs);
  if (obs.hidden.empty()) {
    inputs.resize(inputs.size() + c.hidden_size(), 0.0);
  } else {
    inputs.insert(inputs.end(), obs.hidden.begin(), obs.hidden.end());
  }
  inputs.resize(inputs.size() + c.actions, 0.0);
  const auto out = step_->graph.forward(inputs, params.values());

  PolicyOutput result;
  const auto a = static_cast<std::ptrdiff_t>(c.actions);
  const auto h = static_cast<std::ptrdiff_t>(c.hidden_size());
  result.mean.assign(out.begin(), out.begin() + a);
  result.std_dev.assign(out.begin() + a, out.begin() + 2 * a);
  result.hidden.assign(out.begin() + 2 * a, out.begin() + 2 * a + h);
  return result;
}

LogProb PolicyEvaluator::log_prob(const PolicyParams& params, const Observation& obs,
                                  std::span<const double> draw) {
  if (draw.empty()) {
    throw StateError("log_prob: no recorded action draw");
  }
  check(params, obs);
  if (draw.size() != config_.actions) {
    throw ConfigError("log_prob: draw has wrong size");
  }
  std::vector<double> inputs = features(obs);
  if (obs.hidden.empty()) {
    inputs.resize(inputs.size() + config_.hidden_size(), 0.0);
  } else {
    inputs.insert(inputs.end(), obs.hidden.begin(), obs.hidden.end());
  }
  inputs.insert(inputs.end(), draw.begin(), draw.end());
  const auto out = step_->graph.forward(inputs, params.values());

  LogProb lp;
  lp.value = out[step_->log_prob_output];
  lp.gradient = step_->graph.backward(step_->log_prob_output);
  mask_frozen(params, lp.gradient);
  return lp;
}

PolicyEvaluator::EpisodeGraph& PolicyEvaluator::episode_graph(std::size_t steps) {
  for (auto& e : episodes_) {
    if (e->steps == steps) return *e;
  }
  auto e = std::make_unique<EpisodeGraph>();
  e->steps = steps;
  Graph& g = e->graph;
  const PolicyConfig& c = config_;
  const auto params = declare_parameters(g, c.parameter_count());
  std::vector<NodeId> hidden(c.hidden_size(), g.constant(0.0));
  std::vector<NodeId> terms;
  terms.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    const auto features = declare_inputs(g, c.feature_count());
    const auto draw = declare_inputs(g, c.actions);
    StepNodes nodes = build_step(g, c, params, features, hidden);
    terms.push_back(ad::gaussian_log_density(g, draw, nodes.mean, nodes.std_dev));
    hidden = std::move(nodes.hidden);
  }
  g.add_output(g.sum(terms));
  episodes_.push_back(std::move(e));
  return *episodes_.back();
}

LogProb PolicyEvaluator::episode_log_prob(const PolicyParams& params,
                                          std::span<const Observation> steps,
                                          std::span<const std::vector<double>> draws) {
  if (steps.size() != draws.size()) {
    throw ConfigError("episode_log_prob: one draw per step required");
  }
  std::vector<double> inputs;
  inputs.reserve(steps.size() * (config_.feature_count() + config_.actions));
  for (std::size_t t = 0; t < steps.size(); ++t) {
    check(params, steps[t]);
    if (draws[t].empty()) {
      throw StateError("episode_log_prob: step " + std::to_string(t) + " has no recorded draw");
    }
    if (draws[t].size() != config_.actions) {
      throw ConfigError("episode_log_prob: draw has wrong size");
    }
    const auto f = features(steps[t]);
    inputs.insert(inputs.end(), f.begin(), f.end());
    inputs.insert(inputs.end(), draws[t].begin(), draws[t].end());
  }
  EpisodeGraph& e = episode_graph(steps.size());
  const auto out = e.graph.forward(inputs, params.values());
  LogProb lp;
  lp.value = out[0];
  lp.gradient = e.graph.backward(0);
  mask_frozen(params, lp.gradient);
  return lp;
}

PolicyOutput policy_forward(const PolicyParams& params, const Observation& obs) {
  PolicyEvaluator evaluator(params.config());
  return evaluator.forward(params, obs);
}

LogProb log_prob(const PolicyParams& params, const Observation& obs, std::span<const double> draw) {
  PolicyEvaluator evaluator(params.config());
  return evaluator.log_prob(params, obs, draw);
}

Observation initial_observation(const PolicyConfig& config, std::span<const double> state) {
  Observation obs;
  for (std::size_t k = 0; k < config.history_depth; ++k) {
    obs.state.insert(obs.state.end(), state.begin(), state.end());
    obs.previous_action.insert(obs.previous_action.end(), config.lower.begin(),
                               config.lower.end());
  }
  obs.hidden.assign(config.hidden_size(), 0.0);
  obs.time_fraction = 0.0;
  return obs;
}

}  // namespace batchrl
