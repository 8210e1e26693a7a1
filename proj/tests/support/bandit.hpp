#pragma once

// One-step Gaussian bandit with reward r(u) = -u^2. For a policy with mean
// mu and standard deviation sigma (and bounds far enough away that clipping
// never bites) the expected return is -(mu^2 + sigma^2).

#include <array>
#include <vector>

#include "batchrl/plants.hpp"
#include "batchrl/policy.hpp"
#include "oracles.hpp"

namespace bandit {

class Plant : public batchrl::PlantModel {
 public:
  std::string name() const override { return "bandit"; }
  std::size_t state_count() const override { return 1; }
  std::size_t control_count() const override { return 1; }
  std::size_t interval_count() const override { return 1; }
  double horizon() const override { return 1.0; }
  std::span<const double> control_lower() const override { return lower_; }
  std::span<const double> control_upper() const override { return upper_; }
  std::vector<double> state_scale() const override { return {1.0}; }
  bool deterministic() const override { return true; }
  std::vector<double> sample_initial_state(batchrl::Rng&) const override { return {1.0}; }
  batchrl::StepResult step(std::span<const double> state, std::span<const double>, std::size_t,
                           batchrl::Rng&) const override {
    return {{state.begin(), state.end()}, {state.begin(), state.end()}};
  }
  double reward(std::size_t interval, std::span<const double>, std::span<const double> action,
                std::span<const double>) const override {
    return interval == 1 ? -action[0] * action[0] : 0.0;
  }

 private:
  std::array<double, 1> lower_{-10.0};
  std::array<double, 1> upper_{10.0};
};

inline batchrl::PolicyConfig policy_config() {
  batchrl::PolicyConfig c;
  c.state_inputs = 1;
  c.actions = 1;
  c.hidden_layers = 1;
  c.neurons = 4;
  c.lower = {-10.0};
  c.upper = {10.0};
  c.state_scale = {1.0};
  c.std_scale = {1.0};
  return c;
}

// Small weights keep mu within a few units of 0 and sigma near 0.7, so the
// bounds at +-10 sit more than 8 sigma away.
inline batchrl::PolicyParams policy(std::uint64_t seed) {
  batchrl::PolicyParams p = batchrl::PolicyParams::initialize(policy_config(), seed);
  for (double& v : p.values()) v *= 0.5;
  return p;
}

// Features seen at the single decision (state 1, previous action at the
// lower bound, t = 0).
inline std::vector<double> features() { return {1.0, 0.0, 0.0}; }

inline double expected_return(const batchrl::PolicyParams& p) {
  const auto f = oracle::policy_forward(p, features(), {});
  return -(f.mean[0] * f.mean[0] + f.std_dev[0] * f.std_dev[0]);
}

// Closed form -(mu^2 + sigma^2) differentiated by central differences in
// the parameters.
inline std::vector<double> true_gradient(const batchrl::PolicyParams& p) {
  std::vector<double> theta(p.values().begin(), p.values().end());
  return oracle::central_difference(
      [&](const std::vector<double>& t) {
        batchrl::PolicyParams q = p;
        std::copy(t.begin(), t.end(), q.values().begin());
        return expected_return(q);
      },
      theta, 1e-5);
}

}  // namespace bandit
