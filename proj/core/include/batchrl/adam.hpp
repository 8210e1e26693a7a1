#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "batchrl/policy.hpp"

namespace batchrl {

struct AdamSettings {
  double learning_rate = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  AdamState() = default;
  explicit AdamState(std::size_t n) : first_moment(n, 0.0), second_moment(n, 0.0) {}

  std::vector<double> first_moment;
  std::vector<double> second_moment;
  std::uint64_t step = 0;
};

// One bias-corrected Adam step in the ascent direction. Frozen parameters and
// their moments are left untouched.
void adam_ascent(PolicyParams& params, std::span<const double> gradient, AdamState& state,
                 const AdamSettings& settings);

}  // namespace batchrl
