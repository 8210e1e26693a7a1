#include "batchrl/adam.hpp"

#include <cmath>

#include "batchrl/errors.hpp"

namespace batchrl {

void adam_ascent(PolicyParams& params, std::span<const double> gradient, AdamState& state,
                 const AdamSettings& settings) {
  const std::size_t n = params.size();
  if (gradient.size() != n) {
    throw ConfigError("adam_ascent: gradient size does not match parameters");
  }
  if (state.first_moment.empty() && state.second_moment.empty() && state.step == 0) {
    state = AdamState(n);
  }
  if (state.first_moment.size() != n || state.second_moment.size() != n) {
    throw ConfigError("adam_ascent: optimizer state size does not match parameters");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(settings.beta1, t);
  const double correction2 = 1.0 - std::pow(settings.beta2, t);
  const double step_size = settings.learning_rate / correction1;
  const double sqrt_correction2 = std::sqrt(correction2);

  auto values = params.values();
  for (std::size_t i = 0; i < n; ++i) {
    if (params.is_frozen(i)) continue;
    const double g = gradient[i];
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = settings.beta1 * m + (1.0 - settings.beta1) * g;
    v = settings.beta2 * v + (1.0 - settings.beta2) * g * g;
    const double denom = std::sqrt(v) / sqrt_correction2 + settings.epsilon;
    values[i] += step_size * m / denom;
  }
  params.bump_version();
}

}  // namespace batchrl
