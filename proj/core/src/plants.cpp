#include "batchrl/plants.hpp"

#include <algorithm>
#include <cmath>

#include "batchrl/errors.hpp"
#include "batchrl/integrators.hpp"

namespace batchrl {

std::vector<double> PlantModel::measure(std::span<const double> state, Rng& /*rng*/) const {
  return {state.begin(), state.end()};
}

OdeModel::OdeModel(IntegrationSettings settings) : settings_(settings) {
  if (settings_.intervals == 0) {
    throw ConfigError("plant needs at least one control interval");
  }
  if (settings_.substeps < 1) {
    throw ConfigError("plant needs at least one integration substep");
  }
}

std::vector<double> OdeModel::integrate(std::span<const double> x, std::span<const double> u) const {
  return rk4_step<double>(
      [this](std::span<const double> s, std::span<const double> a, std::span<double> d) {
        rhs(s, a, d);
      },
      std::vector<double>(x.begin(), x.end()), u, interval_length(), settings_.substeps);
}

double cs1_reward(std::size_t interval, std::size_t intervals, std::span<const double> state) {
  return interval >= intervals ? state[1] : 0.0;
}

Cs1Model::Cs1Model(Dynamics dynamics, IntegrationSettings settings, double disturbance_std)
    : OdeModel(settings), dynamics_(dynamics), disturbance_std_(disturbance_std) {
  if (disturbance_std_ < 0.0) {
    throw ConfigError("disturbance standard deviation must be nonnegative");
  }
}

std::string Cs1Model::name() const {
  return dynamics_ == Dynamics::Plant ? "cs1" : "cs1-approx";
}

std::vector<double> Cs1Model::sample_initial_state(Rng& /*rng*/) const {
  return nominal_initial_state();
}

StepResult Cs1Model::step(std::span<const double> state, std::span<const double> action,
                          std::size_t /*interval*/, Rng& rng) const {
  auto next = integrate(state, action);
  if (disturbance_std_ > 0.0) {
    for (double& y : next) {
      y += disturbance_std_ * standard_normal(rng);
    }
  }
  auto measured = next;
  return {std::move(next), std::move(measured)};
}

double Cs1Model::reward(std::size_t interval, std::span<const double> state,
                        std::span<const double> /*action*/,
                        std::span<const double> /*previous_action*/) const {
  return cs1_reward(interval, interval_count(), state);
}

void Cs1Model::rhs(std::span<const double> x, std::span<const double> u,
                   std::span<double> dx) const {
  if (dynamics_ == Dynamics::Plant) {
    cs1_plant_rhs<double>(x, u, dx);
  } else {
    cs1_approx_rhs<double>(x, u, dx);
  }
}

void Cs1Model::rhs(std::span<const ad::Var> x, std::span<const ad::Var> u,
                   std::span<ad::Var> dx) const {
  if (dynamics_ == Dynamics::Plant) {
    cs1_plant_rhs<ad::Var>(x, u, dx);
  } else {
    cs1_approx_rhs<ad::Var>(x, u, dx);
  }
}

Cs2Plant::Cs2Plant(IntegrationSettings settings, double diffusion_scale)
    : settings_(settings), diffusion_scale_(diffusion_scale) {
  if (settings_.intervals == 0 || settings_.substeps < 1) {
    throw ConfigError("cs2: intervals and substeps must be positive");
  }
}

std::vector<double> Cs2Plant::sample_initial_state(Rng& /*rng*/) const { return {1.0, 0.0}; }

void Cs2Plant::diffusion(std::span<const double> x, std::span<double> g) const {
  g[0] = 0.0;
  g[1] = diffusion_scale_ * std::sqrt(std::max(x[0], 0.0));
}

StepResult Cs2Plant::step(std::span<const double> state, std::span<const double> action,
                          std::size_t /*interval*/, Rng& rng) const {
  auto next = euler_maruyama_step(
      [](std::span<const double> x, std::span<const double> u, std::span<double> f) {
        cs1_plant_rhs<double>(x, u, f);
      },
      [this](std::span<const double> x, std::span<const double> /*u*/, std::span<double> g) {
        diffusion(x, g);
      },
      std::vector<double>(state.begin(), state.end()), action, horizon() / settings_.intervals,
      settings_.substeps, rng);
  auto measured = next;
  return {std::move(next), std::move(measured)};
}

double Cs2Plant::reward(std::size_t interval, std::span<const double> state,
                        std::span<const double> /*action*/,
                        std::span<const double> /*previous_action*/) const {
  return cs1_reward(interval, interval_count(), state);
}

bool cs3_switch(double c_N, double c_X) { return c_N <= 500.0 && c_X >= 10.0; }

double cs3_reward(std::size_t interval, std::size_t intervals, std::span<const double> state,
                  std::span<const double> action, std::span<const double> previous_action,
                  std::span<const double, 2> penalty) {
  double r = 0.0;
  for (std::size_t i = 0; i < 2; ++i) {
    const double du = action[i] - previous_action[i];
    r -= penalty[i] * du * du;
  }
  if (interval >= intervals) {
    r += state[2];
  }
  return r;
}

Cs3Plant::Cs3Plant(Cs3Options options) : options_(std::move(options)) {
  const auto& integ = options_.integration;
  if (integ.intervals == 0 || integ.substeps < 1 || !(integ.horizon > 0.0)) {
    throw ConfigError("cs3: intervals, substeps and horizon must be positive");
  }
  for (std::size_t i = 0; i < 2; ++i) {
    if (!(options_.lower[i] < options_.upper[i])) {
      throw ConfigError("cs3: control lower bound must be below upper bound");
    }
  }
}

bool Cs3Plant::deterministic() const {
  if (options_.process_noise) {
    return false;
  }
  return std::all_of(options_.initial_variance.begin(), options_.initial_variance.end(),
                     [](double v) { return v == 0.0; });
}

void Cs3Plant::rhs(std::span<const double> x, std::span<const double> u,
                   std::span<double> dx) const {
  const auto& p = options_.parameters;
  const double c_x = std::max(x[0], 0.0);
  const double c_N = std::max(x[1], 0.0);
  const double c_q = std::max(x[2], 0.0);
  const double light = u[0];
  const double feed = u[1];

  const double nitrate = c_N / (c_N + p.K_N);
  const double growth = p.u_m * light / (light + p.k_s + light * light / p.k_i) * c_x * nitrate;
  dx[0] = growth - p.u_d * c_x;
  dx[1] = -p.Y_NX * growth + feed;
  if (options_.gate_enabled && cs3_switch(c_N, c_x)) {
    dx[2] = p.k_m * light / (light + p.k_sq + light * light / p.k_iq) * c_x * nitrate -
            p.k_d * c_q / (c_N + p.K_Np);
  } else {
    dx[2] = 0.0;
  }
}

std::vector<double> Cs3Plant::sample_initial_state(Rng& rng) const {
  std::vector<double> x(3);
  for (std::size_t i = 0; i < 3; ++i) {
    x[i] = options_.initial_mean[i] + std::sqrt(options_.initial_variance[i]) * standard_normal(rng);
    x[i] = std::max(x[i], 0.0);
  }
  return x;
}

std::vector<double> Cs3Plant::measure(std::span<const double> state, Rng& rng) const {
  std::vector<double> y(state.begin(), state.end());
  if (!options_.process_noise) {
    return y;
  }
  for (std::size_t i = 0; i < 3; ++i) {
    y[i] += std::sqrt(options_.measurement_variance[i]) * standard_normal(rng);
  }
  return y;
}

StepResult Cs3Plant::step(std::span<const double> state, std::span<const double> action,
                          std::size_t interval, Rng& rng) const {
  const auto& integ = options_.integration;
  const double dt = integ.horizon / static_cast<double>(integ.intervals);
  auto next = rk4_step<double>(
      [this](std::span<const double> s, std::span<const double> a, std::span<double> d) {
        rhs(s, a, d);
      },
      std::vector<double>(state.begin(), state.end()), action, dt, integ.substeps);

  if (options_.process_noise) {
    const double t = dt * static_cast<double>(interval + 1);
    for (std::size_t i = 0; i < 3; ++i) {
      const double amplitude = options_.disturbance[i];
      next[i] += std::sin(t) * amplitude + std::sqrt(amplitude) * standard_normal(rng);
    }
  }
  for (double& c : next) {
    c = std::max(c, 0.0);
  }
  auto measured = measure(next, rng);
  return {std::move(next), std::move(measured)};
}

double Cs3Plant::reward(std::size_t interval, std::span<const double> state,
                        std::span<const double> action,
                        std::span<const double> previous_action) const {
  return cs3_reward(interval, interval_count(), state, action, previous_action,
                    std::span<const double, 2>(options_.penalty));
}

PlantKind parse_plant_kind(std::string_view name) {
  if (name == "cs1") return PlantKind::Cs1;
  if (name == "cs1-approx") return PlantKind::Cs1Approx;
  if (name == "cs2") return PlantKind::Cs2;
  if (name == "cs3") return PlantKind::Cs3;
  if (name == "cs3-approx") return PlantKind::Cs3Approx;
  throw ConfigError("unknown plant '" + std::string(name) +
                    "' (expected cs1, cs1-approx, cs2, cs3 or cs3-approx)");
}

std::string_view to_string(PlantKind kind) {
  switch (kind) {
    case PlantKind::Cs1:
      return "cs1";
    case PlantKind::Cs1Approx:
      return "cs1-approx";
    case PlantKind::Cs2:
      return "cs2";
    case PlantKind::Cs3:
      return "cs3";
    case PlantKind::Cs3Approx:
      return "cs3-approx";
  }
  return "unknown";
}

PlantKind approximate_kind(PlantKind kind) {
  return is_cs3(kind) ? PlantKind::Cs3Approx : PlantKind::Cs1Approx;
}

bool is_cs3(PlantKind kind) { return kind == PlantKind::Cs3 || kind == PlantKind::Cs3Approx; }

std::unique_ptr<PlantModel> make_plant(PlantKind kind, const PlantOptions& options) {
  const std::size_t cs1_intervals = options.intervals == 0 ? 10 : options.intervals;
  const IntegrationSettings cs1_settings{cs1_intervals, options.substeps, 1.0};
  switch (kind) {
    case PlantKind::Cs1:
      return std::make_unique<Cs1Model>(Cs1Model::Dynamics::Plant, cs1_settings,
                                        options.cs1_disturbance_std);
    case PlantKind::Cs1Approx:
      return std::make_unique<Cs1Model>(Cs1Model::Dynamics::Approximate, cs1_settings, 0.0);
    case PlantKind::Cs2:
      return std::make_unique<Cs2Plant>(cs1_settings, options.cs2_diffusion);
    case PlantKind::Cs3:
    case PlantKind::Cs3Approx: {
      Cs3Options cs3 = options.cs3;
      if (options.intervals != 0) {
        cs3.integration.intervals = options.intervals;
      }
      cs3.integration.substeps = options.substeps;
      cs3.process_noise = kind == PlantKind::Cs3;
      return std::make_unique<Cs3Plant>(cs3);
    }
  }
  throw ConfigError("unknown plant kind");
}

}  // namespace batchrl
