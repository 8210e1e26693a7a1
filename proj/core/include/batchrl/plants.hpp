#pragma once

#include <array>
#include <atomic>
#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "batchrl/autodiff.hpp"
#include "batchrl/random.hpp"

namespace batchrl {

struct StepResult {
  std::vector<double> state;
  std::vector<double> measured;
};

// One batch process. A step consumes exactly one control interval.
//
// Rewards are indexed by interval: for t < T the stage reward of applying
// `action` after `previous_action` in state x_t, for t == T the terminal
// reward of x_T (action arguments then carry the last applied control twice).
class PlantModel {
 public:
  virtual ~PlantModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t state_count() const = 0;
  virtual std::size_t control_count() const = 0;
  virtual std::size_t interval_count() const = 0;
  virtual double horizon() const = 0;
  virtual std::span<const double> control_lower() const = 0;
  virtual std::span<const double> control_upper() const = 0;

  // Typical magnitude of each state, used to normalize policy inputs.
  virtual std::vector<double> state_scale() const = 0;

  // True when neither the initial state nor the transitions are random.
  virtual bool deterministic() const = 0;

  virtual std::vector<double> sample_initial_state(Rng& rng) const = 0;
  virtual std::vector<double> measure(std::span<const double> state, Rng& rng) const;
  virtual StepResult step(std::span<const double> state, std::span<const double> action,
                          std::size_t interval, Rng& rng) const = 0;
  virtual double reward(std::size_t interval, std::span<const double> state,
                        std::span<const double> action,
                        std::span<const double> previous_action) const = 0;

  double interval_length() const { return horizon() / static_cast<double>(interval_count()); }
};

struct IntegrationSettings {
  std::size_t intervals = 10;
  int substeps = 20;
  double horizon = 1.0;

  bool operator==(const IntegrationSettings&) const = default;
};

// A plant whose transition is a deterministic ODE (plus optional additive
// noise in derived classes) with a terminal-only objective. The right-hand
// side and terminal reward are available in graph form so the optimizer can
// differentiate a rollout.
class OdeModel : public PlantModel {
 public:
  explicit OdeModel(IntegrationSettings settings);

  std::size_t interval_count() const override { return settings_.intervals; }
  double horizon() const override { return settings_.horizon; }
  int substeps() const { return settings_.substeps; }

  virtual std::vector<double> nominal_initial_state() const = 0;

  virtual void rhs(std::span<const double> x, std::span<const double> u,
                   std::span<double> dx) const = 0;
  virtual void rhs(std::span<const ad::Var> x, std::span<const ad::Var> u,
                   std::span<ad::Var> dx) const = 0;
  virtual double terminal_reward(std::span<const double> x) const = 0;
  virtual ad::Var terminal_reward(std::span<const ad::Var> x) const = 0;

  // Noise-free transition over one interval.
  std::vector<double> integrate(std::span<const double> x, std::span<const double> u) const;

 protected:
  IntegrationSettings settings_;
};

// Photo-production plant of the first case study.
template <class T>
void cs1_plant_rhs(std::span<const T> y, std::span<const T> u, std::span<T> dy) {
  dy[0] = -(u[0] + 0.5 * u[0] * u[0]) * y[0] + 0.5 * u[1] * y[1] / (y[0] + y[1]);
  dy[1] = u[0] * y[0] - 0.7 * u[1] * y[0];
}

// Simplified model used for offline training.
template <class T>
void cs1_approx_rhs(std::span<const T> y, std::span<const T> u, std::span<T> dy) {
  dy[0] = -(u[0] + 0.5 * u[0] * u[0]) * y[0] + u[1];
  dy[1] = u[0] * y[0] - u[1] * y[0];
}

// R_t = 0 for t < T, R_T = y2(T).
double cs1_reward(std::size_t interval, std::size_t intervals, std::span<const double> state);

class Cs1Model : public OdeModel {
 public:
  enum class Dynamics { Plant, Approximate };

  Cs1Model(Dynamics dynamics, IntegrationSettings settings, double disturbance_std);

  std::string name() const override;
  std::size_t state_count() const override { return 2; }
  std::size_t control_count() const override { return 2; }
  std::span<const double> control_lower() const override { return lower_; }
  std::span<const double> control_upper() const override { return upper_; }
  std::vector<double> state_scale() const override { return {1.0, 1.0}; }
  bool deterministic() const override { return disturbance_std_ == 0.0; }

  std::vector<double> nominal_initial_state() const override { return {1.0, 0.0}; }
  std::vector<double> sample_initial_state(Rng& rng) const override;
  StepResult step(std::span<const double> state, std::span<const double> action,
                  std::size_t interval, Rng& rng) const override;
  double reward(std::size_t interval, std::span<const double> state, std::span<const double> action,
                std::span<const double> previous_action) const override;

  void rhs(std::span<const double> x, std::span<const double> u,
           std::span<double> dx) const override;
  void rhs(std::span<const ad::Var> x, std::span<const ad::Var> u,
           std::span<ad::Var> dx) const override;
  double terminal_reward(std::span<const double> x) const override { return x[1]; }
  ad::Var terminal_reward(std::span<const ad::Var> x) const override { return x[1]; }

  Dynamics dynamics() const { return dynamics_; }
  double disturbance_std() const { return disturbance_std_; }

 private:
  Dynamics dynamics_;
  double disturbance_std_;
  std::array<double, 2> lower_{0.0, 0.0};
  std::array<double, 2> upper_{5.0, 5.0};
};

// Second case study: plant drift driven by a Wiener process on y2 with
// intensity 0.1 sqrt(y1), integrated by Euler-Maruyama.
class Cs2Plant : public PlantModel {
 public:
  explicit Cs2Plant(IntegrationSettings settings, double diffusion_scale = 0.1);

  std::string name() const override { return "cs2"; }
  std::size_t state_count() const override { return 2; }
  std::size_t control_count() const override { return 2; }
  std::size_t interval_count() const override { return settings_.intervals; }
  double horizon() const override { return settings_.horizon; }
  std::span<const double> control_lower() const override { return lower_; }
  std::span<const double> control_upper() const override { return upper_; }
  std::vector<double> state_scale() const override { return {1.0, 1.0}; }
  bool deterministic() const override { return diffusion_scale_ == 0.0; }

  std::vector<double> sample_initial_state(Rng& rng) const override;
  StepResult step(std::span<const double> state, std::span<const double> action,
                  std::size_t interval, Rng& rng) const override;
  double reward(std::size_t interval, std::span<const double> state, std::span<const double> action,
                std::span<const double> previous_action) const override;

  // Diffusion vector at x: (0, scale * sqrt(max(y1, 0))).
  void diffusion(std::span<const double> x, std::span<double> g) const;

 private:
  IntegrationSettings settings_;
  double diffusion_scale_;
  std::array<double, 2> lower_{0.0, 0.0};
  std::array<double, 2> upper_{5.0, 5.0};
};

// Kinetic parameters of the phycocyanin production model.
struct Cs3Parameters {
  double u_m = 0.0572;
  double u_d = 0.0;
  double K_N = 393.1;
  double Y_NX = 504.1;
  double k_m = 0.00016;
  double k_d = 0.281;
  double k_s = 178.9;
  double k_i = 447.1;
  double k_sq = 23.51;
  double k_iq = 800.0;
  double K_Np = 16.89;

  bool operator==(const Cs3Parameters&) const = default;
};

struct Cs3Options {
  Cs3Parameters parameters;
  IntegrationSettings integration{12, 20, 240.0};
  // Disturbance amplitude per state; the random part uses the same numbers
  // as variances.
  std::array<double, 3> disturbance{4e-3, 1.0, 1e-7};
  std::array<double, 3> measurement_variance{4e-4, 0.1, 1e-8};
  std::array<double, 3> initial_mean{1.0, 150.0, 0.0};
  std::array<double, 3> initial_variance{1e-3, 22.5, 0.0};
  std::array<double, 2> penalty{3.125e-8, 3.125e-6};
  std::array<double, 2> lower{120.0, 0.0};
  std::array<double, 2> upper{400.0, 40.0};
  // Disturbance and measurement noise; off for the approximate model.
  bool process_noise = true;
  // Production gate override for ablations: when false the gate is closed.
  bool gate_enabled = true;

  bool operator==(const Cs3Options&) const = default;
};

// Production is active iff c_N <= 500 mg/L and c_X >= 10 g/L.
bool cs3_switch(double c_N, double c_X);

// Stage penalty -du' diag(w) du, plus c_q at the terminal interval.
double cs3_reward(std::size_t interval, std::size_t intervals, std::span<const double> state,
                  std::span<const double> action, std::span<const double> previous_action,
                  std::span<const double, 2> penalty);

class Cs3Plant : public PlantModel {
 public:
  explicit Cs3Plant(Cs3Options options);

  std::string name() const override { return options_.process_noise ? "cs3" : "cs3-approx"; }
  std::size_t state_count() const override { return 3; }
  std::size_t control_count() const override { return 2; }
  std::size_t interval_count() const override { return options_.integration.intervals; }
  double horizon() const override { return options_.integration.horizon; }
  std::span<const double> control_lower() const override { return options_.lower; }
  std::span<const double> control_upper() const override { return options_.upper; }
  std::vector<double> state_scale() const override { return {10.0, 500.0, 0.5}; }
  bool deterministic() const override;

  std::vector<double> sample_initial_state(Rng& rng) const override;
  std::vector<double> measure(std::span<const double> state, Rng& rng) const override;
  StepResult step(std::span<const double> state, std::span<const double> action,
                  std::size_t interval, Rng& rng) const override;
  double reward(std::size_t interval, std::span<const double> state, std::span<const double> action,
                std::span<const double> previous_action) const override;

  void rhs(std::span<const double> x, std::span<const double> u, std::span<double> dx) const;
  const Cs3Options& options() const { return options_; }

 private:
  Cs3Options options_;
};

// Counts episodes started on the wrapped plant (calls to
// sample_initial_state). Used to audit the true-plant budget.
class CountingPlant : public PlantModel {
 public:
  explicit CountingPlant(const PlantModel& inner) : inner_(inner) {}

  std::size_t episodes() const { return episodes_.load(); }

  std::string name() const override { return inner_.name(); }
  std::size_t state_count() const override { return inner_.state_count(); }
  std::size_t control_count() const override { return inner_.control_count(); }
  std::size_t interval_count() const override { return inner_.interval_count(); }
  double horizon() const override { return inner_.horizon(); }
  std::span<const double> control_lower() const override { return inner_.control_lower(); }
  std::span<const double> control_upper() const override { return inner_.control_upper(); }
  std::vector<double> state_scale() const override { return inner_.state_scale(); }
  bool deterministic() const override { return inner_.deterministic(); }
  std::vector<double> sample_initial_state(Rng& rng) const override {
    ++episodes_;
    return inner_.sample_initial_state(rng);
  }
  std::vector<double> measure(std::span<const double> state, Rng& rng) const override {
    return inner_.measure(state, rng);
  }
  StepResult step(std::span<const double> state, std::span<const double> action,
                  std::size_t interval, Rng& rng) const override {
    return inner_.step(state, action, interval, rng);
  }
  double reward(std::size_t interval, std::span<const double> state, std::span<const double> action,
                std::span<const double> previous_action) const override {
    return inner_.reward(interval, state, action, previous_action);
  }

 private:
  const PlantModel& inner_;
  mutable std::atomic<std::size_t> episodes_{0};
};

enum class PlantKind { Cs1, Cs1Approx, Cs2, Cs3, Cs3Approx };

PlantKind parse_plant_kind(std::string_view name);
std::string_view to_string(PlantKind kind);

// The simplified model each true plant is trained against offline.
PlantKind approximate_kind(PlantKind kind);
bool is_cs3(PlantKind kind);

struct PlantOptions {
  // Zero means "use the plant's default".
  std::size_t intervals = 0;
  int substeps = 20;
  double cs1_disturbance_std = 0.02;
  double cs2_diffusion = 0.1;
  Cs3Options cs3;

  bool operator==(const PlantOptions&) const = default;
};

std::unique_ptr<PlantModel> make_plant(PlantKind kind, const PlantOptions& options = {});

}  // namespace batchrl
