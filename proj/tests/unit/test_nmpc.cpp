#include <gtest/gtest.h>

#include <cmath>

#include "batchrl/errors.hpp"
#include "batchrl/nmpc.hpp"

using namespace batchrl;

namespace {

// dx/dt = u over a unit horizon with reward -(x(T) - target)^2; the optimal
// single control is target - x0.
class Toy : public OdeModel {
 public:
  Toy(std::size_t intervals, double target)
      : OdeModel(IntegrationSettings{intervals, 4, static_cast<double>(intervals)}), target_(target) {}
  std::string name() const override { return "toy"; }
  std::size_t state_count() const override { return 1; }
  std::size_t control_count() const override { return 1; }
  std::span<const double> control_lower() const override { return lower_; }
  std::span<const double> control_upper() const override { return upper_; }
  std::vector<double> state_scale() const override { return {1.0}; }
  bool deterministic() const override { return true; }
  std::vector<double> nominal_initial_state() const override { return {0.25}; }
  std::vector<double> sample_initial_state(Rng&) const override { return nominal_initial_state(); }
  StepResult step(std::span<const double> s, std::span<const double> u, std::size_t,
                  Rng&) const override {
    auto n = integrate(s, u);
    return {n, n};
  }
  double reward(std::size_t t, std::span<const double> s, std::span<const double>,
                std::span<const double>) const override {
    return t >= interval_count() ? terminal_reward(s) : 0.0;
  }
  void rhs(std::span<const double>, std::span<const double> u, std::span<double> dx) const override {
    dx[0] = u[0];
  }
  void rhs(std::span<const ad::Var>, std::span<const ad::Var> u,
           std::span<ad::Var> dx) const override {
    dx[0] = u[0] * 1.0;
  }
  double terminal_reward(std::span<const double> x) const override {
    return -(x[0] - target_) * (x[0] - target_);
  }
  ad::Var terminal_reward(std::span<const ad::Var> x) const override {
    const ad::Var d = x[0] - target_;
    return -(d * d);
  }

 private:
  double target_;
  std::array<double, 1> lower_{-5.0};
  std::array<double, 1> upper_{5.0};
};

}  // namespace

TEST(Ocp, QuadraticToyOptimum) {
  Toy toy(1, 2.0);
  OcpProblem p;
  p.model = &toy;
  p.state = {0.25};
  Rng rng(1);
  const OcpSolution s = solve_ocp(p, NlpSettings{}, rng);
  ASSERT_EQ(s.controls.size(), 1u);
  EXPECT_NEAR(s.controls[0], 1.75, 1e-8);
  EXPECT_NEAR(s.objective, 0.0, 1e-12);
  EXPECT_FALSE(s.degraded);
}

TEST(Ocp, ActiveBoundIsRespectedExactly) {
  Toy toy(2, 30.0);
  OcpProblem p;
  p.model = &toy;
  p.state = {0.0};
  Rng rng(2);
  const OcpSolution s = solve_ocp(p, NlpSettings{}, rng);
  for (double u : s.controls) EXPECT_EQ(u, 5.0);
}

TEST(Ocp, ZeroHorizonGivesTerminalReward) {
  const auto model = make_plant(PlantKind::Cs1Approx);
  const auto& ode = dynamic_cast<const OdeModel&>(*model);
  OcpProblem p;
  p.model = &ode;
  p.start_interval = ode.interval_count();
  p.state = {0.3, 0.61};
  Rng rng(1);
  const OcpSolution s = solve_ocp(p, NlpSettings{}, rng);
  EXPECT_TRUE(s.controls.empty());
  EXPECT_EQ(s.objective, 0.61);
}

TEST(Ocp, PinnedBoundsReturnForcedSequence) {
  const auto model = make_plant(PlantKind::Cs1Approx);
  const auto& ode = dynamic_cast<const OdeModel&>(*model);
  OcpProblem p;
  p.model = &ode;
  p.start_interval = 6;
  p.state = {0.4, 0.3};
  p.lower = {1, 0, 2, 0.5, 3, 1, 4, 1.5};
  p.upper = p.lower;
  Rng rng(1);
  const OcpSolution s = solve_ocp(p, NlpSettings{}, rng);
  EXPECT_EQ(s.controls, p.lower);
  std::vector<double> x = p.state;
  for (std::size_t t = 0; t < 4; ++t) {
    x = ode.integrate(x, std::vector<double>{p.lower[2 * t], p.lower[2 * t + 1]});
  }
  EXPECT_DOUBLE_EQ(s.objective, x[1]);
}

TEST(Ocp, Cs1ApproximateOptimum) {
  const auto model = make_plant(PlantKind::Cs1Approx);
  const auto& ode = dynamic_cast<const OdeModel&>(*model);
  OcpProblem p;
  p.model = &ode;
  p.state = ode.nominal_initial_state();
  Rng rng(3);
  const OcpSolution s = solve_ocp(p, NlpSettings{}, rng);
  EXPECT_NEAR(s.objective, 0.64, 0.01);
  ASSERT_EQ(s.controls.size(), 20u);
  for (std::size_t i = 0; i < s.controls.size(); ++i) {
    EXPECT_GE(s.controls[i], 0.0);
    EXPECT_LE(s.controls[i], 5.0);
  }
  // Incumbent is the best start.
  for (double f : s.start_objectives) EXPECT_LE(f, s.objective);
  EXPECT_EQ(s.start_objectives.size(), 8u);
}

TEST(Ocp, WarmStartIncumbentNeverWorseThanWorstStart) {
  const auto model = make_plant(PlantKind::Cs1Approx);
  const auto& ode = dynamic_cast<const OdeModel&>(*model);
  OcpProblem p;
  p.model = &ode;
  p.start_interval = 3;
  p.state = {0.5, 0.2};
  p.warm_start.assign(14, 1.0);
  NlpSettings settings;
  settings.multistarts = 3;
  Rng rng(4);
  const OcpSolution s = solve_ocp(p, settings, rng);
  ASSERT_EQ(s.start_objectives.size(), 4u);
  for (double f : s.start_objectives) EXPECT_GE(s.objective, f);
}

TEST(Ocp, RejectsNoisyModelAndBadSettings) {
  const auto noisy = make_plant(PlantKind::Cs1);
  const auto& ode = dynamic_cast<const OdeModel&>(*noisy);
  OcpProblem p;
  p.model = &ode;
  p.state = {1, 0};
  Rng rng(1);
  EXPECT_THROW(solve_ocp(p, NlpSettings{}, rng), ConfigError);
  NlpSettings bad;
  bad.multistarts = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Ocp, ObjectiveGradientMatchesFiniteDifferences) {
  Cs1Model plant(Cs1Model::Dynamics::Plant, IntegrationSettings{}, 0.0);
  OcpObjective obj(plant, 10);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> d(0.2, 4.8);
  std::vector<double> u(20);
  for (double& x : u) x = d(rng);
  const std::vector<double> y0{1, 0};
  std::vector<double> g;
  obj.value_and_gradient(y0, u, g);
  for (std::size_t i = 0; i < u.size(); ++i) {
    auto up = u, dn = u;
    up[i] += 1e-6;
    dn[i] -= 1e-6;
    const double fd = (obj.value(y0, up) - obj.value(y0, dn)) / 2e-6;
    EXPECT_NEAR(g[i], fd, 1e-6 * std::abs(fd) + 1e-8) << i;
  }
}

TEST(Nmpc, ModelMatchedClosedLoopEqualsOpenLoop) {
  const auto model = make_plant(PlantKind::Cs1Approx);
  const auto& ode = dynamic_cast<const OdeModel&>(*model);
  OcpProblem p;
  p.model = &ode;
  p.state = ode.nominal_initial_state();
  Rng a(5);
  const OcpSolution open = solve_ocp(p, NlpSettings{}, a);
  Rng b(6);
  const Trajectory closed = nmpc_rollout(*model, ode, NlpSettings{}, b);
  EXPECT_NEAR(closed.total_return, open.objective, 1e-6);
  EXPECT_EQ(closed.actions.size(), 10u);
  for (const auto& u : closed.actions) {
    for (double x : u) {
      EXPECT_GE(x, 0.0);
      EXPECT_LE(x, 5.0);
    }
  }
}

TEST(Nmpc, EpisodesIndependentOfThreads) {
  const auto plant = make_plant(PlantKind::Cs1);
  const auto model = make_plant(PlantKind::Cs1Approx);
  const auto& ode = dynamic_cast<const OdeModel&>(*model);
  NlpSettings s;
  s.multistarts = 2;
  s.max_iterations = 40;
  const auto one = nmpc_episodes(*plant, ode, s, 3, 9, 1);
  const auto two = nmpc_episodes(*plant, ode, s, 3, 9, 2);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(one[k].states, two[k].states);
}

TEST(Nmpc, DimensionMismatchRejected) {
  const auto plant = make_plant(PlantKind::Cs3);
  const auto model = make_plant(PlantKind::Cs1Approx);
  Rng rng(1);
  EXPECT_THROW(nmpc_rollout(*plant, dynamic_cast<const OdeModel&>(*model), NlpSettings{}, rng),
               ConfigError);
}
