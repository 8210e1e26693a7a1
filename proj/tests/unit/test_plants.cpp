#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "batchrl/errors.hpp"
#include "batchrl/integrators.hpp"
#include "batchrl/plants.hpp"

using namespace batchrl;

namespace {

void decay(std::span<const double> x, std::span<const double>, std::span<double> dx) {
  dx[0] = -x[0];
}

double rk4_decay_error(int substeps) {
  const std::vector<double> u;
  const auto y = rk4_step<double>(decay, std::vector<double>{1.0}, u, 1.0, substeps);
  return std::abs(y[0] - std::exp(-1.0));
}

}  // namespace

TEST(Rk4, ExponentialDecay) {
  const std::vector<double> u;
  const auto y = rk4_step<double>(decay, std::vector<double>{1.0}, u, 1.0, 100);
  EXPECT_NEAR(y[0], 0.3678794, 1e-6);
  EXPECT_NEAR(y[0], std::exp(-1.0), 1e-10);
}

TEST(Rk4, ZeroDerivativeLeavesStateUnchanged) {
  const std::vector<double> u{1.0};
  auto zero = [](std::span<const double>, std::span<const double>, std::span<double> dx) {
    for (double& d : dx) d = 0.0;
  };
  const std::vector<double> x{0.25, -3.0, 7.5};
  EXPECT_EQ(rk4_step<double>(zero, x, u, 0.7, 13), x);
}

TEST(Rk4, FourthOrderConvergence) {
  for (int n : {2, 4, 8}) {
    const double ratio = rk4_decay_error(n) / rk4_decay_error(2 * n);
    EXPECT_GE(ratio, 12.0) << n;
    EXPECT_LE(ratio, 20.0) << n;
  }
}

TEST(Rk4, RejectsBadStep) {
  const std::vector<double> u;
  EXPECT_THROW(rk4_step<double>(decay, std::vector<double>{1.0}, u, 0.0, 1), ConfigError);
  EXPECT_THROW(rk4_step<double>(decay, std::vector<double>{1.0}, u, 1.0, 0), ConfigError);
}

TEST(Rk4, NonFiniteDerivativeCarriesState) {
  auto blow = [](std::span<const double> x, std::span<const double>, std::span<double> dx) {
    dx[0] = 1.0 / (x[0] - 1.0);
  };
  const std::vector<double> u;
  try {
    rk4_step<double>(blow, std::vector<double>{1.0}, u, 0.1, 1);
    FAIL() << "expected IntegrationError";
  } catch (const IntegrationError& e) {
    ASSERT_EQ(e.state().size(), 1u);
    EXPECT_EQ(e.state()[0], 1.0);
  }
}

TEST(Cs1, PlantDriftBySubstitution) {
  const std::vector<double> y{1.0, 0.0}, u{1.0, 0.0};
  std::vector<double> dy(2);
  cs1_plant_rhs<double>(y, u, dy);
  EXPECT_DOUBLE_EQ(dy[0], -1.5);
  EXPECT_DOUBLE_EQ(dy[1], 1.0);
}

TEST(Cs1, ApproximateDriftBySubstitution) {
  const std::vector<double> y{0.5, 0.2}, u{2.0, 1.0};
  std::vector<double> dy(2);
  cs1_approx_rhs<double>(y, u, dy);
  EXPECT_DOUBLE_EQ(dy[0], -(2.0 + 2.0) * 0.5 + 1.0);
  EXPECT_DOUBLE_EQ(dy[1], 2.0 * 0.5 - 1.0 * 0.5);
}

TEST(Cs1, Reward) {
  const std::vector<double> s{0.3, 0.64};
  EXPECT_EQ(cs1_reward(3, 10, s), 0.0);
  EXPECT_EQ(cs1_reward(10, 10, s), 0.64);
  EXPECT_EQ(cs1_reward(10, 10, std::vector<double>{1.0, 0.0}), 0.0);
}

TEST(Cs1, ShapeAndBounds) {
  const auto p = make_plant(PlantKind::Cs1);
  EXPECT_EQ(p->interval_count(), 10u);
  EXPECT_DOUBLE_EQ(p->horizon(), 1.0);
  EXPECT_EQ(std::vector<double>(p->control_lower().begin(), p->control_lower().end()),
            (std::vector<double>{0, 0}));
  EXPECT_EQ(std::vector<double>(p->control_upper().begin(), p->control_upper().end()),
            (std::vector<double>{5, 5}));
}

TEST(Cs1, DisturbanceStatistics) {
  // One interval with u = 0 leaves y = (1, 0) in the noise-free plant, so the
  // step is pure disturbance.
  const auto p = make_plant(PlantKind::Cs1);
  Rng rng(4);
  const std::vector<double> u{0, 0};
  const int n = 20000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double d = p->step(std::vector<double>{1, 0}, u, 0, rng).state[1];
    s += d;
    s2 += d * d;
  }
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(std::sqrt(var), 0.02, 0.02 * 0.03);
}

TEST(Plants, ApproximateModelIsNoiseFree) {
  for (PlantKind k : {PlantKind::Cs1Approx}) {
    const auto p = make_plant(k);
    EXPECT_TRUE(p->deterministic());
    Rng a(1), b(2);
    std::vector<double> xa = p->sample_initial_state(a), xb = p->sample_initial_state(b);
    const std::vector<double> u{2.0, 1.5};
    for (std::size_t t = 0; t < p->interval_count(); ++t) {
      xa = p->step(xa, u, t, a).state;
      xb = p->step(xb, u, t, b).state;
      ASSERT_EQ(xa, xb);
    }
  }
}

TEST(Plants, DeterministicUnderFixedSeed) {
  for (PlantKind k : {PlantKind::Cs1, PlantKind::Cs2, PlantKind::Cs3, PlantKind::Cs3Approx}) {
    const auto p = make_plant(k);
    Rng a(9), b(9);
    std::vector<double> xa = p->sample_initial_state(a), xb = p->sample_initial_state(b);
    ASSERT_EQ(xa, xb);
    std::vector<double> u(p->control_count());
    for (std::size_t i = 0; i < u.size(); ++i) {
      u[i] = 0.5 * (p->control_lower()[i] + p->control_upper()[i]);
    }
    for (std::size_t t = 0; t < p->interval_count(); ++t) {
      const auto sa = p->step(xa, u, t, a), sb = p->step(xb, u, t, b);
      ASSERT_EQ(sa.state, sb.state);
      ASSERT_EQ(sa.measured, sb.measured);
      xa = sa.state;
      xb = sb.state;
    }
  }
}

TEST(EulerMaruyama, ZeroDiffusionIsExplicitEuler) {
  auto drift = [](std::span<const double> x, std::span<const double>, std::span<double> f) {
    f[0] = -2.0 * x[0] + 1.0;
  };
  auto none = [](std::span<const double>, std::span<const double>, std::span<double> g) {
    g[0] = 0.0;
  };
  const std::vector<double> u;
  Rng rng(1);
  const auto y = euler_maruyama_step(drift, none, std::vector<double>{0.3}, u, 0.5, 5, rng);
  double e = 0.3;
  for (int i = 0; i < 5; ++i) e += (-2.0 * e + 1.0) * 0.1;
  EXPECT_EQ(y[0], e);
}

TEST(EulerMaruyama, ConstantDiffusionVariance) {
  const double g = 0.3, dt = 0.4;
  auto none = [](std::span<const double>, std::span<const double>, std::span<double> f) {
    f[0] = 0.0;
  };
  auto diffusion = [g](std::span<const double>, std::span<const double>, std::span<double> out) {
    out[0] = g;
  };
  const std::vector<double> u;
  Rng rng(17);
  const int n = 100000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    const double x = euler_maruyama_step(none, diffusion, std::vector<double>{0.0}, u, dt, 10, rng)[0];
    s += x;
    s2 += x * x;
  }
  const double var = s2 / n - (s / n) * (s / n);
  EXPECT_NEAR(var, g * g * dt, 0.05 * g * g * dt);
}

TEST(Cs2, DiffusionClampedAtZero) {
  Cs2Plant p(IntegrationSettings{});
  std::vector<double> g(2);
  p.diffusion(std::vector<double>{0.0, 0.5}, g);
  EXPECT_EQ(g[1], 0.0);
  p.diffusion(std::vector<double>{-0.3, 0.5}, g);
  EXPECT_EQ(g[1], 0.0);
  p.diffusion(std::vector<double>{0.25, 0.5}, g);
  EXPECT_DOUBLE_EQ(g[1], 0.05);
  EXPECT_EQ(g[0], 0.0);
}

TEST(Cs3, SwitchExamples) {
  EXPECT_TRUE(cs3_switch(400, 12));
  EXPECT_FALSE(cs3_switch(600, 12));
  EXPECT_TRUE(cs3_switch(500, 10));
  EXPECT_FALSE(cs3_switch(400, 9.999));
}

TEST(Cs3, RewardExamples) {
  const std::array<double, 2> w{3.125e-8, 3.125e-6};
  const std::vector<double> s{1, 100, 0.1};
  const std::vector<double> u{200, 10};
  EXPECT_EQ(cs3_reward(2, 12, s, u, u, w), 0.0);
  EXPECT_DOUBLE_EQ(cs3_reward(2, 12, s, std::vector<double>{201, 10}, u, w), -3.125e-8);
  EXPECT_DOUBLE_EQ(cs3_reward(12, 12, s, u, u, w), 0.1);
}

TEST(Cs3, ClosedGateStopsProduction) {
  Cs3Options o;
  std::vector<double> dx(3);
  Cs3Plant plant(o);
  // c_N above the threshold: no production whatever the light.
  plant.rhs(std::vector<double>{12, 600, 0.05}, std::vector<double>{300, 10}, dx);
  EXPECT_EQ(dx[2], 0.0);
  plant.rhs(std::vector<double>{12, 400, 0.05}, std::vector<double>{300, 10}, dx);
  EXPECT_NE(dx[2], 0.0);

  o.gate_enabled = false;
  o.process_noise = false;
  Cs3Plant closed(o);
  Rng rng(3);
  std::uniform_real_distribution<double> I(120, 400), F(0, 40);
  for (int ep = 0; ep < 200; ++ep) {
    auto x = closed.sample_initial_state(rng);
    const double q0 = x[2];
    for (std::size_t t = 0; t < closed.interval_count(); ++t) {
      x = closed.step(x, std::vector<double>{I(rng), F(rng)}, t, rng).state;
      ASSERT_EQ(x[2], q0);
    }
  }
}

TEST(Cs3, ClosedGateWithNoiseOnlyMovesByDisturbance) {
  Cs3Options o;
  o.gate_enabled = false;
  Cs3Plant closed(o);
  Rng rng(5);
  for (int ep = 0; ep < 200; ++ep) {
    auto x = closed.sample_initial_state(rng);
    for (std::size_t t = 0; t < closed.interval_count(); ++t) {
      const double before = x[2];
      x = closed.step(x, std::vector<double>{300, 20}, t, rng).state;
      // |sin| * 1e-7 + sqrt(1e-7) * |z| with |z| < 7
      ASSERT_LE(std::abs(x[2] - before), 1e-7 + 7 * std::sqrt(1e-7));
    }
  }
}

TEST(Cs3, StatesStayNonnegative) {
  const auto p = make_plant(PlantKind::Cs3);
  Rng rng(99);
  std::uniform_real_distribution<double> I(120, 400), F(0, 40);
  for (int ep = 0; ep < 10000; ++ep) {
    auto x = p->sample_initial_state(rng);
    for (std::size_t t = 0; t < p->interval_count(); ++t) {
      x = p->step(x, std::vector<double>{I(rng), F(rng)}, t, rng).state;
      for (double c : x) ASSERT_GE(c, 0.0);
    }
  }
}

TEST(Cs3, TableParametersEmbedded) {
  const Cs3Parameters k;
  EXPECT_EQ(k.u_m, 0.0572);
  EXPECT_EQ(k.u_d, 0.0);
  EXPECT_EQ(k.K_N, 393.1);
  EXPECT_EQ(k.Y_NX, 504.1);
  EXPECT_EQ(k.k_m, 0.00016);
  EXPECT_EQ(k.k_d, 0.281);
  EXPECT_EQ(k.k_s, 178.9);
  EXPECT_EQ(k.k_i, 447.1);
  EXPECT_EQ(k.k_sq, 23.51);
  EXPECT_EQ(k.k_iq, 800.0);
  EXPECT_EQ(k.K_Np, 16.89);
}

TEST(Plants, NamesRoundTrip) {
  for (PlantKind k :
       {PlantKind::Cs1, PlantKind::Cs1Approx, PlantKind::Cs2, PlantKind::Cs3, PlantKind::Cs3Approx}) {
    EXPECT_EQ(parse_plant_kind(to_string(k)), k);
    EXPECT_EQ(make_plant(k)->name(), to_string(k));
  }
  EXPECT_THROW(parse_plant_kind("cs4"), ConfigError);
}

TEST(Plants, CountingPlantCountsEpisodes) {
  const auto inner = make_plant(PlantKind::Cs1);
  CountingPlant counted(*inner);
  Rng rng(1);
  for (int i = 0; i < 7; ++i) counted.sample_initial_state(rng);
  EXPECT_EQ(counted.episodes(), 7u);
}
