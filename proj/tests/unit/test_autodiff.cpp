#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <random>

#include "batchrl/autodiff.hpp"
#include "batchrl/errors.hpp"
#include "oracles.hpp"

using batchrl::ad::Graph;
using batchrl::ad::NodeId;

TEST(Autodiff, SquareValueAndDerivative) {
  Graph g;
  const NodeId x = g.parameter();
  g.add_output(g.mul(x, x));
  const double in[] = {3.0};
  EXPECT_EQ(g.forward({}, in)[0], 9.0);
  EXPECT_EQ(g.backward(0)[0], 6.0);
}

TEST(Autodiff, TanhAtZero) {
  Graph g;
  const NodeId x = g.parameter();
  g.add_output(g.tanh(x));
  const double in[] = {0.0};
  EXPECT_EQ(g.forward({}, in)[0], 0.0);
  EXPECT_EQ(g.backward(0)[0], 1.0);
}

TEST(Autodiff, BackwardBeforeForwardIsStateError) {
  Graph g;
  g.add_output(g.square(g.parameter()));
  EXPECT_THROW(g.backward(0), batchrl::StateError);
}

TEST(Autodiff, ArityMismatchIsConfigError) {
  Graph g;
  const NodeId x = g.input();
  g.add_output(g.mul(x, g.parameter()));
  const double two[] = {1.0, 2.0};
  const double one[] = {1.0};
  EXPECT_THROW(g.forward(two, one), batchrl::ConfigError);
  EXPECT_THROW(g.forward(one, two), batchrl::ConfigError);
}

TEST(Autodiff, AdjointsAreZeroAfterBackward) {
  Graph g;
  const NodeId x = g.parameter();
  const NodeId y = g.parameter();
  g.add_output(g.mul(g.tanh(x), g.exp(y)));
  const double p[] = {0.3, -0.2};
  g.forward({}, p);
  for (std::size_t i = 0; i < g.node_count(); ++i) EXPECT_EQ(g.node(i).adjoint, 0.0);
  g.backward(0);
  for (std::size_t i = 0; i < g.node_count(); ++i) EXPECT_EQ(g.node(i).adjoint, 0.0);
}

TEST(Autodiff, LeakyReluKinkUsesNegativeSlope) {
  Graph g;
  const NodeId x = g.parameter();
  g.add_output(g.leaky_relu(x));
  const double zero[] = {0.0};
  g.forward({}, zero);
  EXPECT_EQ(g.backward(0)[0], 0.01);
  const double pos[] = {2.0};
  g.forward({}, pos);
  EXPECT_EQ(g.backward(0)[0], 1.0);
}

TEST(GaussianLogDensity, PeakAndOneSigma) {
  const double mu[] = {0.7};
  const double sd[] = {1.0};
  const double peak = -0.5 * std::log(2 * M_PI);
  EXPECT_NEAR(batchrl::ad::gaussian_log_density(mu, mu, sd), -0.9189385, 1e-7);
  EXPECT_DOUBLE_EQ(batchrl::ad::gaussian_log_density(mu, mu, sd), peak);
  const double sd2[] = {1.7};
  const double u[] = {0.7 + 1.7};
  EXPECT_NEAR(batchrl::ad::gaussian_log_density(u, mu, sd2),
              batchrl::ad::gaussian_log_density(mu, mu, sd2) - 0.5, 1e-15);
}

TEST(GaussianLogDensity, MatchesProductOfUnivariateDensities) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d(-2, 2), s(0.2, 3);
  for (int rep = 0; rep < 200; ++rep) {
    std::vector<double> u{d(rng), d(rng)}, m{d(rng), d(rng)}, sd{s(rng), s(rng)};
    EXPECT_NEAR(batchrl::ad::gaussian_log_density(u, m, sd), oracle::gaussian_log_density(u, m, sd),
                1e-12);
  }
}

TEST(GaussianLogDensity, NonpositiveStdIsDomainError) {
  const double u[] = {0.0}, m[] = {0.0}, bad[] = {0.0}, neg[] = {-1.0};
  EXPECT_THROW(batchrl::ad::gaussian_log_density(u, m, bad), batchrl::DomainError);
  EXPECT_THROW(batchrl::ad::gaussian_log_density(u, m, neg), batchrl::DomainError);
}

TEST(GaussianLogDensity, GraphFormMatchesPlainForm) {
  Graph g;
  std::vector<NodeId> u{g.input(), g.input()}, m{g.parameter(), g.parameter()},
      s{g.parameter(), g.parameter()};
  g.add_output(batchrl::ad::gaussian_log_density(g, u, m, s));
  const std::vector<double> uv{0.3, -1.1}, p{0.1, 0.4, 0.8, 1.9};
  const double got = g.forward(uv, p)[0];
  EXPECT_NEAR(got, oracle::gaussian_log_density(uv, {0.1, 0.4}, {0.8, 1.9}), 1e-12);
  // d/dmu = (u - mu) / s^2, d/ds = -1/s + (u - mu)^2 / s^3
  const auto grad = g.backward(0);
  EXPECT_NEAR(grad[0], (0.3 - 0.1) / 0.64, 1e-12);
  EXPECT_NEAR(grad[3], -1 / 1.9 + std::pow(-1.5, 2) / std::pow(1.9, 3), 1e-12);
}

namespace {

// Random expression over every primitive, kept inside the domains of sqrt,
// log and div. Returns the output node.
NodeId random_composite(Graph& g, std::mt19937_64& rng, std::size_t nparams) {
  std::vector<NodeId> pool;
  for (std::size_t i = 0; i < nparams; ++i) pool.push_back(g.parameter());
  pool.push_back(g.input());
  pool.push_back(g.constant(0.5));
  std::uniform_int_distribution<int> op(0, 15);
  auto pick = [&] { return pool[std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng)]; };
  auto positive = [&](NodeId a) { return g.add_const(g.square(a), 0.5); };
  for (int k = 0; k < 12; ++k) {
    const NodeId a = pick(), b = pick();
    NodeId r;
    switch (op(rng)) {
      case 0: r = g.add(a, b); break;
      case 1: r = g.sub(a, b); break;
      case 2: r = g.mul(a, b); break;
      case 3: r = g.div(a, positive(b)); break;
      case 4: r = g.neg(a); break;
      case 5: r = g.mul_const(g.add_const(a, 0.3), -1.7); break;
      case 6: r = g.sqrt(positive(a)); break;
      case 7: r = g.exp(g.mul_const(g.tanh(a), 0.5)); break;
      case 8: r = g.log(positive(a)); break;
      case 9: r = g.tanh(a); break;
      case 10: r = g.sigmoid(a); break;
      case 11: r = g.softplus(a); break;
      case 12: r = g.leaky_relu(a); break;
      case 13: {
        std::vector<NodeId> w{pick(), pick()}, x{pick(), pick()};
        r = g.affine(pick(), w, x);
        break;
      }
      case 14: {
        std::vector<NodeId> t{a, b, pick()};
        r = g.sum(t);
        break;
      }
      default: r = g.square(a); break;
    }
    pool.push_back(g.tanh(r));
  }
  std::vector<NodeId> tail(pool.end() - 6, pool.end());
  return g.sum(tail);
}

}  // namespace

TEST(Autodiff, RandomCompositeGraphsMatchFiniteDifferences) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 150; ++seed) {
    std::mt19937_64 rng(seed);
    Graph g;
    const std::size_t n = 5;
    g.add_output(random_composite(g, rng, n));
    std::uniform_real_distribution<double> d(-1.5, 1.5);
    std::vector<double> p(n);
    for (double& x : p) x = d(rng);
    const std::vector<double> in{d(rng)};
    g.forward(in, p);
    const auto grad = g.backward(0);
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& q) { return g.forward(in, q)[0]; }, p);
    for (std::size_t i = 0; i < n; ++i) {
      EXPECT_TRUE(oracle::gradient_close(grad[i], fd[i]))
          << "seed " << seed << " slot " << i << ": " << grad[i] << " vs " << fd[i];
    }
    ++checked;
  }
  EXPECT_GE(checked, 100u);
}

TEST(Autodiff, ForwardIsPure) {
  std::mt19937_64 rng(3);
  Graph g;
  g.add_output(random_composite(g, rng, 4));
  const std::vector<double> p{0.1, -0.2, 0.3, 0.9}, in{0.4};
  const auto a = g.forward(in, p);
  const auto b = g.forward(in, p);
  EXPECT_EQ(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()), 0);
}

TEST(Autodiff, AdjointsAreLinear) {
  std::mt19937_64 rng(8);
  for (int rep = 0; rep < 20; ++rep) {
    Graph g;
    const NodeId a = random_composite(g, rng, 4);
    // Second expression over the same parameters.
    const NodeId b = g.mul(g.tanh(g.parameter_node(0)), g.softplus(g.parameter_node(3)));
    g.add_output(a);
    g.add_output(b);
    g.add_output(g.add(a, b));
    const std::vector<double> p{0.5, -0.7, 1.1, 0.2}, in{-0.3};
    g.forward(in, p);
    const auto ga = g.backward(0), gb = g.backward(1), gs = g.backward(2);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(gs[i], ga[i] + gb[i], 1e-13);
  }
}

TEST(Autodiff, GraphNetworkMatchesPlainForwardPass) {
  // 2 hidden layers of 20 tanh units, scalar output.
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> d(-0.5, 0.5);
  const std::size_t in_n = 4, hid = 20;
  Graph g;
  std::vector<NodeId> x;
  for (std::size_t i = 0; i < in_n; ++i) x.push_back(g.input());
  std::vector<double> theta;
  auto layer = [&](const std::vector<NodeId>& inputs, std::size_t rows, bool squash) {
    std::vector<NodeId> out;
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<NodeId> w;
      for (std::size_t c = 0; c < inputs.size(); ++c) {
        w.push_back(g.parameter());
        theta.push_back(d(rng));
      }
      const NodeId b = g.parameter();
      theta.push_back(d(rng));
      const NodeId z = g.affine(b, w, inputs);
      out.push_back(squash ? g.tanh(z) : z);
    }
    return out;
  };
  const auto h1 = layer(x, hid, true);
  const auto h2 = layer(h1, hid, true);
  g.add_output(layer(h2, 1, false)[0]);

  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> xv(in_n);
    for (double& v : xv) v = 3 * d(rng);
    const double got = g.forward(xv, theta)[0];
    // Plain loops over the same parameter order.
    std::size_t k = 0;
    auto plain = [&](const std::vector<double>& in, std::size_t rows, bool squash) {
      std::vector<double> out;
      for (std::size_t r = 0; r < rows; ++r) {
        double s = 0;
        for (std::size_t c = 0; c < in.size(); ++c) s += theta[k++] * in[c];
        s += theta[k++];
        out.push_back(squash ? std::tanh(s) : s);
      }
      return out;
    };
    const double want = plain(plain(plain(xv, hid, true), hid, true), 1, false)[0];
    EXPECT_NEAR(got, want, 1e-12);
  }
}

TEST(Autodiff, InputGradient) {
  Graph g;
  const NodeId x = g.input();
  const NodeId w = g.parameter();
  g.add_output(g.mul(g.square(x), w));
  const double in[] = {2.0}, p[] = {3.0};
  g.forward(in, p);
  EXPECT_EQ(g.input_gradient(0)[0], 12.0);
}
