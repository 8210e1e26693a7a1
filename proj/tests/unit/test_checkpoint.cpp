#include <gtest/gtest.h>

#include <cstring>
#include <limits>
#include <random>

#include "batchrl/checkpoint.hpp"
#include "batchrl/errors.hpp"

using namespace batchrl;

TEST(Checkpoint, RoundTripIsBitExact) {
  PolicyConfig c;
  c.state_inputs = 3;
  c.hidden_layers = 3;
  c.neurons = 7;
  c.activation = Activation::LeakyRelu;
  c.split_networks = false;
  c.lower = {120, 0};
  c.upper = {400, 40};
  c.state_scale = {10, 500, 0.5};
  c.std_scale = {56, 8};
  c.history_depth = 2;
  PolicyParams p = apply_freeze(PolicyParams::initialize(c, 3), std::vector<std::size_t>{2, 3});
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> d(-1, 1);
  for (double& v : p.values()) v = d(rng) * std::pow(10.0, 40 * d(rng));
  p.values()[0] = std::numeric_limits<double>::denorm_min();
  p.values()[1] = -0.0;
  const PolicyParams q = read_checkpoint(write_checkpoint(p));
  EXPECT_EQ(q.config(), p.config());
  ASSERT_EQ(q.size(), p.size());
  EXPECT_EQ(std::memcmp(q.values().data(), p.values().data(), p.size() * sizeof(double)), 0);
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(q.is_frozen(i), p.is_frozen(i));
  EXPECT_EQ(write_checkpoint(q), write_checkpoint(p));
}

TEST(Checkpoint, OneLinePerLayerAfterHeader) {
  const PolicyParams p = PolicyParams::initialize(PolicyConfig{}, 1);
  const std::string text = write_checkpoint(p);
  const auto lines = std::count(text.begin(), text.end(), '\n');
  // header + 2 sub-networks x 3 layers
  EXPECT_EQ(lines, 1 + 2 * 3);
  EXPECT_EQ(text.rfind("batchrl-policy v1", 0), 0u);
}

TEST(Checkpoint, MalformedInputRejected) {
  const std::string good = write_checkpoint(PolicyParams::initialize(PolicyConfig{}, 1));
  EXPECT_THROW(read_checkpoint("not a checkpoint\n"), ConfigError);
  EXPECT_THROW(read_checkpoint(good.substr(0, good.size() / 2)), ConfigError);
  EXPECT_THROW(load_checkpoint("/nonexistent/checkpoint.txt"), ConfigError);
}

TEST(Checkpoint, DoubleFormattingRoundTrips) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int i = 0; i < 10000; ++i) {
    std::uint64_t b = bits(rng);
    double x;
    std::memcpy(&x, &b, sizeof x);
    if (!std::isfinite(x)) continue;
    const double y = parse_double(format_double(x));
    EXPECT_EQ(std::memcmp(&x, &y, sizeof x), 0) << format_double(x);
  }
}
