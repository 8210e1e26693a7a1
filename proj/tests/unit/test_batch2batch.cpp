#include <gtest/gtest.h>

#include <cstring>

#include "batchrl/batch2batch.hpp"
#include "batchrl/checkpoint.hpp"
#include "batchrl/errors.hpp"

using namespace batchrl;

namespace {

B2BConfig small() {
  B2BConfig c;
  c.offline_epochs = 3;
  c.max_offline_epochs = 5;
  c.offline_episodes = 50;
  c.online_epochs = 2;
  c.online_episodes = 5;
  c.seed = 11;
  return c;
}

bool frozen_equal(const PolicyParams& a, const PolicyParams& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a.is_frozen(i)) continue;
    const double x = a.values()[i], y = b.values()[i];
    if (std::memcmp(&x, &y, sizeof x) != 0) return false;
  }
  return true;
}

}  // namespace

TEST(B2BConfig, OfflineEpisodesMustDwarfOnline) {
  B2BConfig c = small();
  c.offline_episodes = 49;
  EXPECT_THROW(c.validate(), ConfigError);
  c.offline_episodes = 50;
  EXPECT_NO_THROW(c.validate());
}

TEST(B2BConfig, EpochCap) {
  B2BConfig c = small();
  c.offline_epochs = 6;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(B2BConfig, PhaseSettings) {
  const B2BConfig c;
  EXPECT_EQ(c.offline_train_config().adam.learning_rate, 1e-2);
  EXPECT_EQ(c.online_train_config().adam.learning_rate, 1e-3);
  EXPECT_EQ(c.offline_train_config().episodes, 800u);
  EXPECT_EQ(c.online_train_config().episodes, 25u);
  EXPECT_NE(c.offline_train_config().stream, c.online_train_config().stream);
  EXPECT_EQ(c.resolved_trainable_layers(PolicyConfig{}), (std::vector<std::size_t>{1, 2}));
}

TEST(OfflinePhase, ZeroEpochsCheckpointIsInitialization) {
  const auto plant = make_plant(PlantKind::Cs1Approx);
  B2BConfig c = small();
  c.offline_epochs = 0;
  const PolicyParams init = PolicyParams::initialize(PolicyConfig{}, 1);
  MemoryCheckpointSink sink;
  const PhaseResult r = offline_phase(init, *plant, c, &sink);
  EXPECT_TRUE(r.records.empty());
  EXPECT_EQ(r.params, init);
  EXPECT_EQ(r.final_checkpoint, "offline_epoch_000.txt");
  EXPECT_EQ(read_checkpoint(sink.checkpoints().at(r.final_checkpoint)), init);
}

TEST(OfflinePhase, CheckpointEveryEpoch) {
  const auto plant = make_plant(PlantKind::Cs1Approx);
  MemoryCheckpointSink sink;
  const PhaseResult r =
      offline_phase(PolicyParams::initialize(PolicyConfig{}, 1), *plant, small(), &sink);
  EXPECT_EQ(r.records.size(), 3u);
  EXPECT_EQ(sink.checkpoints().size(), 4u);
  EXPECT_EQ(r.episodes_run, 150u);
  EXPECT_EQ(read_checkpoint(sink.checkpoints().at(r.final_checkpoint)), r.params);
  EXPECT_THROW(sink.store(Phase::Offline, 1, r.params), StateError);
}

TEST(OfflinePhase, OcpGapStopsEarly) {
  const auto plant = make_plant(PlantKind::Cs1Approx);
  B2BConfig c = small();
  c.ocp_optimum = 0.0;
  c.ocp_tolerance = 10.0;
  const PhaseResult r = offline_phase(PolicyParams::initialize(PolicyConfig{}, 1), *plant, c);
  EXPECT_EQ(r.records.size(), 1u);
}

TEST(TransferFreeze, DefaultPartition) {
  const PolicyParams p = PolicyParams::initialize(PolicyConfig{}, 1);
  const B2BConfig c;
  const PolicyParams f = transfer_freeze(p, c.resolved_trainable_layers(p.config()));
  EXPECT_EQ(f.frozen_layers(), std::vector<std::size_t>{0});
  std::size_t trainable = 0;
  for (std::size_t i = 0; i < f.size(); ++i) trainable += !f.is_frozen(i);
  EXPECT_EQ(f.frozen_count() + trainable, f.size());
  EXPECT_EQ(std::vector<double>(f.values().begin(), f.values().end()),
            std::vector<double>(p.values().begin(), p.values().end()));
  EXPECT_THROW(transfer_freeze(p, std::vector<std::size_t>{}), ConfigError);
}

TEST(OnlinePhase, ZeroEpochsEqualsPostFreeze) {
  const auto plant = make_plant(PlantKind::Cs1);
  B2BConfig c = small();
  c.online_epochs = 0;
  const PolicyParams f =
      transfer_freeze(PolicyParams::initialize(PolicyConfig{}, 1), std::vector<std::size_t>{2});
  const PhaseResult r = online_phase(f, *plant, c);
  EXPECT_EQ(r.params, f);
}

TEST(Pipeline, FrozenLayersAndBudget) {
  const auto approx = make_plant(PlantKind::Cs1Approx);
  const auto truth = make_plant(PlantKind::Cs1);
  CountingPlant counted(*truth);
  MemoryCheckpointSink sink;
  const PipelineResult r =
      run_pipeline(PolicyParams::initialize(PolicyConfig{}, 1), *approx, counted, small(), &sink);
  EXPECT_EQ(counted.episodes(), 2u * 5u);
  EXPECT_EQ(r.online.episodes_run, 10u);
  EXPECT_TRUE(frozen_equal(r.transferred, r.online.params));
  for (const auto& rec : r.online.records) {
    EXPECT_TRUE(frozen_equal(r.transferred, read_checkpoint(sink.checkpoints().at(rec.checkpoint))));
  }
  EXPECT_NE(r.online.params, r.transferred);
  EXPECT_EQ(r.online.initial_checkpoint, "online_epoch_000.txt");
}

TEST(Pipeline, SameSeedSameCheckpoints) {
  const auto approx = make_plant(PlantKind::Cs1Approx);
  const auto truth = make_plant(PlantKind::Cs2);
  MemoryCheckpointSink a, b;
  run_pipeline(PolicyParams::initialize(PolicyConfig{}, 1), *approx, *truth, small(), &a);
  run_pipeline(PolicyParams::initialize(PolicyConfig{}, 1), *approx, *truth, small(), &b);
  EXPECT_EQ(a.checkpoints(), b.checkpoints());
}

TEST(Pipeline, DirectorySinkRefusesOverwrite) {
  const auto dir = std::filesystem::temp_directory_path() / "batchrl_sink_test";
  std::filesystem::remove_all(dir);
  DirectoryCheckpointSink sink(dir, "ck");
  const PolicyParams p = PolicyParams::initialize(PolicyConfig{}, 1);
  EXPECT_EQ(sink.store(Phase::Online, 3, p), "ck/online_epoch_003.txt");
  EXPECT_EQ(load_checkpoint(dir / "ck/online_epoch_003.txt"), p);
  EXPECT_THROW(sink.store(Phase::Online, 3, p), StateError);
  std::filesystem::remove_all(dir);
}
