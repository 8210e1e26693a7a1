#include "batchrl/batch2batch.hpp"

#include <cmath>
#include <cstdio>

#include "batchrl/checkpoint.hpp"
#include "batchrl/errors.hpp"

namespace batchrl {

namespace {

constexpr std::uint64_t kOfflineStream = 1;
constexpr std::uint64_t kOnlineStream = 2;

}  // namespace

void B2BConfig::validate() const {
  if (offline_epochs > max_offline_epochs) {
    throw ConfigError("offline epochs (" + std::to_string(offline_epochs) +
                      ") exceed the cap max_offline_epochs (" +
                      std::to_string(max_offline_epochs) + ")");
  }
  if (offline_episodes < 10 * online_episodes) {
    throw ConfigError("offline episodes (" + std::to_string(offline_episodes) +
                      ") must be at least 10x the online episodes (" +
                      std::to_string(online_episodes) + ")");
  }
  offline_train_config().validate();
  online_train_config().validate();
}

TrainConfig B2BConfig::offline_train_config() const {
  TrainConfig c;
  c.epochs = offline_epochs;
  c.episodes = offline_episodes;
  c.adam = {offline_learning_rate, beta1, beta2, epsilon};
  c.discount = discount;
  c.seed = seed;
  c.stream = kOfflineStream;
  c.threads = threads;
  c.record_wall_time = record_wall_time;
  return c;
}

TrainConfig B2BConfig::online_train_config() const {
  TrainConfig c;
  c.epochs = online_epochs;
  c.episodes = online_episodes;
  c.adam = {online_learning_rate, beta1, beta2, epsilon};
  c.discount = discount;
  c.seed = seed;
  c.stream = kOnlineStream;
  c.threads = threads;
  c.record_wall_time = record_wall_time;
  return c;
}

std::vector<std::size_t> B2BConfig::resolved_trainable_layers(const PolicyConfig& policy) const {
  if (!trainable_layers.empty()) return trainable_layers;
  return {policy.hidden_layers - 1, policy.hidden_layers};
}

std::string_view to_string(Phase phase) { return phase == Phase::Offline ? "offline" : "online"; }

std::string checkpoint_name(Phase phase, std::size_t epoch) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_epoch_%03zu.txt", std::string(to_string(phase)).c_str(),
                epoch);
  return buf;
}

std::string MemoryCheckpointSink::store(Phase phase, std::size_t epoch,
                                        const PolicyParams& params) {
  std::string key = checkpoint_name(phase, epoch);
  if (checkpoints_.contains(key)) {
    throw StateError("checkpoint " + key + " already stored");
  }
  checkpoints_.emplace(key, write_checkpoint(params));
  return key;
}

DirectoryCheckpointSink::DirectoryCheckpointSink(std::filesystem::path root,
                                                 std::filesystem::path subdir)
    : root_(std::move(root)), subdir_(std::move(subdir)) {
  std::filesystem::create_directories(root_ / subdir_);
}

std::string DirectoryCheckpointSink::store(Phase phase, std::size_t epoch,
                                           const PolicyParams& params) {
  const std::filesystem::path rel = subdir_ / checkpoint_name(phase, epoch);
  if (std::filesystem::exists(root_ / rel)) {
    throw StateError("checkpoint " + rel.string() + " already exists");
  }
  save_checkpoint(root_ / rel, params);
  return rel.generic_string();
}

namespace {

PhaseResult run_phase(Phase phase, PolicyParams params, const PlantModel& plant,
                      const TrainConfig& train, const B2BConfig& config, CheckpointSink* sink) {
  PhaseResult result;
  if (sink) result.initial_checkpoint = sink->store(phase, 0, params);

  AdamState adam(params.size());
  std::size_t epochs_run = 0;
  for (std::size_t epoch = 1; epoch <= train.epochs; ++epoch) {
    TrainConfig one = train;
    one.epochs = 1;
    one.first_epoch = epoch;
    const EpochReport report = train_epochs(params, plant, one, adam).front();
    ++epochs_run;

    PhaseRecord record;
    record.phase = phase;
    record.epoch = epoch;
    record.report = report;
    if (sink) record.checkpoint = sink->store(phase, epoch, params);
    result.records.push_back(std::move(record));

    if (phase == Phase::Offline && config.ocp_optimum &&
        std::abs(report.returns.mean - *config.ocp_optimum) <= config.ocp_tolerance) {
      break;
    }
  }
  result.episodes_run = epochs_run * train.episodes;
  result.final_checkpoint =
      result.records.empty() ? result.initial_checkpoint : result.records.back().checkpoint;
  result.params = std::move(params);
  return result;
}

}  // namespace

PhaseResult offline_phase(PolicyParams initial, const PlantModel& approximate,
                          const B2BConfig& config, CheckpointSink* sink) {
  config.validate();
  return run_phase(Phase::Offline, std::move(initial), approximate,
                   config.offline_train_config(), config, sink);
}

PolicyParams transfer_freeze(const PolicyParams& offline,
                             std::span<const std::size_t> trainable_layers) {
  return apply_freeze(offline, trainable_layers);
}

PhaseResult online_phase(PolicyParams frozen, const PlantModel& true_plant,
                         const B2BConfig& config, CheckpointSink* sink) {
  config.validate();
  return run_phase(Phase::Online, std::move(frozen), true_plant, config.online_train_config(),
                   config, sink);
}

PipelineResult run_pipeline(PolicyParams initial, const PlantModel& approximate,
                            const PlantModel& true_plant, const B2BConfig& config,
                            CheckpointSink* sink) {
  config.validate();
  PipelineResult result;
  result.offline = offline_phase(std::move(initial), approximate, config, sink);
  const auto layers = config.resolved_trainable_layers(result.offline.params.config());
  result.transferred = transfer_freeze(result.offline.params, layers);
  result.online = online_phase(result.transferred, true_plant, config, sink);
  return result;
}

}  // namespace batchrl
