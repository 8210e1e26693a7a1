#pragma once

// Batch-to-batch learning: train offline on the approximate model, freeze
// the early layers, then adapt the remaining layers on the true plant with a
// small number of episodes per epoch.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "batchrl/plants.hpp"
#include "batchrl/policy.hpp"
#include "batchrl/reinforce.hpp"

namespace batchrl {

struct B2BConfig {
  std::size_t offline_epochs = 100;
  std::size_t max_offline_epochs = 100;
  std::size_t offline_episodes = 800;
  double offline_learning_rate = 1e-2;

  std::size_t online_epochs = 4;
  std::size_t online_episodes = 25;
  double online_learning_rate = 1e-3;
  // Empty selects the last hidden layer and the output layer.
  std::vector<std::size_t> trainable_layers;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double discount = 1.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool record_wall_time = false;

  // Optional stopping rule: end the offline phase once the epoch mean return
  // is within `ocp_tolerance` of this optimum.
  std::optional<double> ocp_optimum;
  double ocp_tolerance = 0.0;

  bool operator==(const B2BConfig&) const = default;

  // Throws ConfigError, e.g. when offline_episodes < 10 * online_episodes.
  void validate() const;

  TrainConfig offline_train_config() const;
  TrainConfig online_train_config() const;
  std::vector<std::size_t> resolved_trainable_layers(const PolicyConfig& policy) const;
};

enum class Phase { Offline, Online };
std::string_view to_string(Phase phase);

struct PhaseRecord {
  Phase phase = Phase::Offline;
  std::size_t epoch = 0;
  EpochReport report;
  std::string checkpoint;  // reference returned by the sink
};

// Receives one checkpoint per epoch (epoch 0 is the phase's starting point)
// and returns a reference to it. Stored checkpoints are never rewritten.
class CheckpointSink {
 public:
  virtual ~CheckpointSink() = default;
  virtual std::string store(Phase phase, std::size_t epoch, const PolicyParams& params) = 0;
};

class MemoryCheckpointSink : public CheckpointSink {
 public:
  std::string store(Phase phase, std::size_t epoch, const PolicyParams& params) override;
  const std::map<std::string, std::string>& checkpoints() const { return checkpoints_; }

 private:
  std::map<std::string, std::string> checkpoints_;
};

// Writes <dir>/<phase>_epoch_NNN.txt and returns the path relative to `root`.
class DirectoryCheckpointSink : public CheckpointSink {
 public:
  DirectoryCheckpointSink(std::filesystem::path root, std::filesystem::path subdir);
  std::string store(Phase phase, std::size_t epoch, const PolicyParams& params) override;

 private:
  std::filesystem::path root_;
  std::filesystem::path subdir_;
};

std::string checkpoint_name(Phase phase, std::size_t epoch);

struct PhaseResult {
  PolicyParams params;
  std::vector<PhaseRecord> records;  // one per trained epoch
  std::string initial_checkpoint;
  std::string final_checkpoint;
  std::size_t episodes_run = 0;
};

PhaseResult offline_phase(PolicyParams initial, const PlantModel& approximate,
                          const B2BConfig& config, CheckpointSink* sink = nullptr);

// Copies the offline parameters and freezes everything outside
// `trainable_layers`.
PolicyParams transfer_freeze(const PolicyParams& offline,
                             std::span<const std::size_t> trainable_layers);

// Adam state is reset at the start of this phase.
PhaseResult online_phase(PolicyParams frozen, const PlantModel& true_plant,
                         const B2BConfig& config, CheckpointSink* sink = nullptr);

struct PipelineResult {
  PhaseResult offline;
  PolicyParams transferred;
  PhaseResult online;
};

PipelineResult run_pipeline(PolicyParams initial, const PlantModel& approximate,
                            const PlantModel& true_plant, const B2BConfig& config,
                            CheckpointSink* sink = nullptr);

}  // namespace batchrl
