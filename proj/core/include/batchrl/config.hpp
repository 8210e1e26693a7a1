#pragma once

// Run configuration. One JSON object; every key is optional and unknown keys
// are rejected. Defaults depend on the selected plant (Case Study 3 gets the
// deeper unified leaky-ReLU network), so the plant is resolved first.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "batchrl/batch2batch.hpp"
#include "batchrl/nmpc.hpp"
#include "batchrl/plants.hpp"
#include "batchrl/policy.hpp"
#include "batchrl/reinforce.hpp"

namespace batchrl {

struct PolicyOptions {
  std::size_t hidden_layers = 2;
  std::size_t neurons = 20;
  Activation activation = Activation::Tanh;
  bool split_networks = true;
  std::size_t history_depth = 1;
  // Empty means one per control.
  std::vector<double> std_scale;

  bool operator==(const PolicyOptions&) const = default;
};

struct EvaluationSettings {
  std::size_t episodes = 100;
  ActionMode mode = ActionMode::Sample;
  // Run the NMPC comparator next to the policy evaluation (smooth plants).
  bool compare_nmpc = true;

  bool operator==(const EvaluationSettings&) const = default;
};

struct RunConfig {
  PlantKind plant = PlantKind::Cs1;
  PlantKind offline_plant = PlantKind::Cs1Approx;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  PlantOptions plant_options;
  PolicyOptions policy;
  B2BConfig b2b;
  // When set, the offline phase stops once its mean return is within this
  // distance of the OCP optimum of the offline model.
  std::optional<double> stop_at_ocp_gap;
  EvaluationSettings evaluation;
  NlpSettings nmpc;

  // Throws ConfigError.
  void validate() const;
  bool operator==(const RunConfig&) const = default;
};

// Defaults for a plant: CS1 pipeline values, or the CS3 network and
// schedule when `plant` is a Case Study 3 model.
RunConfig default_config(PlantKind plant = PlantKind::Cs1);

RunConfig parse_config_text(std::string_view text);
// Throws ConfigError when the file is missing or invalid. An empty file gives
// the CS1 defaults.
RunConfig parse_config(const std::filesystem::path& path);

// Full JSON form with every key present; parse_config_text inverts it.
std::string serialize_config(const RunConfig& config);

void set_seed(RunConfig& config, std::uint64_t seed);
void set_threads(RunConfig& config, std::size_t threads);

PolicyConfig make_policy_config(const RunConfig& config, const PlantModel& plant);

}  // namespace batchrl
