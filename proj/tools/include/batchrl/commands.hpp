#pragma once

// The CLI subcommands as plain functions. Each one writes a fresh run
// directory and returns the numbers it reported.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "batchrl/batch2batch.hpp"
#include "batchrl/config.hpp"
#include "batchrl/stats.hpp"

namespace batchrl::cli {

namespace fs = std::filesystem;

struct OfflineOutcome {
  std::vector<PhaseRecord> records;
  std::string final_checkpoint;
  std::optional<double> ocp_optimum;
};

struct OnlineOutcome {
  std::vector<PhaseRecord> records;
  std::string final_checkpoint;
  std::size_t true_plant_episodes = 0;
  bool frozen_unchanged = false;
};

struct EvaluationOutcome {
  EvalReport report;
};

struct PipelineOutcome {
  OfflineOutcome offline;
  OnlineOutcome online;
  std::optional<EvalReport> evaluation;
  std::optional<EvalReport> nmpc;
};

OfflineOutcome train_offline(const RunConfig& config, const fs::path& out);
OnlineOutcome adapt_online(const RunConfig& config, const fs::path& checkpoint, const fs::path& out);
PipelineOutcome run_pipeline(const RunConfig& config, const fs::path& out);
EvaluationOutcome evaluate_policy(const RunConfig& config, const fs::path& checkpoint,
                                  const fs::path& out);
EvaluationOutcome nmpc_eval(const RunConfig& config, const fs::path& out);
std::vector<std::string> emit_plots(const fs::path& run, const fs::path& out,
                                    const std::optional<fs::path>& nmpc_run);

// Parses argv and dispatches. Returns the process exit code: 0 success,
// 2 configuration error, 3 numerical failure, 1 anything else.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace batchrl::cli
