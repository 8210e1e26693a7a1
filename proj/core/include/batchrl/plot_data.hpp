#pragma once

// Plot-ready data files derived from a finished run directory.

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "batchrl/batch2batch.hpp"
#include "batchrl/evaluation.hpp"

namespace batchrl {

struct ProgressRow {
  std::size_t epoch = 0;
  double mean = 0.0;
  double std_dev = 0.0;
  double p2 = 0.0;
  double p98 = 0.0;
  double baseline = 0.0;
  double gradient_norm = 0.0;
  double wall_time = 0.0;
};

// epoch,mean_return,std_return,p2_return,p98_return,baseline,gradient_norm,wall_time
std::string progress_csv(std::span<const PhaseRecord> records);
std::vector<ProgressRow> parse_progress_csv(const std::string& text);

// time followed by <name>_mean,<name>_p2,<name>_p98 for every state (or
// control) column, one row per interval boundary.
std::string band_csv(const TrajectoryTable& table, bool controls);

// Same columns as band_csv with a leading method column; both methods are
// written on the same time grid.
std::string overlay_csv(const TrajectoryTable& rl, const TrajectoryTable& nmpc, bool controls);

// Reads `run` (refusing when it has no manifest) and writes into the new
// directory `out`. `nmpc_run` may point at a separate nmpc-eval run whose
// trajectories are used for the overlay. Returns the files written.
std::vector<std::string> emit_plot_data(const std::filesystem::path& run,
                                        const std::filesystem::path& out,
                                        const std::optional<std::filesystem::path>& nmpc_run = {});

}  // namespace batchrl
