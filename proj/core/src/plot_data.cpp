#include "batchrl/plot_data.hpp"

#include <map>
#include <sstream>

#include "batchrl/checkpoint.hpp"
#include "batchrl/errors.hpp"
#include "batchrl/run_directory.hpp"
#include "batchrl/stats.hpp"

namespace batchrl {

namespace fs = std::filesystem;

std::string progress_csv(std::span<const PhaseRecord> records) {
  std::string out =
      "epoch,mean_return,std_return,p2_return,p98_return,baseline,gradient_norm,wall_time\n";
  for (const PhaseRecord& r : records) {
    const EpochReport& e = r.report;
    out += std::to_string(r.epoch);
    for (double v : {e.returns.mean, e.returns.std_dev, e.returns.p2, e.returns.p98, e.baseline,
                     e.gradient_norm, e.wall_time}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

std::vector<ProgressRow> parse_progress_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);
  if (line.rfind("epoch,mean_return,", 0) != 0) throw ConfigError("not a progress file");
  std::vector<ProgressRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream cells(line);
    std::string cell;
    std::vector<std::string> v;
    while (std::getline(cells, cell, ',')) v.push_back(cell);
    if (v.size() != 8) throw ConfigError("malformed progress row: " + line);
    ProgressRow r;
    r.epoch = static_cast<std::size_t>(std::stoull(v[0]));
    r.mean = parse_double(v[1]);
    r.std_dev = parse_double(v[2]);
    r.p2 = parse_double(v[3]);
    r.p98 = parse_double(v[4]);
    r.baseline = parse_double(v[5]);
    r.gradient_norm = parse_double(v[6]);
    r.wall_time = parse_double(v[7]);
    rows.push_back(r);
  }
  return rows;
}

namespace {

struct Grid {
  std::vector<double> time;
  // per column, per time index: samples across episodes
  std::vector<std::vector<std::vector<double>>> samples;
};

Grid collect(const TrajectoryTable& table, bool controls) {
  const std::size_t columns = controls ? table.controls : table.states;
  std::map<std::size_t, double> times;
  for (std::size_t r = 0; r < table.time.size(); ++r) {
    if (controls && table.u[r].empty()) continue;
    times.emplace(table.interval[r], table.time[r]);
  }
  Grid g;
  std::map<std::size_t, std::size_t> index;
  for (const auto& [interval, t] : times) {
    index.emplace(interval, g.time.size());
    g.time.push_back(t);
  }
  g.samples.assign(columns, std::vector<std::vector<double>>(g.time.size()));
  for (std::size_t r = 0; r < table.time.size(); ++r) {
    const auto& row = controls ? table.u[r] : table.x[r];
    if (row.empty()) continue;
    const std::size_t i = index.at(table.interval[r]);
    for (std::size_t c = 0; c < columns; ++c) g.samples[c][i].push_back(row[c]);
  }
  return g;
}

std::string header(const TrajectoryTable& table, bool controls, bool with_method) {
  std::string out = with_method ? "method,time" : "time";
  const std::size_t columns = controls ? table.controls : table.states;
  const char prefix = controls ? 'u' : 'x';
  for (std::size_t c = 0; c < columns; ++c) {
    const std::string name = prefix + std::to_string(c + 1);
    out += "," + name + "_mean," + name + "_p2," + name + "_p98";
  }
  return out + "\n";
}

std::string rows(const Grid& g, const std::string& method) {
  std::string out;
  for (std::size_t i = 0; i < g.time.size(); ++i) {
    if (!method.empty()) out += method + ",";
    out += format_double(g.time[i]);
    for (const auto& column : g.samples) {
      const EvalReport r = summarize(column[i]);
      out += "," + format_double(r.mean) + "," + format_double(r.p2) + "," + format_double(r.p98);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::string band_csv(const TrajectoryTable& table, bool controls) {
  return header(table, controls, false) + rows(collect(table, controls), "");
}

std::string overlay_csv(const TrajectoryTable& rl, const TrajectoryTable& nmpc, bool controls) {
  const Grid a = collect(rl, controls);
  const Grid b = collect(nmpc, controls);
  if (a.time != b.time || a.samples.size() != b.samples.size()) {
    throw ConfigError("policy and NMPC trajectories are on different time grids");
  }
  return header(rl, controls, true) + rows(a, "rl") + rows(b, "nmpc");
}

namespace {

constexpr const char* kReadme = R"(Plot data
=========

All files are comma separated with a header row. Numbers carry 17
significant digits. Percentiles interpolate linearly between order
statistics.

reward_per_epoch.csv
  phase        offline or online
  epoch        epoch number within the phase (1-based)
  index        running epoch count across both phases
  mean_return, std_return, p2_return, p98_return
               statistics of the episode returns collected in that epoch

state_bands.csv / control_bands.csv
  time         start of the interval (states also at the batch end)
  xI_mean, xI_p2, xI_p98 (uI_* for controls)
               mean, 2nd and 98th percentile across evaluation episodes

overlay_states.csv / overlay_controls.csv
  method       rl (evaluated policy) or nmpc (shrinking-horizon NMPC)
  remaining columns as in the band files; both methods share the time grid
)";

void require_manifest(const fs::path& root) { read_manifest(root); }

std::optional<TrajectoryTable> load_table(const fs::path& file) {
  if (!fs::exists(file)) return std::nullopt;
  return parse_trajectories_csv(read_text_file(file));
}

}  // namespace

std::vector<std::string> emit_plot_data(const fs::path& run, const fs::path& out,
                                        const std::optional<fs::path>& nmpc_run) {
  require_manifest(run);
  if (nmpc_run) require_manifest(*nmpc_run);

  std::string reward =
      "phase,epoch,index,mean_return,std_return,p2_return,p98_return\n";
  std::size_t index = 0;
  bool have_progress = false;
  for (const char* phase : {"offline", "online"}) {
    const fs::path file = run / ("progress_" + std::string(phase) + ".csv");
    if (!fs::exists(file)) continue;
    have_progress = true;
    for (const ProgressRow& r : parse_progress_csv(read_text_file(file))) {
      reward += std::string(phase) + "," + std::to_string(r.epoch) + "," +
                std::to_string(++index) + "," + format_double(r.mean) + "," +
                format_double(r.std_dev) + "," + format_double(r.p2) + "," +
                format_double(r.p98) + "\n";
    }
  }

  auto rl = load_table(run / "evaluation" / "trajectories.csv");
  auto nmpc = load_table((nmpc_run ? *nmpc_run : run) / "nmpc" / "trajectories.csv");
  if (!have_progress && !rl && !nmpc) {
    throw ConfigError("'" + run.string() + "' holds neither training progress nor trajectories");
  }

  RunDirectory dir(out, "emit-plots");
  std::vector<std::string> files;
  auto put = [&](const std::string& name, const std::string& text) {
    dir.write(name, text);
    files.push_back(name);
  };
  if (have_progress) put("reward_per_epoch.csv", reward);
  const TrajectoryTable* bands = rl ? &*rl : (nmpc ? &*nmpc : nullptr);
  if (bands) {
    put("state_bands.csv", band_csv(*bands, false));
    put("control_bands.csv", band_csv(*bands, true));
  }
  if (rl && nmpc) {
    put("overlay_states.csv", overlay_csv(*rl, *nmpc, false));
    put("overlay_controls.csv", overlay_csv(*rl, *nmpc, true));
  }
  put("README.md", kReadme);
  dir.finalize("{\"source\": \"" + fs::absolute(run).generic_string() + "\"}");
  return files;
}

}  // namespace batchrl
