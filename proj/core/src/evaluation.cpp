#include "batchrl/evaluation.hpp"

#include <sstream>

#include "batchrl/checkpoint.hpp"
#include "batchrl/errors.hpp"

namespace batchrl {

namespace {
constexpr std::uint64_t kEvaluationStream = 3;
}

EvaluationResult evaluate(const PolicyParams& params, const PlantModel& plant,
                          std::size_t episodes, std::uint64_t seed, std::size_t threads,
                          ActionMode mode) {
  if (episodes == 0) throw ConfigError("evaluation needs at least one episode");
  RolloutOptions options;
  options.mode = mode;
  options.compute_gradient = false;
  return summarize_trajectories(
      collect_episodes(params, plant, episodes, seed, kEvaluationStream, 0, threads, options));
}

std::vector<double> returns_of(const std::vector<Trajectory>& trajectories) {
  std::vector<double> r;
  r.reserve(trajectories.size());
  for (const auto& t : trajectories) r.push_back(t.total_return);
  return r;
}

EvaluationResult summarize_trajectories(std::vector<Trajectory> trajectories) {
  EvaluationResult result;
  result.report = summarize(returns_of(trajectories));
  result.trajectories = std::move(trajectories);
  return result;
}

std::string returns_csv(const std::vector<Trajectory>& trajectories) {
  std::string out = "episode,return\n";
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    out += std::to_string(k);
    out += ',';
    out += format_double(trajectories[k].total_return);
    out += '\n';
  }
  return out;
}

std::string trajectories_csv(const std::vector<Trajectory>& trajectories, double interval_length) {
  std::string out = "episode,interval,time";
  const std::size_t n = trajectories.empty() ? 0 : trajectories.front().states.front().size();
  const std::size_t m = trajectories.empty() || trajectories.front().actions.empty()
                            ? 0
                            : trajectories.front().actions.front().size();
  for (std::size_t i = 0; i < n; ++i) out += ",x" + std::to_string(i + 1);
  for (std::size_t j = 0; j < m; ++j) out += ",u" + std::to_string(j + 1);
  out += '\n';
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    const Trajectory& tr = trajectories[k];
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
      out += std::to_string(k);
      out += ',';
      out += std::to_string(t);
      out += ',';
      out += format_double(static_cast<double>(t) * interval_length);
      for (double v : tr.states[t]) {
        out += ',';
        out += format_double(v);
      }
      for (std::size_t j = 0; j < m; ++j) {
        out += ',';
        if (t < tr.actions.size()) out += format_double(tr.actions[t][j]);
      }
      out += '\n';
    }
  }
  return out;
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

}  // namespace

TrajectoryTable parse_trajectories_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trajectory file is empty");
  const auto header = split(line);
  TrajectoryTable table;
  for (const auto& h : header) {
    if (!h.empty() && h[0] == 'x') ++table.states;
    if (!h.empty() && h[0] == 'u') ++table.controls;
  }
  if (header.size() != 3 + table.states + table.controls || header[0] != "episode") {
    throw ConfigError("unexpected trajectory header: " + line);
  }
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ConfigError("trajectory row " + std::to_string(row) + " has " +
                        std::to_string(cells.size()) + " cells");
    }
    table.episode.push_back(static_cast<std::size_t>(std::stoull(cells[0])));
    table.interval.push_back(static_cast<std::size_t>(std::stoull(cells[1])));
    table.time.push_back(parse_double(cells[2]));
    std::vector<double> x, u;
    for (std::size_t i = 0; i < table.states; ++i) x.push_back(parse_double(cells[3 + i]));
    if (!cells[3 + table.states].empty() || table.controls == 0) {
      for (std::size_t j = 0; j < table.controls; ++j) {
        u.push_back(parse_double(cells[3 + table.states + j]));
      }
    }
    table.x.push_back(std::move(x));
    table.u.push_back(std::move(u));
  }
  return table;
}

}  // namespace batchrl
