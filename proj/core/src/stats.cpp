#include "batchrl/stats.hpp"

#include <algorithm>
#include <cmath>

#include "batchrl/errors.hpp"

namespace batchrl {

double percentile(std::span<const double> values, double q) {
  if (values.empty()) {
    throw ConfigError("percentile of an empty sample");
  }
  if (q < 0.0 || q > 1.0) {
    throw DomainError("percentile: q must lie in [0, 1]");
  }
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double mean_of(std::span<const double> values) {
  if (values.empty()) return 0.0;
  // Shifted by the first value, so a constant sample comes back exactly.
  const double shift = values.front();
  double sum = 0.0;
  for (double v : values) sum += v - shift;
  return shift + sum / static_cast<double>(values.size());
}

EvalReport summarize(std::span<const double> values) {
  if (values.empty()) {
    throw ConfigError("summarize: no values");
  }
  EvalReport r;
  r.count = values.size();
  r.mean = mean_of(values);
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.std_dev = std::sqrt(ss / static_cast<double>(values.size()));
  r.p2 = percentile(values, 0.02);
  r.p98 = percentile(values, 0.98);
  return r;
}

Band band(std::span<const std::vector<double>> series) {
  Band b;
  if (series.empty()) return b;
  const std::size_t n = series.front().size();
  std::vector<double> column(series.size());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < series.size(); ++k) {
      if (series[k].size() != n) throw ConfigError("band: series have different lengths");
      column[k] = series[k][i];
    }
    const EvalReport r = summarize(column);
    b.mean.push_back(r.mean);
    b.p2.push_back(r.p2);
    b.p98.push_back(r.p98);
  }
  return b;
}

}  // namespace batchrl
