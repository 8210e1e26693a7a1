#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace batchrl {

// Monte-Carlo summary of a set of returns.
struct EvalReport {
  std::size_t count = 0;
  double mean = 0.0;
  double std_dev = 0.0;  // population (divide by n)
  double p2 = 0.0;
  double p98 = 0.0;
};

// Percentile with linear interpolation between order statistics
// (position q * (n - 1) in the sorted sample). q in [0, 1].
double percentile(std::span<const double> values, double q);

// Arithmetic mean; 0 for an empty span.
double mean_of(std::span<const double> values);

EvalReport summarize(std::span<const double> values);

// Column-wise mean / p2 / p98 over equally long series.
struct Band {
  std::vector<double> mean;
  std::vector<double> p2;
  std::vector<double> p98;
};
Band band(std::span<const std::vector<double>> series);

}  // namespace batchrl
