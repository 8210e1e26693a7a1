#pragma once

// Text checkpoint format for policy parameters.
//
//   line 1:  batchrl-policy v1 key=value ... (configuration + frozen layers)
//   line 2+: one line per (sub-network, layer), weights row-major then biases,
//            whitespace separated, 17 significant digits.
//
// Writing then reading reproduces every value bit for bit.

#include <filesystem>
#include <string>
#include <string_view>

#include "batchrl/policy.hpp"

namespace batchrl {

std::string write_checkpoint(const PolicyParams& params);
PolicyParams read_checkpoint(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params);
PolicyParams load_checkpoint(const std::filesystem::path& path);

// Shortest-exact formatting helpers shared with the CSV writers.
std::string format_double(double value);
double parse_double(std::string_view text);

}  // namespace batchrl
