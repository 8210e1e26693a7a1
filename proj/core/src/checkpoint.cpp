#include "batchrl/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "batchrl/errors.hpp"

namespace batchrl {

namespace {

constexpr std::string_view kMagic = "batchrl-policy";
constexpr std::string_view kVersion = "v1";

std::string join(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ',';
    out += format_double(values[i]);
  }
  return out;
}

std::vector<double> split_doubles(std::string_view text) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = text.find(',', start);
    out.push_back(parse_double(text.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::size_t parse_count(std::string_view text) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("checkpoint: bad integer '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof(buf), value, std::chars_format::general, 17);
  if (ec != std::errc()) {
    throw NumericalError("format_double: conversion failed");
  }
  return std::string(buf, ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError("bad number '" + std::string(text) + "'");
  }
  return value;
}

std::string write_checkpoint(const PolicyParams& params) {
  const PolicyConfig& c = params.config();
  const std::vector<std::size_t> frozen = params.frozen_layers();
  std::size_t covered = 0;
  for (std::size_t l : frozen) {
    for (std::size_t s = 0; s < c.subnet_count(); ++s) covered += c.block(s, l).size();
  }
  if (covered != params.frozen_count()) {
    throw ConfigError("checkpoint: freeze mask is not layer-uniform");
  }

  std::ostringstream out;
  out << kMagic << ' ' << kVersion << " state_inputs=" << c.state_inputs
      << " actions=" << c.actions << " hidden_layers=" << c.hidden_layers
      << " neurons=" << c.neurons << " activation=" << to_string(c.activation)
      << " split=" << (c.split_networks ? 1 : 0) << " history=" << c.history_depth
      << " lower=" << join(c.lower) << " upper=" << join(c.upper)
      << " state_scale=" << join(c.state_scale) << " std_scale=" << join(c.std_scale)
      << " frozen_layers=";
  for (std::size_t i = 0; i < frozen.size(); ++i) {
    if (i) out << ',';
    out << frozen[i];
  }
  out << '\n';

  const auto values = params.values();
  for (std::size_t s = 0; s < c.subnet_count(); ++s) {
    for (std::size_t l = 0; l < c.layer_count(); ++l) {
      const LayerBlock b = c.block(s, l);
      for (std::size_t i = 0; i < b.size(); ++i) {
        if (i) out << ' ';
        out << format_double(values[b.offset + i]);
      }
      out << '\n';
    }
  }
  return out.str();
}

PolicyParams read_checkpoint(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string header;
  if (!std::getline(in, header)) {
    throw ConfigError("checkpoint: empty");
  }
  std::istringstream hs(header);
  std::string magic, version;
  hs >> magic >> version;
  if (magic != kMagic || version != kVersion) {
    throw ConfigError("checkpoint: unrecognized header '" + header + "'");
  }
  std::map<std::string, std::string> fields;
  std::string token;
  while (hs >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("checkpoint: malformed header field '" + token + "'");
    }
    fields[token.substr(0, eq)] = token.substr(eq + 1);
  }
  auto field = [&](const std::string& key) -> const std::string& {
    const auto it = fields.find(key);
    if (it == fields.end()) throw ConfigError("checkpoint: header lacks '" + key + "'");
    return it->second;
  };

  PolicyConfig c;
  c.state_inputs = parse_count(field("state_inputs"));
  c.actions = parse_count(field("actions"));
  c.hidden_layers = parse_count(field("hidden_layers"));
  c.neurons = parse_count(field("neurons"));
  c.activation = parse_activation(field("activation"));
  c.split_networks = parse_count(field("split")) != 0;
  c.history_depth = parse_count(field("history"));
  c.lower = split_doubles(field("lower"));
  c.upper = split_doubles(field("upper"));
  c.state_scale = split_doubles(field("state_scale"));
  c.std_scale = split_doubles(field("std_scale"));

  PolicyParams params(c);
  auto values = params.values();
  for (std::size_t s = 0; s < c.subnet_count(); ++s) {
    for (std::size_t l = 0; l < c.layer_count(); ++l) {
      const LayerBlock b = c.block(s, l);
      std::string line;
      if (!std::getline(in, line)) {
        throw ConfigError("checkpoint: missing layer line (subnet " + std::to_string(s) +
                          ", layer " + std::to_string(l) + ")");
      }
      std::istringstream ls(line);
      std::string number;
      std::size_t i = 0;
      while (ls >> number) {
        if (i >= b.size()) throw ConfigError("checkpoint: too many values in layer line");
        values[b.offset + i++] = parse_double(number);
      }
      if (i != b.size()) {
        throw ConfigError("checkpoint: layer line has " + std::to_string(i) + " values, expected " +
                          std::to_string(b.size()));
      }
    }
  }

  const std::string& frozen = field("frozen_layers");
  if (!frozen.empty()) {
    std::vector<std::size_t> frozen_layers;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = frozen.find(',', start);
      frozen_layers.push_back(
          parse_count(std::string_view(frozen).substr(start, comma - start)));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    for (std::size_t s = 0; s < c.subnet_count(); ++s) {
      for (std::size_t l : frozen_layers) {
        if (l >= c.layer_count()) throw ConfigError("checkpoint: frozen layer out of range");
        const LayerBlock b = c.block(s, l);
        for (std::size_t i = b.offset; i < b.offset + b.size(); ++i) params.set_frozen(i, true);
      }
    }
  }
  return params;
}

void save_checkpoint(const std::filesystem::path& path, const PolicyParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write checkpoint " + path.string());
  out << write_checkpoint(params);
}

PolicyParams load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read checkpoint " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return read_checkpoint(buf.str());
}

}  // namespace batchrl
