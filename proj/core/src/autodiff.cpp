#include "batchrl/autodiff.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "batchrl/errors.hpp"

namespace batchrl::ad {

double sigmoid(double x) {
  if (x >= 0.0) {
    return 1.0 / (1.0 + std::exp(-x));
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (x > 0.0) {
    return x + std::log1p(std::exp(-x));
  }
  return std::log1p(std::exp(x));
}

double leaky_relu(double x) { return x > 0.0 ? x : kLeakyReluSlope * x; }

NodeId Graph::push(Op op, double constant, std::span<const NodeId> args) {
  Node n;
  n.op = op;
  n.constant = constant;
  n.arg_begin = static_cast<std::uint32_t>(args_.size());
  n.arg_count = static_cast<std::uint32_t>(args.size());
  args_.insert(args_.end(), args.begin(), args.end());
  evaluate(n);
  nodes_.push_back(n);
  evaluated_ = false;
  return static_cast<NodeId>(nodes_.size() - 1);
}

NodeId Graph::input(double initial) {
  Node n;
  n.op = Op::Input;
  n.value = initial;
  n.slot = static_cast<std::uint32_t>(inputs_.size());
  nodes_.push_back(n);
  const auto id = static_cast<NodeId>(nodes_.size() - 1);
  inputs_.push_back(id);
  evaluated_ = false;
  return id;
}

NodeId Graph::parameter(double initial) {
  Node n;
  n.op = Op::Parameter;
  n.value = initial;
  n.slot = static_cast<std::uint32_t>(parameters_.size());
  nodes_.push_back(n);
  const auto id = static_cast<NodeId>(nodes_.size() - 1);
  parameters_.push_back(id);
  evaluated_ = false;
  return id;
}

NodeId Graph::constant(double value) { return push(Op::Constant, value, {}); }

NodeId Graph::add(NodeId a, NodeId b) {
  const NodeId args[] = {a, b};
  return push(Op::Add, 0.0, args);
}
NodeId Graph::sub(NodeId a, NodeId b) {
  const NodeId args[] = {a, b};
  return push(Op::Sub, 0.0, args);
}
NodeId Graph::mul(NodeId a, NodeId b) {
  const NodeId args[] = {a, b};
  return push(Op::Mul, 0.0, args);
}
NodeId Graph::div(NodeId a, NodeId b) {
  const NodeId args[] = {a, b};
  return push(Op::Div, 0.0, args);
}
NodeId Graph::neg(NodeId a) { return push(Op::Neg, 0.0, std::span(&a, 1)); }
NodeId Graph::add_const(NodeId a, double c) { return push(Op::AddConst, c, std::span(&a, 1)); }
NodeId Graph::mul_const(NodeId a, double c) { return push(Op::MulConst, c, std::span(&a, 1)); }
NodeId Graph::square(NodeId a) { return push(Op::Square, 0.0, std::span(&a, 1)); }
NodeId Graph::sqrt(NodeId a) { return push(Op::Sqrt, 0.0, std::span(&a, 1)); }
NodeId Graph::exp(NodeId a) { return push(Op::Exp, 0.0, std::span(&a, 1)); }
NodeId Graph::log(NodeId a) { return push(Op::Log, 0.0, std::span(&a, 1)); }
NodeId Graph::tanh(NodeId a) { return push(Op::Tanh, 0.0, std::span(&a, 1)); }
NodeId Graph::sigmoid(NodeId a) { return push(Op::Sigmoid, 0.0, std::span(&a, 1)); }
NodeId Graph::softplus(NodeId a) { return push(Op::Softplus, 0.0, std::span(&a, 1)); }
NodeId Graph::leaky_relu(NodeId a) { return push(Op::LeakyRelu, 0.0, std::span(&a, 1)); }

NodeId Graph::affine(NodeId bias, std::span<const NodeId> weights, std::span<const NodeId> inputs) {
  if (weights.size() != inputs.size()) {
    throw ConfigError("affine: " + std::to_string(weights.size()) + " weights for " +
                      std::to_string(inputs.size()) + " inputs");
  }
  std::vector<NodeId> args;
  args.reserve(1 + 2 * weights.size());
  args.push_back(bias);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    args.push_back(weights[i]);
    args.push_back(inputs[i]);
  }
  return push(Op::Affine, 0.0, args);
}

NodeId Graph::sum(std::span<const NodeId> terms) { return push(Op::Sum, 0.0, terms); }

std::size_t Graph::add_output(NodeId id) {
  if (id >= nodes_.size()) {
    throw ConfigError("add_output: unknown node " + std::to_string(id));
  }
  outputs_.push_back(id);
  return outputs_.size() - 1;
}

void Graph::evaluate(Node& n) const {
  const NodeId* a = args_.data() + n.arg_begin;
  auto v = [&](std::size_t i) { return nodes_[a[i]].value; };
  switch (n.op) {
    case Op::Input:
    case Op::Parameter:
      break;
    case Op::Constant:
      n.value = n.constant;
      break;
    case Op::Add:
      n.value = v(0) + v(1);
      break;
    case Op::Sub:
      n.value = v(0) - v(1);
      break;
    case Op::Mul:
      n.value = v(0) * v(1);
      break;
    case Op::Div:
      n.value = v(0) / v(1);
      break;
    case Op::Neg:
      n.value = -v(0);
      break;
    case Op::AddConst:
      n.value = v(0) + n.constant;
      break;
    case Op::MulConst:
      n.value = v(0) * n.constant;
      break;
    case Op::Square:
      n.value = v(0) * v(0);
      break;
    case Op::Sqrt:
      n.value = std::sqrt(v(0));
      break;
    case Op::Exp:
      n.value = std::exp(v(0));
      break;
    case Op::Log:
      n.value = std::log(v(0));
      break;
    case Op::Tanh:
      n.value = std::tanh(v(0));
      break;
    case Op::Sigmoid:
      n.value = ad::sigmoid(v(0));
      break;
    case Op::Softplus:
      n.value = ad::softplus(v(0));
      break;
    case Op::LeakyRelu:
      n.value = ad::leaky_relu(v(0));
      break;
    case Op::Affine: {
      double acc = v(0);
      for (std::uint32_t i = 1; i < n.arg_count; i += 2) {
        acc += v(i) * v(i + 1);
      }
      n.value = acc;
      break;
    }
    case Op::Sum: {
      double acc = 0.0;
      for (std::uint32_t i = 0; i < n.arg_count; ++i) {
        acc += v(i);
      }
      n.value = acc;
      break;
    }
  }
}

std::vector<double> Graph::forward(std::span<const double> inputs, std::span<const double> params) {
  if (inputs.size() != inputs_.size()) {
    throw ConfigError("forward: expected " + std::to_string(inputs_.size()) + " inputs, got " +
                      std::to_string(inputs.size()));
  }
  if (params.size() != parameters_.size()) {
    throw ConfigError("forward: expected " + std::to_string(parameters_.size()) +
                      " parameters, got " + std::to_string(params.size()));
  }
  for (auto& n : nodes_) {
    switch (n.op) {
      case Op::Input:
        n.value = inputs[n.slot];
        break;
      case Op::Parameter:
        n.value = params[n.slot];
        break;
      default:
        evaluate(n);
    }
  }
  evaluated_ = true;
  std::vector<double> out;
  out.reserve(outputs_.size());
  for (NodeId id : outputs_) {
    out.push_back(nodes_[id].value);
  }
  return out;
}

void Graph::sweep(NodeId seed, double scale) {
  nodes_[seed].adjoint = scale;
  for (std::size_t k = seed + 1; k-- > 0;) {
    const Node& n = nodes_[k];
    const double g = n.adjoint;
    if (g == 0.0 || n.arg_count == 0) {
      continue;
    }
    const NodeId* a = args_.data() + n.arg_begin;
    auto node = [&](std::size_t i) -> Node& { return nodes_[a[i]]; };
    switch (n.op) {
      case Op::Input:
      case Op::Parameter:
      case Op::Constant:
        break;
      case Op::Add:
        node(0).adjoint += g;
        node(1).adjoint += g;
        break;
      case Op::Sub:
        node(0).adjoint += g;
        node(1).adjoint -= g;
        break;
      case Op::Mul: {
        const double x = node(0).value;
        const double y = node(1).value;
        node(0).adjoint += g * y;
        node(1).adjoint += g * x;
        break;
      }
      case Op::Div: {
        const double y = node(1).value;
        node(0).adjoint += g / y;
        node(1).adjoint -= g * n.value / y;
        break;
      }
      case Op::Neg:
        node(0).adjoint -= g;
        break;
      case Op::AddConst:
        node(0).adjoint += g;
        break;
      case Op::MulConst:
        node(0).adjoint += g * n.constant;
        break;
      case Op::Square:
        node(0).adjoint += 2.0 * g * node(0).value;
        break;
      case Op::Sqrt:
        node(0).adjoint += 0.5 * g / n.value;
        break;
      case Op::Exp:
        node(0).adjoint += g * n.value;
        break;
      case Op::Log:
        node(0).adjoint += g / node(0).value;
        break;
      case Op::Tanh:
        node(0).adjoint += g * (1.0 - n.value * n.value);
        break;
      case Op::Sigmoid:
        node(0).adjoint += g * n.value * (1.0 - n.value);
        break;
      case Op::Softplus:
        node(0).adjoint += g * ad::sigmoid(node(0).value);
        break;
      case Op::LeakyRelu:
        // The kink at exactly 0 takes the negative-side slope.
        node(0).adjoint += g * (node(0).value > 0.0 ? 1.0 : kLeakyReluSlope);
        break;
      case Op::Affine:
        node(0).adjoint += g;
        for (std::uint32_t i = 1; i < n.arg_count; i += 2) {
          Node& w = node(i);
          Node& x = node(i + 1);
          w.adjoint += g * x.value;
          x.adjoint += g * w.value;
        }
        break;
      case Op::Sum:
        for (std::uint32_t i = 0; i < n.arg_count; ++i) {
          node(i).adjoint += g;
        }
        break;
    }
  }
}

void Graph::clear_adjoints(NodeId seed) {
  for (std::size_t k = 0; k <= seed; ++k) {
    nodes_[k].adjoint = 0.0;
  }
}

void Graph::backward_accumulate(std::size_t output, std::span<double> gradient, double scale) {
  if (!evaluated_) {
    throw StateError("backward called before forward");
  }
  if (output >= outputs_.size()) {
    throw ConfigError("backward: output index " + std::to_string(output) + " out of range");
  }
  if (gradient.size() != parameters_.size()) {
    throw ConfigError("backward: gradient buffer has wrong size");
  }
  const NodeId seed = outputs_[output];
  sweep(seed, scale);
  for (std::size_t s = 0; s < parameters_.size(); ++s) {
    gradient[s] += nodes_[parameters_[s]].adjoint;
  }
  clear_adjoints(seed);
}

std::vector<double> Graph::backward(std::size_t output) {
  std::vector<double> gradient(parameters_.size(), 0.0);
  backward_accumulate(output, gradient);
  return gradient;
}

std::vector<double> Graph::input_gradient(std::size_t output) {
  if (!evaluated_) {
    throw StateError("backward called before forward");
  }
  if (output >= outputs_.size()) {
    throw ConfigError("backward: output index " + std::to_string(output) + " out of range");
  }
  const NodeId seed = outputs_[output];
  sweep(seed, 1.0);
  std::vector<double> gradient(inputs_.size());
  for (std::size_t s = 0; s < inputs_.size(); ++s) {
    gradient[s] = nodes_[inputs_[s]].adjoint;
  }
  clear_adjoints(seed);
  return gradient;
}

Var operator+(Var a, Var b) { return {&a.graph(), a.graph().add(a.id(), b.id())}; }
Var operator-(Var a, Var b) { return {&a.graph(), a.graph().sub(a.id(), b.id())}; }
Var operator*(Var a, Var b) { return {&a.graph(), a.graph().mul(a.id(), b.id())}; }
Var operator/(Var a, Var b) { return {&a.graph(), a.graph().div(a.id(), b.id())}; }
Var operator-(Var a) { return {&a.graph(), a.graph().neg(a.id())}; }
Var operator+(Var a, double c) { return {&a.graph(), a.graph().add_const(a.id(), c)}; }
Var operator+(double c, Var a) { return a + c; }
Var operator-(Var a, double c) { return a + (-c); }
Var operator-(double c, Var a) { return (-a) + c; }
Var operator*(Var a, double c) { return {&a.graph(), a.graph().mul_const(a.id(), c)}; }
Var operator*(double c, Var a) { return a * c; }
Var operator/(Var a, double c) { return a * (1.0 / c); }
Var operator/(double c, Var a) {
  Graph& g = a.graph();
  return {&g, g.div(g.constant(c), a.id())};
}
Var tanh(Var a) { return {&a.graph(), a.graph().tanh(a.id())}; }
Var exp(Var a) { return {&a.graph(), a.graph().exp(a.id())}; }
Var log(Var a) { return {&a.graph(), a.graph().log(a.id())}; }
Var sqrt(Var a) { return {&a.graph(), a.graph().sqrt(a.id())}; }

namespace {
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * log(2 pi)
}

double gaussian_log_density(std::span<const double> u, std::span<const double> mean,
                            std::span<const double> std_dev) {
  if (u.size() != mean.size() || u.size() != std_dev.size()) {
    throw ConfigError("gaussian_log_density: size mismatch");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!(std_dev[i] > 0.0)) {
      throw DomainError("gaussian_log_density: standard deviation must be positive, got " +
                        std::to_string(std_dev[i]));
    }
    const double z = (u[i] - mean[i]) / std_dev[i];
    total += -kHalfLog2Pi - std::log(std_dev[i]) - 0.5 * z * z;
  }
  return total;
}

NodeId gaussian_log_density(Graph& graph, std::span<const NodeId> u, std::span<const NodeId> mean,
                            std::span<const NodeId> std_dev) {
  if (u.size() != mean.size() || u.size() != std_dev.size()) {
    throw ConfigError("gaussian_log_density: size mismatch");
  }
  std::vector<NodeId> terms;
  terms.reserve(u.size());
  for (std::size_t i = 0; i < u.size(); ++i) {
    const NodeId z = graph.div(graph.sub(u[i], mean[i]), std_dev[i]);
    const NodeId penalty = graph.add(graph.log(std_dev[i]), graph.mul_const(graph.square(z), 0.5));
    terms.push_back(graph.add_const(graph.neg(penalty), -kHalfLog2Pi));
  }
  return graph.sum(terms);
}

}  // namespace batchrl::ad
