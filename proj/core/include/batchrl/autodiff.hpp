#pragma once

// Reverse-mode differentiation over small dense scalar graphs.
//
// A Graph is recorded once (structure) and then evaluated any number of times
// with fresh input and parameter vectors. Nodes are appended in evaluation
// order, so the node vector itself is a valid topological order and the
// backward sweep is a single reverse pass.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace batchrl::ad {

using NodeId = std::uint32_t;

inline constexpr double kLeakyReluSlope = 0.01;

enum class Op : std::uint8_t {
  Input,
  Parameter,
  Constant,
  Add,
  Sub,
  Mul,
  Div,
  Neg,
  AddConst,
  MulConst,
  Square,
  Sqrt,
  Exp,
  Log,
  Tanh,
  Sigmoid,
  Softplus,
  LeakyRelu,
  Affine,  // args: bias, w0, x0, w1, x1, ...
  Sum,
};

struct Node {
  double value = 0.0;
  double adjoint = 0.0;
  double constant = 0.0;  // payload of Constant / AddConst / MulConst
  std::uint32_t arg_begin = 0;
  std::uint32_t arg_count = 0;
  std::uint32_t slot = 0;  // input or parameter slot
  Op op = Op::Constant;
};

class Graph {
 public:
  // Leaves. Slots are numbered in declaration order.
  NodeId input(double initial = 0.0);
  NodeId parameter(double initial = 0.0);
  NodeId constant(double value);

  NodeId add(NodeId a, NodeId b);
  NodeId sub(NodeId a, NodeId b);
  NodeId mul(NodeId a, NodeId b);
  NodeId div(NodeId a, NodeId b);
  NodeId neg(NodeId a);
  NodeId add_const(NodeId a, double c);
  NodeId mul_const(NodeId a, double c);
  NodeId square(NodeId a);
  NodeId sqrt(NodeId a);
  NodeId exp(NodeId a);
  NodeId log(NodeId a);
  NodeId tanh(NodeId a);
  NodeId sigmoid(NodeId a);
  NodeId softplus(NodeId a);
  NodeId leaky_relu(NodeId a);

  // bias + sum_i weights[i] * inputs[i]
  NodeId affine(NodeId bias, std::span<const NodeId> weights, std::span<const NodeId> inputs);
  NodeId sum(std::span<const NodeId> terms);

  // Returns the output index.
  std::size_t add_output(NodeId id);

  std::size_t input_count() const noexcept { return inputs_.size(); }
  std::size_t parameter_count() const noexcept { return parameters_.size(); }
  std::size_t output_count() const noexcept { return outputs_.size(); }
  std::size_t node_count() const noexcept { return nodes_.size(); }

  NodeId input_node(std::size_t slot) const { return inputs_.at(slot); }
  NodeId parameter_node(std::size_t slot) const { return parameters_.at(slot); }
  NodeId output_node(std::size_t index) const { return outputs_.at(index); }
  const Node& node(NodeId id) const { return nodes_.at(id); }
  double value(NodeId id) const { return nodes_.at(id).value; }

  // Re-evaluates every node. Throws ConfigError on arity mismatch.
  std::vector<double> forward(std::span<const double> inputs, std::span<const double> params);

  // Gradient of one output with respect to every parameter slot. Adjoints are
  // zero again on return. Throws StateError if forward has not been run.
  std::vector<double> backward(std::size_t output);

  // Accumulates the gradient into `gradient` (size parameter_count()).
  void backward_accumulate(std::size_t output, std::span<double> gradient, double scale = 1.0);

  // Gradient with respect to every input slot.
  std::vector<double> input_gradient(std::size_t output);

 private:
  NodeId push(Op op, double constant, std::span<const NodeId> args);
  void evaluate(Node& n) const;
  void sweep(NodeId seed, double scale);
  void clear_adjoints(NodeId seed);

  std::vector<Node> nodes_;
  std::vector<NodeId> args_;
  std::vector<NodeId> inputs_;
  std::vector<NodeId> parameters_;
  std::vector<NodeId> outputs_;
  bool evaluated_ = false;
};

// Handle for writing expressions with ordinary operators while recording
// into a Graph. Templated model code can then run on either double or Var.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, NodeId id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  NodeId id() const { return id_; }
  double value() const { return graph_->value(id_); }

 private:
  Graph* graph_ = nullptr;
  NodeId id_ = 0;
};

Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(Var a, Var b);
Var operator/(Var a, Var b);
Var operator-(Var a);
Var operator+(Var a, double c);
Var operator+(double c, Var a);
Var operator-(Var a, double c);
Var operator-(double c, Var a);
Var operator*(Var a, double c);
Var operator*(double c, Var a);
Var operator/(Var a, double c);
Var operator/(double c, Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var sqrt(Var a);

// Diagonal Gaussian log-density:
//   sum_i [ -0.5 log(2 pi) - log sigma_i - 0.5 ((u_i - mu_i) / sigma_i)^2 ]
// Throws DomainError if any sigma_i <= 0 and ConfigError on size mismatch.
double gaussian_log_density(std::span<const double> u, std::span<const double> mean,
                            std::span<const double> std_dev);

// Graph form of the same expression. Positivity of std_dev is the caller's
// responsibility (the policy head guarantees it).
NodeId gaussian_log_density(Graph& graph, std::span<const NodeId> u, std::span<const NodeId> mean,
                            std::span<const NodeId> std_dev);

// Scalar helpers shared by the graph and plain evaluation paths.
double sigmoid(double x);
double softplus(double x);
double leaky_relu(double x);

}  // namespace batchrl::ad
