#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hmgrl/params.hpp"
#include "hmgrl/tensor.hpp"

namespace hmgrl {

/// Raised when an operation produces a NaN or infinity. `op()` names the
/// first offending operation in evaluation order.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(std::string op, const std::string& detail)
      : std::runtime_error("non-finite value in '" + op + "': " + detail), op_(std::move(op)) {}
  const std::string& op() const { return op_; }

 private:
  std::string op_;
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
class Var {
 public:
  Var() = default;
  Var(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }
  bool valid() const { return graph_ != nullptr; }
  const Tensor& value() const;
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  /// Value of a 1 x 1 node.
  double item() const;

 private:
  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

/// Tape for reverse-mode differentiation over rank-2 tensors.
///
/// Nodes are appended in evaluation order, so a reverse sweep over ids is a
/// valid topological order for the backward pass. Leaves created through
/// `param()` are bound to a ModelParams entry; `parameter_gradients()` reads
/// their accumulated gradients back in ModelParams order.
class Graph {
 public:
  using BackwardFn = std::function<void(Graph&, const Tensor& out_grad)>;

  explicit Graph(const ModelParams* params = nullptr, bool track_gradients = true);
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Free leaf that receives a gradient (not bound to ModelParams).
  Var variable(Tensor value);
  /// Leaf bound to the named parameter; repeated calls return the same node.
  Var param(std::string_view name);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of the last backward() target w.r.t. node `id` (zeros if unreached).
  Tensor grad(Var v) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }
  const std::string& op_name(std::size_t id) const { return nodes_[id].op; }
  bool tracking() const { return track_; }

  void backward(Var loss);
  Gradients parameter_gradients() const;

  /// Appends an op node. `fn` runs during backward with the node's gradient;
  /// it is dropped when no parent requires a gradient.
  Var record(std::string_view op, Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(std::string_view op, Tensor value, const std::vector<Var>& parents, BackwardFn fn);

  /// Gradient accumulator of node `id`, allocated as zeros on first use.
  Tensor& grad_buffer(std::size_t id);

 private:
  struct Node {
    std::string op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
  };

  Var push_leaf(std::string op, Tensor value, bool requires_grad);

  const ModelParams* params_;
  bool track_;
  std::vector<Node> nodes_;
  std::unordered_map<std::size_t, std::size_t> param_nodes_;  // param index -> node id
};

/// Accumulates op(a) * op(b) into out, with op = transpose when the flag is set.
void accumulate_product(Tensor& out, const Tensor& a, bool transpose_a, const Tensor& b,
                        bool transpose_b);

namespace ops {

Var matmul(Var a, Var b);
/// a * b^T.
Var matmul_nt(Var a, Var b);
Var transpose(Var a);

/// Elementwise sum; `b` may also be a 1 x cols row or a 1 x 1 scalar, broadcast over `a`.
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Elementwise product of equal shapes.
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var add_scalar(Var a, double offset);
Var neg(Var a);

Var concat_cols(const std::vector<Var>& parts);
Var concat_rows(const std::vector<Var>& parts);
Var slice_cols(Var a, std::size_t start, std::size_t count);
Var slice_rows(Var a, std::size_t start, std::size_t count);
Var select_rows(Var a, const std::vector<std::size_t>& rows);

/// Sum of all elements as 1 x 1.
Var sum(Var a);
/// Column-wise mean over rows, 1 x cols.
Var mean_rows(Var a);
/// Column-wise sum over rows, 1 x cols.
Var sum_rows(Var a);

Var square(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var tanh(Var a);
/// max(a, 0) elementwise.
Var relu(Var a);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);
/// Diagonal of a square matrix as 1 x n.
Var diag(Var a);
/// out(i, 0) = a(i, index[i]).
Var pick(Var a, const std::vector<std::size_t>& index);

}  // namespace ops

inline Var operator+(Var a, Var b) { return ops::add(a, b); }
inline Var operator-(Var a, Var b) { return ops::sub(a, b); }
inline Var operator*(Var a, Var b) { return ops::mul(a, b); }
inline Var operator*(Var a, double s) { return ops::scale(a, s); }
inline Var operator*(double s, Var a) { return ops::scale(a, s); }
inline Var operator+(Var a, double s) { return ops::add_scalar(a, s); }
inline Var operator-(Var a) { return ops::neg(a); }

}  // namespace hmgrl
