#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ccd/tensorcore/tensor.hpp"

namespace ccd::tc {

/// A trainable tensor. Gradients from every graph it is bound into are
/// summed into `grad` by Graph::backward.
struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;

  Parameter() = default;
  Parameter(std::string n, Tensor v) : name(std::move(n)), value(std::move(v)), grad(value.shape()) {}

  void zero_grad() {
    if (!grad.same_shape(value)) grad = Tensor(value.shape());
    grad.fill(0.0);
  }
};

class Graph;

/// Handle to a node of a Graph. Cheap to copy; valid while the graph lives.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
};

/// Tape of recorded operations for reverse-mode differentiation.
///
/// Nodes are appended in evaluation order, so the tape order is already a
/// topological order and backward simply walks it in reverse. A graph is
/// meant to be built, differentiated once and discarded; it is not
/// thread-safe.
class Graph {
 public:
  /// Called during backward with the node's own id. The function reads
  /// grad(self) and accumulates into its parents via grad_accumulator().
  using BackwardFn = std::function<void(Graph&, std::size_t self)>;

  Graph() { nodes_.reserve(256); }
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  Var constant(Tensor value);
  /// Binds a parameter as a leaf. Binding the same parameter twice returns the same node.
  Var param(Parameter& p);
  Var record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn);
  Var record(Tensor value, std::span<const Var> parents, BackwardFn fn);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  bool needs_grad(Var v) const { return nodes_[v.id].needs_grad; }

  /// Gradient of the loss w.r.t. a node. Zero-filled if nothing flowed into it.
  const Tensor& grad(std::size_t id);
  const Tensor& grad(Var v) { return grad(v.id); }
  Tensor& grad_accumulator(std::size_t id);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every parameter bound in
  /// this graph. `loss` must hold exactly one element.
  void backward(Var loss);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    Parameter* param = nullptr;
    bool needs_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

inline const Tensor& Var::value() const { return graph->value(id); }

}  // namespace ccd::tc
