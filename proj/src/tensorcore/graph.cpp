#include "ccd/tensorcore/graph.hpp"

#include "ccd/common/error.hpp"

namespace ccd::tc {

Var Graph::constant(Tensor value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{this, nodes_.size() - 1};
}

Var Graph::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var{this, it->second};
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  bound_.emplace(&p, nodes_.size() - 1);
  return Var{this, nodes_.size() - 1};
}

Var Graph::record(Tensor value, std::initializer_list<Var> parents, BackwardFn fn) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(fn));
}

Var Graph::record(Tensor value, std::span<const Var> parents, BackwardFn fn) {
  bool needs = false;
  for (const Var& p : parents) {
    if (p.graph != this) throw Error("operand belongs to a different graph");
    needs = needs || nodes_[p.id].needs_grad;
  }
  Node node{std::move(value), {}, {}, nullptr, needs};
  if (needs) node.backward = std::move(fn);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

const Tensor& Graph::grad(std::size_t id) { return grad_accumulator(id); }

Tensor& Graph::grad_accumulator(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.grad.same_shape(n.value)) n.grad = Tensor(n.value.shape());
  return n.grad;
}

void Graph::backward(Var loss) {
  if (loss.graph != this) throw Error("loss belongs to a different graph");
  if (nodes_[loss.id].value.size() != 1) {
    throw ShapeError("backward expects a scalar loss, got " + shape_string(nodes_[loss.id].value.shape()));
  }
  for (Node& n : nodes_) n.grad = Tensor();
  grad_accumulator(loss.id).fill(1.0);

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.needs_grad || !n.grad.same_shape(n.value)) continue;
    if (n.param != nullptr) {
      Parameter& p = *n.param;
      if (!p.grad.same_shape(p.value)) p.zero_grad();
      auto dst = p.grad.values();
      auto src = n.grad.values();
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    } else if (n.backward) {
      n.backward(*this, id);
    }
  }
}

}  // namespace ccd::tc
