#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ccd/common/rng.hpp"
#include "ccd/tensorcore/graph.hpp"
#include "ccd/tensorcore/ops.hpp"

namespace ccd::tc {

/// Glorot/Xavier uniform initialization for a fan_in x fan_out weight.
Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// y = x W + b, with W stored as in x out.
class Linear {
 public:
  Linear() = default;
  Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng);

  Var operator()(Var x) const;

  std::size_t in_features() const { return weight_.value.rows(); }
  std::size_t out_features() const { return weight_.value.cols(); }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  void collect(std::vector<Parameter*>& out) {
    out.push_back(&weight_);
    out.push_back(&bias_);
  }

 private:
  // Bound into whichever graph the input lives in.
  mutable Parameter weight_;
  mutable Parameter bias_;
};

class LayerNorm {
 public:
  LayerNorm() = default;
  LayerNorm(const std::string& name, std::size_t dim);

  Var operator()(Var x) const;

  void collect(std::vector<Parameter*>& out) {
    out.push_back(&gain_);
    out.push_back(&bias_);
  }

 private:
  mutable Parameter gain_;
  mutable Parameter bias_;
};

void zero_grads(const std::vector<Parameter*>& params);

}  // namespace ccd::tc
