#include "ccd/tensorcore/nn.hpp"

#include <cmath>

#include "ccd/common/error.hpp"

namespace ccd::tc {

Tensor glorot_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor w = Tensor::zeros(fan_in, fan_out);
  for (double& x : w.values()) x = u(rng);
  return w;
}

Linear::Linear(const std::string& name, std::size_t in, std::size_t out, Rng& rng)
    : weight_(name + ".weight", glorot_uniform(in, out, rng)), bias_(name + ".bias", Tensor::zeros(1, out)) {
  if (in == 0 || out == 0) throw ConfigError(name + ": zero-sized linear layer");
}

Var Linear::operator()(Var x) const {
  Graph& g = *x.graph;
  if (x.value().cols() != weight_.value.rows()) {
    throw ShapeError(weight_.name + ": expected input width " + std::to_string(weight_.value.rows()) +
                     ", got " + std::to_string(x.value().cols()));
  }
  return add_row(matmul(x, g.param(weight_)), g.param(bias_));
}

LayerNorm::LayerNorm(const std::string& name, std::size_t dim)
    : gain_(name + ".gain", Tensor({1, dim}, 1.0)), bias_(name + ".bias", Tensor::zeros(1, dim)) {}

Var LayerNorm::operator()(Var x) const {
  Graph& g = *x.graph;
  return layer_norm(x, g.param(gain_), g.param(bias_));
}

void zero_grads(const std::vector<Parameter*>& params) {
  for (Parameter* p : params) p->zero_grad();
}

}  // namespace ccd::tc
