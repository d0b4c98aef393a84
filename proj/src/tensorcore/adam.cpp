#include "ccd/tensorcore/adam.hpp"

#include <cmath>

#include "ccd/common/error.hpp"

namespace ccd::tc {

void adam_update(Tensor& param, const Tensor& grad, AdamMoments& moments, std::int64_t step,
                 const AdamConfig& cfg) {
  if (!grad.same_shape(param)) {
    throw ShapeError("adam: gradient " + shape_string(grad.shape()) + " does not match parameter " +
                     shape_string(param.shape()));
  }
  if (!moments.m.same_shape(param)) moments.m = Tensor(param.shape());
  if (!moments.v.same_shape(param)) moments.v = Tensor(param.shape());

  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(step));
  auto p = param.values();
  auto gr = grad.values();
  auto m = moments.m.values();
  auto v = moments.v.values();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double gi = gr[i] + cfg.weight_decay * p[i];
    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
    const double mhat = m[i] / c1;
    const double vhat = v[i] / c2;
    p[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
  }
}

void adam_step(const std::vector<Parameter*>& params, AdamState& state, const AdamConfig& cfg) {
  if (state.moments.empty()) state.moments.resize(params.size());
  if (state.moments.size() != params.size()) {
    throw ShapeError("adam: optimizer state tracks " + std::to_string(state.moments.size()) +
                     " tensors, given " + std::to_string(params.size()));
  }
  ++state.step;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    if (!p.grad.same_shape(p.value)) p.zero_grad();
    adam_update(p.value, p.grad, state.moments[i], state.step, cfg);
  }
}

}  // namespace ccd::tc
