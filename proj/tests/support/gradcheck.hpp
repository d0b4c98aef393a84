#pragma once

// Central finite-difference oracle for gradient checks. Independent of the
// backward implementations: it only evaluates the forward pass.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "ccd/tensorcore/graph.hpp"

namespace ccd::testing {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // parameter name with the largest error
};

/// `loss` must build a fresh forward pass on the given graph and return a
/// scalar. It is called once for the analytic gradient and twice per
/// perturbed entry.
inline GradCheckResult grad_check(const std::vector<tc::Parameter*>& params,
                                  const std::function<tc::Var(tc::Graph&)>& loss, double eps = 1e-5) {
  for (auto* p : params) p->zero_grad();
  {
    tc::Graph g;
    g.backward(loss(g));
  }
  GradCheckResult result;
  for (auto* p : params) {
    const tc::Tensor analytic = p->grad;
    double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      double up, down;
      {
        tc::Graph g;
        up = loss(g).value()[0];
      }
      p->value[i] = orig - eps;
      {
        tc::Graph g;
        down = loss(g).value()[0];
      }
      p->value[i] = orig;
      const double numeric = (up - down) / (2.0 * eps);
      diff2 += (numeric - analytic[i]) * (numeric - analytic[i]);
      a2 += analytic[i] * analytic[i];
      n2 += numeric * numeric;
    }
    const double rel = std::sqrt(diff2) / std::max({std::sqrt(a2), std::sqrt(n2), 1e-7});
    if (rel > result.max_rel_error || result.worst.empty()) {
      result.max_rel_error = std::max(result.max_rel_error, rel);
      if (rel >= result.max_rel_error) result.worst = p->name;
    }
  }
  return result;
}

}  // namespace ccd::testing
