#pragma once

#include <cstdint>
#include <vector>

#include "ccd/tensorcore/graph.hpp"

namespace ccd::tc {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  /// Classical L2: weight_decay * param is added to the gradient before the
  /// moment updates (not decoupled weight decay).
  double weight_decay = 0.0;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
};

/// Optimizer state for a fixed, ordered parameter list.
struct AdamState {
  std::int64_t step = 0;
  std::vector<AdamMoments> moments;
};

/// Single bias-corrected Adam update of one tensor. `step` is the 1-based
/// step count after incrementing.
void adam_update(Tensor& param, const Tensor& grad, AdamMoments& moments, std::int64_t step,
                 const AdamConfig& cfg);

/// One Adam step over every parameter using its accumulated `grad`.
void adam_step(const std::vector<Parameter*>& params, AdamState& state, const AdamConfig& cfg);

}  // namespace ccd::tc
