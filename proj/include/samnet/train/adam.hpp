#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "samnet/core/errors.hpp"
#include "samnet/model/model.hpp"

namespace samnet {

struct AdamState {
  ModelParams first_moment;
  ModelParams second_moment;
  std::uint64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState for_params(const ModelParams& p) {
    AdamState s;
    s.first_moment = zeros_like(p);
    s.second_moment = zeros_like(p);
    return s;
  }
};

/// One Adam update with bias correction. Weight decay is coupled L2: the
/// decay term is added to the gradient before the moment update.
inline void adam_step(ModelParams& params, const ModelParams& grads, AdamState& state, double lr,
                      double weight_decay = 0.0) {
  if (params.dims != grads.dims || params.dims != state.first_moment.dims ||
      params.dims != state.second_moment.dims) {
    throw DimensionError("adam_step: parameter, gradient and state shapes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t n = 0; n < params.branches.size(); ++n) {
    for (BlockKind k : kAllBlocks) {
      auto p = block(params.branches[n], k);
      auto g = block(grads.branches[n], k);
      auto m = block(state.first_moment.branches[n], k);
      auto v = block(state.second_moment.branches[n], k);
      for (std::size_t i = 0; i < p.size(); ++i) {
        const double gi = g[i] + weight_decay * p[i];
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * gi;
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * gi * gi;
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        p[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
      }
    }
  }
}

}  // namespace samnet
