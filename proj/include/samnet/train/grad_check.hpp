#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "samnet/data/generator.hpp"
#include "samnet/losses/losses.hpp"
#include "samnet/model/model.hpp"
#include "samnet/train/config.hpp"
#include "samnet/train/reference_loss.hpp"

namespace samnet {

inline constexpr double kFiniteDifferenceStep = 1e-5;
inline constexpr double kRelativeErrorFloor = 1e-8;

struct BlockCheck {
  std::size_t branch = 0;
  BlockKind kind = BlockKind::EmbedWeight;
  std::size_t entries = 0;
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  bool passed = true;
};

struct GradCheckReport {
  std::vector<BlockCheck> blocks;
  double tolerance = 0.0;
  bool passed = true;

  double max_relative_error() const {
    double m = 0.0;
    for (const auto& b : blocks) m = std::max(m, b.max_relative_error);
    return m;
  }

  bool has_block(BlockKind k) const {
    return std::any_of(blocks.begin(), blocks.end(), [k](const BlockCheck& b) { return b.kind == k; });
  }
};

/// Fourth-order central finite differences of the total loss,
///   g = [-L(t+2h) + 8 L(t+h) - 8 L(t-h) + L(t-2h)] / (12 h),
/// over every parameter entry. The loss is evaluated by the independent
/// forward-only reference in long double. Assignments and normalization
/// ranges are held at their values at the unperturbed point, matching what
/// the analytic gradient differentiates.
inline ModelParams finite_difference_gradient(std::span<const VoteSample> batch, const ModelParams& params,
                                              LossOptions opt, double step = kFiniteDifferenceStep) {
  using Real = long double;
  opt.compute_grads = false;
  opt.frozen_assignments = nullptr;
  opt.frozen_ranges = nullptr;
  const LossBundle base = total_loss(batch, params, opt);

  reference::Params<Real> work = reference::widen<Real>(params);
  const auto ranges = reference::memory_ranges(work);
  auto loss = [&] { return reference::total_loss<Real>(batch, work, opt, base.assignments, ranges); };

  const Real h = static_cast<Real>(step);
  ModelParams numeric = zeros_like(params);
  for (std::size_t n = 0; n < work.branches.size(); ++n) {
    for (BlockKind k : kAllBlocks) {
      auto& w = work.branches[n].block(k);
      auto out = block(numeric.branches[n], k);
      for (std::size_t i = 0; i < w.size(); ++i) {
        const Real orig = w[i];
        w[i] = orig + 2 * h;
        const Real p2 = loss();
        w[i] = orig + h;
        const Real p1 = loss();
        w[i] = orig - h;
        const Real m1 = loss();
        w[i] = orig - 2 * h;
        const Real m2 = loss();
        w[i] = orig;
        out[i] = static_cast<double>((-p2 + 8 * p1 - 8 * m1 + m2) / (12 * h));
      }
    }
  }
  return numeric;
}

/// Per-block max of |analytic - numeric| / (|numeric| + 1e-8).
inline GradCheckReport compare_gradients(const ModelParams& analytic, const ModelParams& numeric, double tolerance) {
  if (analytic.dims != numeric.dims) throw DimensionError("compare_gradients: dims differ");
  GradCheckReport report;
  report.tolerance = tolerance;
  for (std::size_t n = 0; n < analytic.branches.size(); ++n) {
    for (BlockKind k : kAllBlocks) {
      auto a = block(analytic.branches[n], k);
      auto f = block(numeric.branches[n], k);
      if (a.empty()) continue;
      BlockCheck bc{n, k, a.size(), 0.0, 0.0, true};
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double abs_err = std::abs(a[i] - f[i]);
        bc.max_absolute_error = std::max(bc.max_absolute_error, abs_err);
        bc.max_relative_error = std::max(bc.max_relative_error, abs_err / (std::abs(f[i]) + kRelativeErrorFloor));
      }
      bc.passed = bc.max_relative_error < tolerance;
      report.passed = report.passed && bc.passed;
      report.blocks.push_back(bc);
    }
  }
  return report;
}

/// Optional hook applied to the analytic gradient before comparison.
using GradientTransform = std::function<void(ModelParams&)>;

inline GradCheckReport grad_check(std::span<const VoteSample> batch, const ModelParams& params,
                                  const LossOptions& opt, double tolerance,
                                  const GradientTransform& transform = {}) {
  LossOptions with_grads = opt;
  with_grads.compute_grads = true;
  with_grads.frozen_assignments = nullptr;
  with_grads.frozen_ranges = nullptr;
  LossBundle analytic = total_loss(batch, params, with_grads);
  if (transform) transform(analytic.grads);
  const ModelParams numeric = finite_difference_gradient(batch, params, opt);
  return compare_gradients(analytic.grads, numeric, tolerance);
}

/// Number of samples in the batch the config-level check differentiates.
inline constexpr std::size_t kGradCheckBatch = 8;

/// Synthetic batch compatible with a config's data dims.
inline std::vector<VoteSample> grad_check_batch(const TrainConfig& config, std::size_t count = kGradCheckBatch) {
  GeneratorConfig g;
  g.feature_dim = config.dims.feature_dim;
  g.categories = config.dims.categories;
  g.annotators = config.dims.branches;
  g.samples = count;
  g.seed = config.seed;
  return generate(make_generator_spec(g)).samples;
}

/// Gradient check of the full training loss on freshly initialized
/// parameters and a generated batch, under the config's ablations.
inline GradCheckReport grad_check(const TrainConfig& config, double tolerance,
                                  const GradientTransform& transform = {}) {
  config.validate();
  const Dims dims = config.model_dims();
  if (parameter_count(zeros_like(dims)) > 10000) {
    throw InvalidArgument("grad_check: more than 1e4 parameters; use desk-scale dims");
  }
  const ModelParams params = init_params(dims, config.seed);
  const auto batch = grad_check_batch(config);
  LossOptions opt;
  opt.mode = config.effective_mode();
  opt.terms.subjectivity = config.ablation.use_subjectivity_loss;
  return grad_check(batch, params, opt, tolerance, transform);
}

}  // namespace samnet
