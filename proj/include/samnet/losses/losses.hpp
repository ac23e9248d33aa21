#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "samnet/core/errors.hpp"
#include "samnet/core/linalg.hpp"
#include "samnet/data/dataset.hpp"
#include "samnet/matching/hungarian.hpp"
#include "samnet/model/model.hpp"

namespace samnet {

/// Floor applied to predicted probabilities inside logarithms.
inline constexpr double kLogFloor = 1e-10;
/// Guard added to the subjectivity-loss denominator.
inline constexpr double kSubjectivityDenominatorGuard = 1e-12;

// ---------------------------------------------------------------------------
// Min-max normalization

/// Offset and scale of a min-max normalization, phi(x) = (x - min) / (max - min).
/// A zero span marks a constant matrix, which normalizes to all zeros.
struct PhiRange {
  double min = 0.0;
  double span = 0.0;
};

inline PhiRange phi_range(const Matrix& m) {
  if (m.empty()) return {};
  const auto [lo, hi] = std::minmax_element(m.flat().begin(), m.flat().end());
  return PhiRange{*lo, *hi - *lo};
}

inline Matrix normalize_phi(const Matrix& m, const PhiRange& r) {
  Matrix out(m.rows(), m.cols());
  if (r.span > 0.0) {
    auto src = m.flat();
    auto dst = out.flat();
    for (std::size_t i = 0; i < src.size(); ++i) dst[i] = (src[i] - r.min) / r.span;
  }
  return out;
}

/// Min-max normalization over all entries of one matrix.
inline Matrix normalize_phi(const Matrix& m) { return normalize_phi(m, phi_range(m)); }

// ---------------------------------------------------------------------------
// Subjectivity loss

struct SubjectivityResult {
  double value = 0.0;
  std::vector<Matrix> grads;  // d value / d M_n
  std::vector<PhiRange> ranges;
};

/// L_sub = (1/N) sum_n [1 - sum (phi(M_n) - mean_n phi(M_n))^2 /
///                          max(sum (mean_n phi(M_n))^2, guard)].
///
/// The guard only bites when every mean entry is (near) zero, so it never
/// shifts the value of a well-posed case.
///
/// The per-memory min and max are constants in the backward pass. Pass
/// `frozen` to evaluate with previously captured ranges instead of the
/// current ones.
inline SubjectivityResult subjectivity_loss(std::span<const Matrix> memories,
                                            const std::vector<PhiRange>* frozen = nullptr) {
  const std::size_t n_mem = memories.size();
  if (n_mem == 0) throw DimensionError("subjectivity_loss: no memories");
  for (const auto& m : memories) {
    if (!m.same_shape(memories[0])) throw DimensionError("subjectivity_loss: memory shapes differ");
  }
  if (frozen && frozen->size() != n_mem) throw DimensionError("subjectivity_loss: frozen range count");

  SubjectivityResult res;
  std::vector<Matrix> phi;
  phi.reserve(n_mem);
  for (std::size_t n = 0; n < n_mem; ++n) {
    const PhiRange r = frozen ? (*frozen)[n] : phi_range(memories[n]);
    res.ranges.push_back(r);
    phi.push_back(normalize_phi(memories[n], r));
  }

  const std::size_t entries = memories[0].size();
  const double inv_n = 1.0 / static_cast<double>(n_mem);
  Vector mean(entries, 0.0);
  for (const auto& p : phi) axpy(mean, p.flat(), inv_n);

  double sum_sq = 0.0;
  for (double m : mean) sum_sq += m * m;
  const bool guarded = sum_sq < kSubjectivityDenominatorGuard;
  const double denom = guarded ? kSubjectivityDenominatorGuard : sum_sq;

  double deviation_total = 0.0;
  double value = 0.0;
  for (const auto& p : phi) {
    auto f = p.flat();
    double dev = 0.0;
    for (std::size_t i = 0; i < entries; ++i) dev += (f[i] - mean[i]) * (f[i] - mean[i]);
    deviation_total += dev;
    value += 1.0 - dev / denom;
  }
  res.value = value * inv_n;

  // With T = sum_n D_n and S the denominator, L = 1 - T / (N S). The mean's
  // contribution to dT vanishes because deviations sum to zero.
  res.grads.reserve(n_mem);
  for (std::size_t n = 0; n < n_mem; ++n) {
    Matrix g(memories[n].rows(), memories[n].cols());
    const PhiRange& r = res.ranges[n];
    if (r.span > 0.0) {
      auto f = phi[n].flat();
      auto gf = g.flat();
      for (std::size_t i = 0; i < entries; ++i) {
        const double d_den = guarded ? 0.0 : deviation_total * 2.0 * mean[i] * inv_n / (denom * denom);
        const double d_phi = -inv_n * (2.0 * (f[i] - mean[i]) / denom - d_den);
        gf[i] = d_phi / r.span;
      }
    }
    res.grads.push_back(std::move(g));
  }
  return res;
}

// ---------------------------------------------------------------------------
// Distribution prediction and KL loss

/// d_hat(c) = (1/N) sum_n p_{sigma(n)}(c). Independent of sigma up to
/// summation order; the sum is taken over labels n in order.
inline Vector predict_distribution(std::span<const Vector> probs, std::span<const std::size_t> sigma) {
  if (probs.empty()) throw DimensionError("predict_distribution: no predictions");
  if (sigma.size() != probs.size()) throw DimensionError("predict_distribution: sigma length");
  Vector d(probs[0].size(), 0.0);
  for (std::size_t n = 0; n < sigma.size(); ++n) {
    if (sigma[n] >= probs.size()) throw DimensionError("predict_distribution: sigma out of range");
    axpy(d, probs[sigma[n]]);
  }
  const double inv = 1.0 / static_cast<double>(probs.size());
  for (double& x : d) x *= inv;
  return d;
}

/// Plain branch average.
inline Vector predict_distribution(std::span<const Vector> probs) {
  std::vector<std::size_t> identity(probs.size());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  return predict_distribution(probs, identity);
}

struct KlResult {
  double value = 0.0;
  Vector grad;  // d value / d d_hat
};

/// Training distribution loss -sum_c d(c) ln max(d_hat(c), 1e-10).
/// Terms with d(c) = 0 contribute exactly zero.
inline KlResult kl_loss(std::span<const double> d, std::span<const double> d_hat) {
  require_length(d_hat, d.size(), "kl_loss");
  KlResult r;
  r.grad.assign(d.size(), 0.0);
  for (std::size_t c = 0; c < d.size(); ++c) {
    if (d[c] == 0.0) continue;
    if (d_hat[c] > kLogFloor) {
      r.value -= d[c] * std::log(d_hat[c]);
      r.grad[c] = -d[c] / d_hat[c];
    } else {
      r.value -= d[c] * std::log(kLogFloor);
    }
  }
  return r;
}

// ---------------------------------------------------------------------------
// Matching loss

/// How labels are paired with branches.
enum class LossMode {
  Match,     // optimal assignment on the matching cost
  Ordered,   // sorted label n to branch n, no matching
  Dominant,  // single branch trained on the dominant label
};

/// The label set a sample presents to the pairing step for a given mode.
inline std::vector<int> pairing_labels(const VoteSample& s, LossMode mode) {
  if (mode == LossMode::Dominant) return {static_cast<int>(argmax(s.distribution))};
  return s.votes;
}

inline std::vector<std::size_t> pair_labels(std::span<const int> labels, std::span<const Vector> probs,
                                            LossMode mode) {
  if (labels.size() != probs.size()) {
    throw DimensionError("pairing: " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(probs.size()) + " branches");
  }
  if (mode == LossMode::Match) return hungarian(build_cost_matrix(labels, probs)).sigma;
  std::vector<std::size_t> identity(labels.size());
  for (std::size_t i = 0; i < identity.size(); ++i) identity[i] = i;
  return identity;
}

struct MatchingResult {
  double value = 0.0;
  std::vector<Vector> dlogits;  // per branch
};

/// -(1/N) sum_n log p_{sigma(n)}(l_n) for one sample, with gradients with
/// respect to each branch's logits. sigma carries no gradient.
inline MatchingResult matching_loss(std::span<const int> labels, const ForwardTrace& trace,
                                    std::span<const std::size_t> sigma) {
  const std::size_t n = labels.size();
  if (sigma.size() != n || trace.branches.size() != n) throw DimensionError("matching_loss: size mismatch");
  MatchingResult r;
  r.dlogits.reserve(n);
  for (const auto& b : trace.branches) r.dlogits.emplace_back(b.logits.size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& br = trace.branches.at(sigma[i]);
    const auto label = static_cast<std::size_t>(labels[i]);
    const Vector logp = log_softmax(br.logits);
    r.value -= inv_n * logp.at(label);
    auto& g = r.dlogits[sigma[i]];
    for (std::size_t c = 0; c < g.size(); ++c) g[c] += inv_n * br.probs[c];
    g[label] -= inv_n;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Total loss

struct LossTerms {
  bool subjectivity = true;
  bool matching = true;
  bool distribution = true;
};

struct LossOptions {
  LossTerms terms;
  LossMode mode = LossMode::Match;
  /// Evaluate with these assignments (one per sample) instead of solving.
  const std::vector<std::vector<std::size_t>>* frozen_assignments = nullptr;
  /// Evaluate the subjectivity term with these normalization ranges.
  const std::vector<PhiRange>* frozen_ranges = nullptr;
  bool compute_grads = true;
};

struct LossBundle {
  double l_sub = 0.0;
  double l_mat = 0.0;
  double l_kl = 0.0;
  double total = 0.0;
  ModelParams grads;
  std::vector<std::vector<std::size_t>> assignments;
  std::vector<PhiRange> phi_ranges;
};

/// Forward, pairing and all enabled losses over a batch; matching and
/// distribution terms are averaged over the batch, the subjectivity term
/// depends on the memories only. Gradients are reduced in sample order.
inline LossBundle total_loss(std::span<const VoteSample> batch, const ModelParams& params,
                             const LossOptions& opt = {}) {
  if (batch.empty()) throw InvalidArgument("total_loss: empty batch");
  if (opt.frozen_assignments && opt.frozen_assignments->size() != batch.size()) {
    throw DimensionError("total_loss: frozen assignment count");
  }
  const std::size_t n_branches = params.branches.size();
  LossBundle out;
  if (opt.compute_grads) out.grads = zeros_like(params);

  if (opt.terms.subjectivity) {
    std::vector<Matrix> memories;
    memories.reserve(n_branches);
    for (const auto& b : params.branches) memories.push_back(b.memory);
    SubjectivityResult sub = subjectivity_loss(memories, opt.frozen_ranges);
    out.l_sub = sub.value;
    out.phi_ranges = std::move(sub.ranges);
    if (opt.compute_grads) {
      for (std::size_t n = 0; n < n_branches; ++n) axpy(out.grads.branches[n].memory.flat(), sub.grads[n].flat());
    }
  }

  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  out.assignments.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const VoteSample& s = batch[i];
    if (s.distribution.size() != params.dims.categories) throw DimensionError("total_loss: category count");
    const ForwardTrace trace = forward(params, s.features);
    const std::vector<Vector> probs = trace.probs();
    for (const auto& p : probs) {
      for (double x : p) {
        if (!std::isfinite(x)) throw NumericError("total_loss: non-finite prediction for sample " + s.id);
      }
    }
    const std::vector<int> labels = pairing_labels(s, opt.mode);
    std::vector<std::size_t> sigma =
        opt.frozen_assignments ? (*opt.frozen_assignments)[i] : pair_labels(labels, probs, opt.mode);

    std::vector<Vector> dlogits(n_branches, Vector(params.dims.categories, 0.0));
    if (opt.terms.matching) {
      MatchingResult m = matching_loss(labels, trace, sigma);
      out.l_mat += inv_batch * m.value;
      for (std::size_t n = 0; n < n_branches; ++n) axpy(dlogits[n], m.dlogits[n]);
    }
    if (opt.terms.distribution) {
      const Vector d_hat = predict_distribution(probs, sigma);
      KlResult kl = kl_loss(s.distribution, d_hat);
      out.l_kl += inv_batch * kl.value;
      Vector g = kl.grad;
      for (double& x : g) x /= static_cast<double>(n_branches);
      for (std::size_t n = 0; n < n_branches; ++n) axpy(dlogits[n], softmax_backward(probs[n], g));
    }
    if (opt.compute_grads) {
      for (std::size_t n = 0; n < n_branches; ++n) {
        backward_branch(params.branches[n], trace.branches[n], s.features, dlogits[n], out.grads.branches[n],
                        inv_batch);
      }
    }
    out.assignments.push_back(std::move(sigma));
  }
  out.total = out.l_sub + out.l_mat + out.l_kl;
  return out;
}

}  // namespace samnet
