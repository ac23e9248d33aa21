#pragma once

// Forward-only evaluation of the training loss, written independently of the
// analytic path and templated on the scalar type. The gradient checker runs
// it in long double so that finite differences at step 1e-5 are not limited
// by double rounding.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "samnet/core/errors.hpp"
#include "samnet/data/dataset.hpp"
#include "samnet/losses/losses.hpp"
#include "samnet/model/model.hpp"

namespace samnet::reference {

template <typename T>
struct Branch {
  std::vector<T> embed_weight;  // d2 x d1 row-major
  std::vector<T> embed_bias;
  std::vector<T> memory;        // d2 x K row-major
  std::vector<T> classifier;    // C x d2 row-major

  std::vector<T>& block(BlockKind k) {
    switch (k) {
      case BlockKind::EmbedWeight: return embed_weight;
      case BlockKind::EmbedBias: return embed_bias;
      case BlockKind::Memory: return memory;
      case BlockKind::Classifier: return classifier;
    }
    return embed_weight;
  }
};

template <typename T>
struct Params {
  Dims dims;
  std::vector<Branch<T>> branches;
};

template <typename T>
Params<T> widen(const ModelParams& p) {
  Params<T> out{p.dims, {}};
  for (const auto& b : p.branches) {
    auto cvt = [](std::span<const double> s) { return std::vector<T>(s.begin(), s.end()); };
    out.branches.push_back(Branch<T>{cvt(b.embed_weight.flat()), cvt(b.embed_bias), cvt(b.memory.flat()),
                                     cvt(b.classifier.flat())});
  }
  return out;
}

template <typename T>
std::vector<T> softmax_of(const std::vector<T>& z) {
  T mx = z[0];
  for (const T& v : z) mx = std::max(mx, v);
  std::vector<T> e(z.size());
  T sum = 0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    e[i] = std::exp(z[i] - mx);
    sum += e[i];
  }
  for (T& v : e) v /= sum;
  return e;
}

/// Branch output probabilities and logits for one input.
template <typename T>
void branch_forward(const Dims& d, const Branch<T>& b, std::span<const double> x, std::vector<T>& logits,
                    std::vector<T>& probs) {
  const std::size_t d1 = d.feature_dim, d2 = d.embed_dim, k = d.memory_slots, c = d.categories;
  std::vector<T> f(d2);
  for (std::size_t i = 0; i < d2; ++i) {
    T s = b.embed_bias[i];
    for (std::size_t j = 0; j < d1; ++j) s += b.embed_weight[i * d1 + j] * static_cast<T>(x[j]);
    f[i] = s > 0 ? s : T(0);
  }
  std::vector<T> enhanced = f;
  if (k > 0) {
    std::vector<T> scores(k, T(0));
    for (std::size_t slot = 0; slot < k; ++slot) {
      for (std::size_t i = 0; i < d2; ++i) scores[slot] += f[i] * b.memory[i * k + slot];
    }
    const std::vector<T> a = softmax_of(scores);
    for (std::size_t i = 0; i < d2; ++i) {
      T s = 0;
      for (std::size_t slot = 0; slot < k; ++slot) s += a[slot] * b.memory[i * k + slot];
      enhanced[i] = s;
    }
  }
  logits.assign(c, T(0));
  for (std::size_t cat = 0; cat < c; ++cat) {
    for (std::size_t i = 0; i < d2; ++i) logits[cat] += b.classifier[cat * d2 + i] * enhanced[i];
  }
  probs = softmax_of(logits);
}

template <typename T>
struct Range {
  T min = 0;
  T span = 0;
};

template <typename T>
std::vector<Range<T>> memory_ranges(const Params<T>& p) {
  std::vector<Range<T>> out;
  for (const auto& b : p.branches) {
    if (b.memory.empty()) {
      out.push_back({});
      continue;
    }
    const auto [lo, hi] = std::minmax_element(b.memory.begin(), b.memory.end());
    out.push_back({*lo, *hi - *lo});
  }
  return out;
}

template <typename T>
T subjectivity(const Params<T>& p, const std::vector<Range<T>>& ranges) {
  const std::size_t n = p.branches.size();
  const std::size_t entries = p.branches[0].memory.size();
  std::vector<std::vector<T>> phi(n, std::vector<T>(entries, T(0)));
  for (std::size_t b = 0; b < n; ++b) {
    if (ranges[b].span > 0) {
      for (std::size_t i = 0; i < entries; ++i) phi[b][i] = (p.branches[b].memory[i] - ranges[b].min) / ranges[b].span;
    }
  }
  T denom = 0;
  std::vector<T> mean(entries, T(0));
  for (std::size_t i = 0; i < entries; ++i) {
    for (std::size_t b = 0; b < n; ++b) mean[i] += phi[b][i];
    mean[i] /= static_cast<T>(n);
    denom += mean[i] * mean[i];
  }
  denom = std::max(denom, static_cast<T>(kSubjectivityDenominatorGuard));
  T total = 0;
  for (std::size_t b = 0; b < n; ++b) {
    T dev = 0;
    for (std::size_t i = 0; i < entries; ++i) dev += (phi[b][i] - mean[i]) * (phi[b][i] - mean[i]);
    total += T(1) - dev / denom;
  }
  return total / static_cast<T>(n);
}

/// Total loss with assignments and normalization ranges held fixed.
template <typename T>
T total_loss(std::span<const VoteSample> batch, const Params<T>& p, const LossOptions& opt,
             const std::vector<std::vector<std::size_t>>& assignments, const std::vector<Range<T>>& ranges) {
  const std::size_t n = p.branches.size();
  T sub = 0, mat = 0, kl = 0;
  if (opt.terms.subjectivity) sub = subjectivity(p, ranges);
  const T floor = static_cast<T>(kLogFloor);
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const VoteSample& sample = batch[s];
    std::vector<std::vector<T>> logits(n), probs(n);
    for (std::size_t b = 0; b < n; ++b) branch_forward(p.dims, p.branches[b], sample.features, logits[b], probs[b]);
    const std::vector<int> labels = pairing_labels(sample, opt.mode);
    const auto& sigma = assignments[s];
    if (opt.terms.matching) {
      T m = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const auto& z = logits[sigma[i]];
        T mx = z[0];
        for (const T& v : z) mx = std::max(mx, v);
        T sum = 0;
        for (const T& v : z) sum += std::exp(v - mx);
        m -= z[static_cast<std::size_t>(labels[i])] - mx - std::log(sum);
      }
      mat += m / static_cast<T>(n);
    }
    if (opt.terms.distribution) {
      for (std::size_t c = 0; c < p.dims.categories; ++c) {
        if (sample.distribution[c] == 0.0) continue;
        T dh = 0;
        for (std::size_t b = 0; b < n; ++b) dh += probs[b][c];
        dh /= static_cast<T>(n);
        kl -= static_cast<T>(sample.distribution[c]) * std::log(std::max(dh, floor));
      }
    }
  }
  const T inv = T(1) / static_cast<T>(batch.size());
  return sub + mat * inv + kl * inv;
}

}  // namespace samnet::reference
