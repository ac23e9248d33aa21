#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "samnet/core/errors.hpp"
#include "samnet/core/init.hpp"
#include "samnet/core/linalg.hpp"
#include "samnet/core/rng.hpp"

namespace samnet {

/// Head dimensions. feature_dim = d1, embed_dim = d2, memory_slots = K,
/// categories = C, branches = N.
struct Dims {
  std::size_t feature_dim = 2048;
  std::size_t embed_dim = 1024;
  std::size_t memory_slots = 1000;
  std::size_t categories = 8;
  std::size_t branches = 8;

  friend bool operator==(const Dims&, const Dims&) = default;

  void validate() const {
    if (feature_dim == 0 || embed_dim == 0 || categories == 0 || branches == 0) {
      throw InvalidArgument("dims: d1, d2, C and N must be >= 1 (K may be 0)");
    }
  }

  std::string to_string() const {
    return "{d1:" + std::to_string(feature_dim) + ",d2:" + std::to_string(embed_dim) +
           ",K:" + std::to_string(memory_slots) + ",C:" + std::to_string(categories) +
           ",N:" + std::to_string(branches) + "}";
  }
};

/// Desk-scale dimensions used by the tests and the acceptance suite.
inline constexpr Dims kDeskDims{16, 8, 16, 4, 4};

/// One subjective-appraisal branch: embedding FC (with bias), affective
/// memory whose columns are slots, and a bias-free classifier whose rows are
/// per-category weight vectors.
struct BranchParams {
  Matrix embed_weight;  // d2 x d1
  Vector embed_bias;    // d2
  Matrix memory;        // d2 x K
  Matrix classifier;    // C x d2

  friend bool operator==(const BranchParams&, const BranchParams&) = default;

  std::size_t slots() const noexcept { return memory.cols(); }
};

struct ModelParams {
  Dims dims;
  std::vector<BranchParams> branches;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

inline BranchParams zero_branch(const Dims& d) {
  return BranchParams{Matrix(d.embed_dim, d.feature_dim), Vector(d.embed_dim, 0.0),
                      Matrix(d.embed_dim, d.memory_slots), Matrix(d.categories, d.embed_dim)};
}

/// Parameter-shaped zeros; also the container for gradients.
inline ModelParams zeros_like(const Dims& d) {
  ModelParams p{d, {}};
  p.branches.assign(d.branches, zero_branch(d));
  return p;
}

inline ModelParams zeros_like(const ModelParams& p) { return zeros_like(p.dims); }

/// Xavier-uniform weights and memories, zero embedding biases.
inline ModelParams init_params(const Dims& dims, SeededRng& rng) {
  dims.validate();
  ModelParams p{dims, {}};
  p.branches.reserve(dims.branches);
  for (std::size_t n = 0; n < dims.branches; ++n) {
    BranchParams b;
    b.embed_weight = xavier_uniform(dims.embed_dim, dims.feature_dim, rng);
    b.embed_bias = Vector(dims.embed_dim, 0.0);
    b.memory = dims.memory_slots > 0 ? xavier_uniform(dims.embed_dim, dims.memory_slots, rng)
                                     : Matrix(dims.embed_dim, 0);
    b.classifier = xavier_uniform(dims.categories, dims.embed_dim, rng);
    p.branches.push_back(std::move(b));
  }
  return p;
}

inline ModelParams init_params(const Dims& dims, std::uint64_t seed) {
  SeededRng rng(seed, Stream::Init);
  return init_params(dims, rng);
}

/// Checks every branch has the shapes its dims declare.
inline void validate(const ModelParams& p) {
  p.dims.validate();
  if (p.branches.size() != p.dims.branches) throw SchemaError("branch count does not match dims");
  const Dims& d = p.dims;
  for (const auto& b : p.branches) {
    if (b.embed_weight.rows() != d.embed_dim || b.embed_weight.cols() != d.feature_dim ||
        b.embed_bias.size() != d.embed_dim || b.memory.rows() != d.embed_dim ||
        b.memory.cols() != d.memory_slots || b.classifier.rows() != d.categories ||
        b.classifier.cols() != d.embed_dim) {
      throw SchemaError("branch shapes do not match dims " + d.to_string());
    }
  }
}

// ---------------------------------------------------------------------------
// Parameter blocks

enum class BlockKind { EmbedWeight, EmbedBias, Memory, Classifier };

inline const char* block_name(BlockKind k) {
  switch (k) {
    case BlockKind::EmbedWeight: return "embed_weight";
    case BlockKind::EmbedBias: return "embed_bias";
    case BlockKind::Memory: return "memory";
    case BlockKind::Classifier: return "classifier";
  }
  return "?";
}

inline constexpr BlockKind kAllBlocks[] = {BlockKind::EmbedWeight, BlockKind::EmbedBias,
                                           BlockKind::Memory, BlockKind::Classifier};

inline std::span<double> block(BranchParams& b, BlockKind k) {
  switch (k) {
    case BlockKind::EmbedWeight: return b.embed_weight.flat();
    case BlockKind::EmbedBias: return b.embed_bias;
    case BlockKind::Memory: return b.memory.flat();
    case BlockKind::Classifier: return b.classifier.flat();
  }
  return {};
}

inline std::span<const double> block(const BranchParams& b, BlockKind k) {
  return block(const_cast<BranchParams&>(b), k);
}

/// Visits every parameter block in declared order (branch-major, then
/// embed_weight, embed_bias, memory, classifier). Empty blocks are skipped.
template <typename Params, typename Fn>
void for_each_block(Params& p, Fn&& fn) {
  for (std::size_t n = 0; n < p.branches.size(); ++n) {
    for (BlockKind k : kAllBlocks) {
      auto span = block(p.branches[n], k);
      if (!span.empty()) fn(n, k, span);
    }
  }
}

inline std::size_t parameter_count(const ModelParams& p) {
  std::size_t total = 0;
  for_each_block(p, [&](std::size_t, BlockKind, std::span<const double> s) { total += s.size(); });
  return total;
}

/// dst += scale * src over all blocks.
inline void add_scaled(ModelParams& dst, const ModelParams& src, double scale = 1.0) {
  if (dst.dims != src.dims) throw DimensionError("add_scaled: dims differ");
  for (std::size_t n = 0; n < dst.branches.size(); ++n) {
    for (BlockKind k : kAllBlocks) axpy(block(dst.branches[n], k), block(src.branches[n], k), scale);
  }
}

inline bool all_finite(const ModelParams& p) {
  bool ok = true;
  for_each_block(p, [&](std::size_t, BlockKind, std::span<const double> s) { ok = ok && all_finite(s); });
  return ok;
}

// ---------------------------------------------------------------------------
// Forward pass

/// f_n = ReLU(E_n f_obj + b_n)
inline Vector embed(const BranchParams& branch, std::span<const double> f_obj) {
  Vector h = matvec(branch.embed_weight, f_obj);
  axpy(h, branch.embed_bias);
  for (double& x : h) x = x > 0.0 ? x : 0.0;
  return h;
}

struct Attention {
  Vector weights;   // a_n, length K (empty when bypassed)
  Vector enhanced;  // f_n', length d2
};

/// Attention over memory slots: a^k = softmax_k(f . m^k), f' = sum_k a^k m^k.
/// With K = 0 the memory is bypassed and f' = f.
inline Attention memory_attend(const BranchParams& branch, std::span<const double> f) {
  require_length(f, branch.memory.rows(), "memory_attend");
  if (branch.memory.cols() == 0) return Attention{{}, Vector(f.begin(), f.end())};
  Vector scores = matvec_transposed(branch.memory, f);
  Vector a = softmax(scores);
  Vector enhanced = matvec(branch.memory, a);
  return Attention{std::move(a), std::move(enhanced)};
}

/// p_n = softmax(W_n f_n'), no bias.
inline Vector classify(const BranchParams& branch, std::span<const double> f_prime) {
  return softmax(matvec(branch.classifier, f_prime));
}

struct BranchTrace {
  Vector pre_activation;  // E f_obj + b
  Vector embedded;        // f_n
  Vector attention;       // a_n
  Vector enhanced;        // f_n'
  Vector logits;
  Vector probs;           // p_n
};

struct ForwardTrace {
  Vector input;
  std::vector<BranchTrace> branches;

  std::vector<Vector> probs() const {
    std::vector<Vector> out;
    out.reserve(branches.size());
    for (const auto& b : branches) out.push_back(b.probs);
    return out;
  }
};

inline BranchTrace forward_branch(const BranchParams& branch, std::span<const double> f_obj) {
  BranchTrace t;
  t.pre_activation = matvec(branch.embed_weight, f_obj);
  axpy(t.pre_activation, branch.embed_bias);
  t.embedded = t.pre_activation;
  for (double& x : t.embedded) x = x > 0.0 ? x : 0.0;
  Attention att = memory_attend(branch, t.embedded);
  t.attention = std::move(att.weights);
  t.enhanced = std::move(att.enhanced);
  t.logits = matvec(branch.classifier, t.enhanced);
  t.probs = softmax(t.logits);
  return t;
}

inline ForwardTrace forward(const ModelParams& params, std::span<const double> f_obj) {
  require_length(f_obj, params.dims.feature_dim, "forward");
  ForwardTrace trace;
  trace.input.assign(f_obj.begin(), f_obj.end());
  trace.branches.reserve(params.branches.size());
  for (const auto& b : params.branches) trace.branches.push_back(forward_branch(b, f_obj));
  return trace;
}

// ---------------------------------------------------------------------------
// Backward pass

/// Accumulates into `grad` the parameter gradient of a loss whose gradient
/// with respect to this branch's logits is `dlogits`.
inline void backward_branch(const BranchParams& branch, const BranchTrace& t,
                            std::span<const double> f_obj, std::span<const double> dlogits,
                            BranchParams& grad, double scale = 1.0) {
  require_length(dlogits, branch.classifier.rows(), "backward_branch");
  add_outer(grad.classifier, dlogits, t.enhanced, scale);
  Vector d_enhanced = matvec_transposed(branch.classifier, dlogits);

  Vector d_embedded;
  if (branch.memory.cols() == 0) {
    d_embedded = std::move(d_enhanced);
  } else {
    // f' = M a
    add_outer(grad.memory, d_enhanced, t.attention, scale);
    Vector d_attention = matvec_transposed(branch.memory, d_enhanced);
    // a = softmax(M^T f)
    Vector d_scores = softmax_backward(t.attention, d_attention);
    add_outer(grad.memory, t.embedded, d_scores, scale);
    d_embedded = matvec(branch.memory, d_scores);
  }

  for (std::size_t j = 0; j < d_embedded.size(); ++j) {
    if (!(t.pre_activation[j] > 0.0)) d_embedded[j] = 0.0;
  }
  add_outer(grad.embed_weight, d_embedded, f_obj, scale);
  axpy(grad.embed_bias, d_embedded, scale);
}

}  // namespace samnet
