#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "samnet/core/errors.hpp"
#include "samnet/core/linalg.hpp"
#include "samnet/core/rng.hpp"
#include "samnet/data/dataset.hpp"

namespace samnet {

/// Fully specified crowd-voting simulator.
///
/// Per sample: z ~ N(0, I_L); features x = A z + eps, eps ~ N(0, noise^2 I);
/// annotator n votes by drawing from softmax(P_n z / temperature).
struct GeneratorSpec {
  std::size_t latent_dim = 8;     // L
  std::size_t feature_dim = 16;   // d1
  std::size_t categories = 4;     // C
  std::size_t annotators = 4;     // N
  std::vector<Matrix> preferences;  // N matrices, each C x L
  Matrix feature_map;               // d1 x L
  double feature_noise = 0.1;
  double temperature = 0.5;
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
};

/// Scalar knobs from which the planted matrices are drawn.
///
/// P_n = consensus * B + sqrt(1 - consensus^2) * D_n, with B and every D_n
/// standard normal, so each annotator shares a common taste B and keeps an
/// individual deviation D_n. Entries of A are N(0, 1/L), so features have
/// roughly unit variance.
struct GeneratorConfig {
  std::size_t latent_dim = 8;
  std::size_t feature_dim = 16;
  std::size_t categories = 4;
  std::size_t annotators = 4;
  double feature_noise = 0.1;
  double temperature = 0.5;
  double consensus = 0.95;
  std::size_t samples = 2000;
  std::uint64_t seed = 0;
};

/// Checks structural validity. Does not require distinct preferences, so the
/// degenerate no-subjectivity case can still be simulated.
inline void validate(const GeneratorSpec& spec) {
  if (spec.latent_dim == 0 || spec.feature_dim == 0 || spec.categories == 0 ||
      spec.annotators == 0) {
    throw InvalidArgument("generator: L, d1, C and N must be >= 1");
  }
  if (!(spec.feature_noise >= 0.0) || !std::isfinite(spec.feature_noise)) {
    throw InvalidArgument("generator: feature noise must be >= 0");
  }
  if (!(spec.temperature > 0.0) || !std::isfinite(spec.temperature)) {
    throw InvalidArgument("generator: temperature must be > 0");
  }
  if (spec.preferences.size() != spec.annotators) {
    throw InvalidArgument("generator: expected " + std::to_string(spec.annotators) +
                          " preference matrices");
  }
  for (const auto& p : spec.preferences) {
    if (p.rows() != spec.categories || p.cols() != spec.latent_dim) {
      throw InvalidArgument("generator: preference matrix must be C x L, got " + shape_string(p));
    }
    if (!all_finite(p.flat())) throw InvalidArgument("generator: non-finite preference");
  }
  if (spec.feature_map.rows() != spec.feature_dim || spec.feature_map.cols() != spec.latent_dim) {
    throw InvalidArgument("generator: feature map must be d1 x L, got " +
                          shape_string(spec.feature_map));
  }
}

/// True when all preference matrices are pairwise distinct.
inline bool has_planted_subjectivity(const GeneratorSpec& spec) {
  for (std::size_t a = 0; a < spec.preferences.size(); ++a) {
    for (std::size_t b = a + 1; b < spec.preferences.size(); ++b) {
      if (spec.preferences[a] == spec.preferences[b]) return false;
    }
  }
  return true;
}

/// Draws the planted matrices for a config.
inline GeneratorSpec make_generator_spec(const GeneratorConfig& cfg) {
  if (!(cfg.consensus >= 0.0 && cfg.consensus < 1.0)) {
    throw InvalidArgument("generator: consensus must lie in [0, 1)");
  }
  GeneratorSpec spec;
  spec.latent_dim = cfg.latent_dim;
  spec.feature_dim = cfg.feature_dim;
  spec.categories = cfg.categories;
  spec.annotators = cfg.annotators;
  spec.feature_noise = cfg.feature_noise;
  spec.temperature = cfg.temperature;
  spec.samples = cfg.samples;
  spec.seed = cfg.seed;
  if (cfg.latent_dim == 0 || cfg.feature_dim == 0 || cfg.categories == 0 || cfg.annotators == 0) {
    throw InvalidArgument("generator: L, d1, C and N must be >= 1");
  }

  SeededRng rng(cfg.seed, Stream::DataGen, 0);
  Matrix shared(cfg.categories, cfg.latent_dim);
  for (double& x : shared.flat()) x = rng.normal();
  const double individual = std::sqrt(1.0 - cfg.consensus * cfg.consensus);
  for (std::size_t n = 0; n < cfg.annotators; ++n) {
    Matrix p(cfg.categories, cfg.latent_dim);
    auto pf = p.flat();
    auto sf = shared.flat();
    for (std::size_t i = 0; i < pf.size(); ++i) pf[i] = cfg.consensus * sf[i] + individual * rng.normal();
    spec.preferences.push_back(std::move(p));
  }
  spec.feature_map = Matrix(cfg.feature_dim, cfg.latent_dim);
  const double map_scale = 1.0 / std::sqrt(static_cast<double>(cfg.latent_dim));
  for (double& x : spec.feature_map.flat()) x = map_scale * rng.normal();
  validate(spec);
  if (!has_planted_subjectivity(spec)) {
    throw InvalidArgument("generator: preference matrices are not pairwise distinct");
  }
  return spec;
}

/// Everything drawn for one sample, before voter identity is discarded.
struct DrawnSample {
  Vector latent;
  Vector features;
  std::vector<int> annotator_votes;  // index n is annotator n's vote
};

/// Per-annotator vote probabilities softmax(P_n z / temperature).
inline Vector annotator_vote_probs(const GeneratorSpec& spec, std::size_t annotator,
                                   std::span<const double> latent) {
  Vector logits = matvec(spec.preferences.at(annotator), latent);
  for (double& l : logits) l /= spec.temperature;
  return softmax(logits);
}

/// Draws sample `index`; depends only on (spec, seed, index).
inline DrawnSample draw_sample(const GeneratorSpec& spec, std::size_t index) {
  SeededRng rng = SeededRng(spec.seed, Stream::DataGen, 1).derive(index);
  DrawnSample out;
  out.latent.resize(spec.latent_dim);
  for (double& z : out.latent) z = rng.normal();
  out.features = matvec(spec.feature_map, out.latent);
  for (double& x : out.features) x += spec.feature_noise * rng.normal();
  out.annotator_votes.resize(spec.annotators);
  for (std::size_t n = 0; n < spec.annotators; ++n) {
    const Vector probs = annotator_vote_probs(spec, n, out.latent);
    out.annotator_votes[n] = static_cast<int>(rng.categorical(probs));
  }
  return out;
}

inline std::string sample_id(std::size_t index) {
  std::string digits = std::to_string(index);
  if (digits.size() < 6) digits.insert(0, 6 - digits.size(), '0');
  return "s" + digits;
}

/// Generates the full dataset; votes are stored in canonical sorted order.
inline Dataset generate(const GeneratorSpec& spec) {
  validate(spec);
  Dataset ds;
  ds.categories = spec.categories;
  ds.annotators = spec.annotators;
  ds.feature_dim = spec.feature_dim;
  ds.samples.reserve(spec.samples);
  for (std::size_t i = 0; i < spec.samples; ++i) {
    DrawnSample d = draw_sample(spec, i);
    ds.samples.push_back(
        make_sample(sample_id(i), std::move(d.features), std::move(d.annotator_votes), spec.categories));
  }
  return ds;
}

}  // namespace samnet
