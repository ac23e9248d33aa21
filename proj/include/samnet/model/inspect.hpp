#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <vector>

#include <nlohmann/json.hpp>

#include "samnet/core/linalg.hpp"
#include "samnet/losses/losses.hpp"
#include "samnet/model/model.hpp"

namespace samnet {

struct SlotWeight {
  std::size_t slot = 0;
  double weight = 0.0;
};

struct BranchInspection {
  bool memory_bypassed = false;
  std::vector<SlotWeight> top_slots;  // descending weight, at most `top`
  double attention_sum = 0.0;
  double attention_entropy = 0.0;     // nats; ln K for uniform attention
  std::size_t predicted_category = 0;
  Vector probs;
};

struct MemoryInspection {
  std::vector<BranchInspection> branches;
  Matrix phi_distances;  // N x N Frobenius distances between normalized memories
};

/// Slot-level attention statistics for one input, plus how far apart the
/// normalized memories of the branches are.
inline MemoryInspection inspect_memory(const ModelParams& params, std::span<const double> f_obj,
                                       std::size_t top = 5) {
  const ForwardTrace trace = forward(params, f_obj);
  MemoryInspection out;
  for (const auto& t : trace.branches) {
    BranchInspection b;
    b.memory_bypassed = t.attention.empty();
    b.probs = t.probs;
    b.predicted_category = argmax(t.probs);
    if (!b.memory_bypassed) {
      std::vector<std::size_t> idx(t.attention.size());
      std::iota(idx.begin(), idx.end(), std::size_t{0});
      std::stable_sort(idx.begin(), idx.end(),
                       [&](std::size_t a, std::size_t c) { return t.attention[a] > t.attention[c]; });
      for (std::size_t i = 0; i < std::min(top, idx.size()); ++i) b.top_slots.push_back({idx[i], t.attention[idx[i]]});
      for (double a : t.attention) {
        b.attention_sum += a;
        if (a > 0.0) b.attention_entropy -= a * std::log(a);
      }
    }
    out.branches.push_back(std::move(b));
  }

  const std::size_t n = params.branches.size();
  out.phi_distances = Matrix(n, n);
  std::vector<Matrix> phi;
  for (const auto& br : params.branches) phi.push_back(normalize_phi(br.memory));
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t c = a + 1; c < n; ++c) {
      double s = 0.0;
      auto pa = phi[a].flat();
      auto pc = phi[c].flat();
      for (std::size_t i = 0; i < pa.size(); ++i) s += (pa[i] - pc[i]) * (pa[i] - pc[i]);
      out.phi_distances(a, c) = out.phi_distances(c, a) = std::sqrt(s);
    }
  }
  return out;
}

inline nlohmann::ordered_json to_json(const MemoryInspection& m) {
  nlohmann::ordered_json j;
  j["branches"] = nlohmann::ordered_json::array();
  for (std::size_t n = 0; n < m.branches.size(); ++n) {
    const auto& b = m.branches[n];
    nlohmann::ordered_json jb;
    jb["branch"] = n;
    jb["memory_bypassed"] = b.memory_bypassed;
    jb["predicted_category"] = b.predicted_category;
    jb["probs"] = b.probs;
    if (!b.memory_bypassed) {
      jb["attention_entropy"] = b.attention_entropy;
      jb["attention_sum"] = b.attention_sum;
      jb["top_slots"] = nlohmann::ordered_json::array();
      for (const auto& s : b.top_slots) jb["top_slots"].push_back({{"slot", s.slot}, {"weight", s.weight}});
    }
    j["branches"].push_back(std::move(jb));
  }
  std::vector<std::vector<double>> dist;
  for (std::size_t r = 0; r < m.phi_distances.rows(); ++r) {
    auto row = m.phi_distances.row(r);
    dist.emplace_back(row.begin(), row.end());
  }
  j["phi_distances"] = dist;
  return j;
}

}  // namespace samnet
