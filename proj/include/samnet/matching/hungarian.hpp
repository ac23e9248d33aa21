#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "samnet/core/errors.hpp"
#include "samnet/core/linalg.hpp"

namespace samnet {

/// Label-to-branch assignment: label n goes to branch sigma[n].
struct Assignment {
  std::vector<std::size_t> sigma;
  double total_cost = 0.0;
};

/// Sum of cost[n][sigma[n]]. The selected entries are added in ascending
/// order, so the value depends only on which entries are selected and not on
/// the order of the rows.
inline double assignment_cost(const Matrix& cost, std::span<const std::size_t> sigma) {
  std::vector<double> picked(sigma.size());
  for (std::size_t n = 0; n < sigma.size(); ++n) picked[n] = cost(n, sigma[n]);
  std::sort(picked.begin(), picked.end());
  double total = 0.0;
  for (double x : picked) total += x;
  return total;
}

inline bool is_permutation_of_range(std::span<const std::size_t> sigma) {
  std::vector<bool> seen(sigma.size(), false);
  for (std::size_t s : sigma) {
    if (s >= sigma.size() || seen[s]) return false;
    seen[s] = true;
  }
  return true;
}

/// Matching cost between N labels and N branch predictions:
/// cost[n][m] = -probs[m][labels[n]].
inline Matrix build_cost_matrix(std::span<const int> labels, std::span<const Vector> probs) {
  const std::size_t n = labels.size();
  if (n == 0) throw DimensionError("build_cost_matrix: no labels");
  if (probs.size() != n) {
    throw DimensionError("build_cost_matrix: " + std::to_string(n) + " labels but " +
                         std::to_string(probs.size()) + " predictions");
  }
  const std::size_t categories = probs[0].size();
  for (const auto& p : probs) {
    if (p.size() != categories || categories == 0) throw DimensionError("build_cost_matrix: ragged predictions");
    double sum = 0.0;
    for (double x : p) {
      if (!(x >= 0.0 && x <= 1.0)) throw InvalidArgument("build_cost_matrix: probability outside [0, 1]");
      sum += x;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidArgument("build_cost_matrix: prediction not normalized");
  }
  Matrix cost(n, n);
  for (std::size_t row = 0; row < n; ++row) {
    const int l = labels[row];
    if (l < 0 || static_cast<std::size_t>(l) >= categories) {
      throw InvalidArgument("build_cost_matrix: label " + std::to_string(l) + " out of range");
    }
    for (std::size_t col = 0; col < n; ++col) cost(row, col) = -probs[col][static_cast<std::size_t>(l)];
  }
  return cost;
}

/// Minimum-cost perfect assignment on a square matrix (Kuhn-Munkres with
/// row/column potentials, O(N^3)). Deterministic for a fixed input.
inline Assignment hungarian(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (n == 0 || cost.cols() != n) {
    throw DimensionError("hungarian: cost matrix must be square and non-empty, got " + shape_string(cost));
  }
  if (!all_finite(cost.flat())) throw InvalidArgument("hungarian: non-finite cost");

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based potentials; column 0 is the virtual start.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> match(n + 1, 0), way(n + 1, 0);

  for (std::size_t i = 1; i <= n; ++i) {
    match[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = match[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[match[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (match[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      match[j0] = match[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment a;
  a.sigma.assign(n, 0);
  for (std::size_t j = 1; j <= n; ++j) a.sigma[match[j] - 1] = j - 1;
  a.total_cost = assignment_cost(cost, a.sigma);
  return a;
}

inline constexpr std::size_t kBruteForceMaxN = 9;

/// Exhaustive search over all N! permutations (N <= 9). Returns the first
/// minimal permutation in lexicographic order. Test oracle for hungarian.
inline Assignment brute_force_assign(const Matrix& cost) {
  const std::size_t n = cost.rows();
  if (n == 0 || cost.cols() != n) throw DimensionError("brute_force_assign: cost matrix must be square");
  if (n > kBruteForceMaxN) {
    throw InvalidArgument("brute_force_assign: N = " + std::to_string(n) + " exceeds guard " +
                          std::to_string(kBruteForceMaxN));
  }
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Assignment best{perm, assignment_cost(cost, perm)};
  while (std::next_permutation(perm.begin(), perm.end())) {
    const double c = assignment_cost(cost, perm);
    if (c < best.total_cost) best = Assignment{perm, c};
  }
  return best;
}

}  // namespace samnet
