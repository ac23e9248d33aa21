#pragma once

#include <cmath>
#include <cstddef>

#include "samnet/core/linalg.hpp"
#include "samnet/core/rng.hpp"

namespace samnet {

/// Glorot/Xavier uniform initialization: entries i.i.d. on [-b, b] with
/// b = sqrt(6 / (fan_in + fan_out)). fan_in = rows, fan_out = cols.
inline Matrix xavier_uniform(std::size_t rows, std::size_t cols, SeededRng& rng) {
  if (rows == 0 || cols == 0) throw DimensionError("xavier_uniform: dimensions must be positive");
  const double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (double& x : m.flat()) x = rng.uniform(-bound, bound);
  return m;
}

inline double xavier_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace samnet
