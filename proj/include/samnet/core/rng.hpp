#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "samnet/core/errors.hpp"

namespace samnet {

/// Named random streams. Each experiment phase draws from its own stream so
/// that, e.g., changing the batch shuffle never perturbs initialization.
enum class Stream : std::uint64_t {
  Init = 1,
  DataGen = 2,
  Shuffle = 3,
  Split = 4,
  Test = 99,
};

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random source keyed by (seed, stream, substream).
///
/// The engine is mt19937_64, whose output sequence is fixed by the standard.
/// All distributions are computed here rather than through <random>
/// distribution classes, whose algorithms are implementation-defined.
class SeededRng {
 public:
  SeededRng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0)
      : seed_(seed), stream_(stream), substream_(substream),
        engine_(splitmix64(splitmix64(splitmix64(seed) ^ static_cast<std::uint64_t>(stream)) ^
                           substream)) {}

  /// Independent generator for a sub-task (e.g. one sample of a dataset).
  SeededRng derive(std::uint64_t substream) const {
    return SeededRng(seed_, stream_, splitmix64(substream_ + 1) ^ substream);
  }

  std::uint64_t seed() const noexcept { return seed_; }
  Stream stream() const noexcept { return stream_; }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n), unbiased by rejection.
  std::uint64_t uniform_index(std::uint64_t n) {
    if (n == 0) throw InvalidArgument("uniform_index: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (one draw per call, no cached spare).
  double normal() {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Inverse-CDF draw from a probability vector.
  std::size_t categorical(std::span<const double> probs) {
    if (probs.empty()) throw InvalidArgument("categorical: empty distribution");
    const double u = uniform();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    // Rounding left the cumulative sum just under 1; take the last nonzero bin.
    for (std::size_t i = probs.size(); i-- > 0;) {
      if (probs[i] > 0.0) return i;
    }
    return probs.size() - 1;
  }

  /// Fisher-Yates shuffle.
  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::uint64_t seed_;
  Stream stream_;
  std::uint64_t substream_;
  std::mt19937_64 engine_;
};

}  // namespace samnet
