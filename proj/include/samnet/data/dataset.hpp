#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "samnet/core/errors.hpp"
#include "samnet/core/linalg.hpp"
#include "samnet/core/rng.hpp"

namespace samnet {

/// One stimulus: its feature vector and the N votes cast on it.
///
/// Votes are held in canonical (sorted) order; voter identity is never kept.
struct VoteSample {
  std::string id;
  Vector features;
  std::vector<int> votes;
  Vector distribution;

  friend bool operator==(const VoteSample&, const VoteSample&) = default;
};

/// Per-category vote share count(c) / N.
inline Vector vote_distribution(std::span<const int> votes, std::size_t categories) {
  if (votes.empty()) throw InvalidArgument("vote_distribution: no votes");
  std::vector<std::size_t> counts(categories, 0);
  for (int v : votes) {
    if (v < 0 || static_cast<std::size_t>(v) >= categories) {
      throw SchemaError("vote " + std::to_string(v) + " outside [0, " +
                        std::to_string(categories) + ")");
    }
    ++counts[static_cast<std::size_t>(v)];
  }
  Vector d(categories);
  const auto n = static_cast<double>(votes.size());
  for (std::size_t c = 0; c < categories; ++c) d[c] = static_cast<double>(counts[c]) / n;
  return d;
}

/// Builds a sample from raw votes (any order); votes are stored sorted.
inline VoteSample make_sample(std::string id, Vector features, std::vector<int> votes,
                              std::size_t categories) {
  std::sort(votes.begin(), votes.end());
  Vector d = vote_distribution(votes, categories);
  return VoteSample{std::move(id), std::move(features), std::move(votes), std::move(d)};
}

/// A dataset with its declared header.
struct Dataset {
  std::size_t categories = 0;  // C
  std::size_t annotators = 0;  // N
  std::size_t feature_dim = 0; // d1
  std::vector<VoteSample> samples;

  std::size_t size() const noexcept { return samples.size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline constexpr int kDatasetVersion = 1;

namespace detail {

using ordered_json = nlohmann::ordered_json;

inline ordered_json dataset_header_json(const Dataset& ds) {
  ordered_json h;
  h["version"] = kDatasetVersion;
  h["C"] = ds.categories;
  h["N"] = ds.annotators;
  h["d1"] = ds.feature_dim;
  return h;
}

inline void validate_sample(const VoteSample& s, const Dataset& ds, std::size_t line) {
  auto where = [&] { return " (line " + std::to_string(line) + ", id '" + s.id + "')"; };
  if (s.features.size() != ds.feature_dim) {
    throw SchemaError("feature length " + std::to_string(s.features.size()) + " != d1 " +
                      std::to_string(ds.feature_dim) + where());
  }
  if (s.votes.size() != ds.annotators) {
    throw SchemaError("vote count " + std::to_string(s.votes.size()) + " != N " +
                      std::to_string(ds.annotators) + where());
  }
  for (int v : s.votes) {
    if (v < 0 || static_cast<std::size_t>(v) >= ds.categories) {
      throw SchemaError("vote " + std::to_string(v) + " outside [0, C)" + where());
    }
  }
  if (!all_finite(s.features)) throw SchemaError("non-finite feature" + where());
}

}  // namespace detail

/// Serializes to the line-delimited JSON format: a header line
/// {"version":1,"C":..,"N":..,"d1":..} followed by one record per sample
/// {"id":..,"features":[..],"votes":[..]}. Doubles are written with
/// shortest round-trip precision.
inline void write_dataset(const Dataset& ds, std::ostream& out) {
  out << detail::dataset_header_json(ds).dump() << '\n';
  std::size_t line = 2;
  for (const auto& s : ds.samples) {
    detail::validate_sample(s, ds, line++);
    detail::ordered_json rec;
    rec["id"] = s.id;
    rec["features"] = s.features;
    rec["votes"] = s.votes;
    out << rec.dump() << '\n';
  }
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  write_dataset(ds, out);
  if (!out) throw Error("write failed: '" + path.string() + "'");
}

inline Dataset read_dataset(std::istream& in) {
  using nlohmann::json;
  Dataset ds;
  std::string text;
  std::size_t line = 0;
  bool have_header = false;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    json j;
    try {
      j = json::parse(text);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("malformed JSON: ") + e.what(), line);
    }
    try {
      if (!have_header) {
        const int version = j.at("version").get<int>();
        if (version != kDatasetVersion) {
          throw VersionError("dataset version " + std::to_string(version) + " unsupported (expected " +
                             std::to_string(kDatasetVersion) + ")");
        }
        ds.categories = j.at("C").get<std::size_t>();
        ds.annotators = j.at("N").get<std::size_t>();
        ds.feature_dim = j.at("d1").get<std::size_t>();
        if (ds.categories == 0 || ds.annotators == 0 || ds.feature_dim == 0) {
          throw SchemaError("header dimensions must be positive");
        }
        have_header = true;
        continue;
      }
      VoteSample s;
      s.id = j.at("id").get<std::string>();
      s.features = j.at("features").get<Vector>();
      s.votes = j.at("votes").get<std::vector<int>>();
      detail::validate_sample(s, ds, line);
      ds.samples.push_back(make_sample(std::move(s.id), std::move(s.features), std::move(s.votes),
                                       ds.categories));
    } catch (const json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line);
    }
  }
  if (!have_header) throw ParseError("missing header record", line);
  return ds;
}

inline Dataset read_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  return read_dataset(in);
}

/// Disjoint, exhaustive random partition. The train part receives
/// round(train_frac * n) samples, clamped so neither side is empty.
inline std::pair<std::vector<VoteSample>, std::vector<VoteSample>> split(
    const std::vector<VoteSample>& samples, double train_frac, std::uint64_t seed) {
  if (!(train_frac > 0.0 && train_frac < 1.0)) {
    throw InvalidArgument("split: train_frac must lie in (0, 1)");
  }
  if (samples.size() < 2) throw InvalidArgument("split: need at least 2 samples");
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  SeededRng rng(seed, Stream::Split);
  rng.shuffle(order);

  const auto n = samples.size();
  auto n_train = static_cast<std::size_t>(std::llround(train_frac * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::pair<std::vector<VoteSample>, std::vector<VoteSample>> out;
  out.first.reserve(n_train);
  out.second.reserve(n - n_train);
  for (std::size_t i = 0; i < n; ++i) {
    (i < n_train ? out.first : out.second).push_back(samples[order[i]]);
  }
  return out;
}

}  // namespace samnet
