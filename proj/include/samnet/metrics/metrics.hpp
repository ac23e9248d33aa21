#pragma once

// Label-distribution evaluation measures. Clark is divided by sqrt(C) and
// Canberra by C so both lie in [0, 1]; 0/0 terms count as zero. The KL
// measure floors both arguments at 1e-10.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "samnet/core/errors.hpp"
#include "samnet/core/linalg.hpp"
#include "samnet/data/dataset.hpp"
#include "samnet/losses/losses.hpp"
#include "samnet/model/model.hpp"

namespace samnet::metrics {

inline constexpr double kEpsilon = 1e-10;

inline void check_pair(std::span<const double> d, std::span<const double> d_hat) {
  if (d.empty()) throw DimensionError("metric: empty distribution");
  require_length(d_hat, d.size(), "metric");
}

inline double chebyshev(std::span<const double> d, std::span<const double> d_hat) {
  check_pair(d, d_hat);
  double m = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) m = std::max(m, std::abs(d[c] - d_hat[c]));
  return m;
}

/// sqrt(sum (d - d_hat)^2 / (d + d_hat)^2), without the sqrt(C) normalization.
inline double clark_raw(std::span<const double> d, std::span<const double> d_hat) {
  check_pair(d, d_hat);
  double s = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) {
    const double den = d[c] + d_hat[c];
    if (den == 0.0) continue;
    const double q = (d[c] - d_hat[c]) / den;
    s += q * q;
  }
  return std::sqrt(s);
}

inline double clark(std::span<const double> d, std::span<const double> d_hat) {
  return clark_raw(d, d_hat) / std::sqrt(static_cast<double>(d.size()));
}

/// sum |d - d_hat| / (d + d_hat), without the 1/C normalization.
inline double canberra_raw(std::span<const double> d, std::span<const double> d_hat) {
  check_pair(d, d_hat);
  double s = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) {
    const double den = d[c] + d_hat[c];
    if (den == 0.0) continue;
    s += std::abs(d[c] - d_hat[c]) / den;
  }
  return s;
}

inline double canberra(std::span<const double> d, std::span<const double> d_hat) {
  return canberra_raw(d, d_hat) / static_cast<double>(d.size());
}

/// KL(d || d_hat) with both arguments floored at 1e-10; d(c) = 0 terms skip.
inline double kl(std::span<const double> d, std::span<const double> d_hat) {
  check_pair(d, d_hat);
  double s = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) {
    if (d[c] == 0.0) continue;
    const double p = std::max(d[c], kEpsilon);
    const double q = std::max(d_hat[c], kEpsilon);
    s += d[c] * std::log(p / q);
  }
  return s;
}

inline double cosine(std::span<const double> d, std::span<const double> d_hat) {
  check_pair(d, d_hat);
  double num = 0.0, nd = 0.0, nh = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) {
    num += d[c] * d_hat[c];
    nd += d[c] * d[c];
    nh += d_hat[c] * d_hat[c];
  }
  if (nd == 0.0 || nh == 0.0) throw InvalidArgument("cosine: zero vector");
  return num / std::sqrt(nd * nh);
}

inline double intersection(std::span<const double> d, std::span<const double> d_hat) {
  check_pair(d, d_hat);
  double s = 0.0;
  for (std::size_t c = 0; c < d.size(); ++c) s += std::min(d[c], d_hat[c]);
  return s;
}

/// 1 when the dominant categories agree (lowest index wins ties on both sides).
inline double top1_accuracy(std::span<const double> d, std::span<const double> d_hat) {
  check_pair(d, d_hat);
  return argmax(d) == argmax(d_hat) ? 1.0 : 0.0;
}

struct MetricReport {
  double chebyshev = 0.0;
  double clark = 0.0;
  double canberra = 0.0;
  double kl = 0.0;
  double cosine = 0.0;
  double intersection = 0.0;
  double accuracy = 0.0;
  std::size_t sample_count = 0;

  friend bool operator==(const MetricReport&, const MetricReport&) = default;
};

/// Per-pair report. `raw` switches Clark and Canberra to their unnormalized forms.
inline MetricReport score_pair(std::span<const double> d, std::span<const double> d_hat, bool raw = false) {
  MetricReport r;
  r.chebyshev = chebyshev(d, d_hat);
  r.clark = raw ? clark_raw(d, d_hat) : clark(d, d_hat);
  r.canberra = raw ? canberra_raw(d, d_hat) : canberra(d, d_hat);
  r.kl = kl(d, d_hat);
  r.cosine = cosine(d, d_hat);
  r.intersection = intersection(d, d_hat);
  r.accuracy = top1_accuracy(d, d_hat);
  r.sample_count = 1;
  return r;
}

/// Arithmetic mean of per-sample reports, summed in the given order.
inline MetricReport average(std::span<const MetricReport> reports) {
  MetricReport acc;
  for (const auto& r : reports) {
    acc.chebyshev += r.chebyshev;
    acc.clark += r.clark;
    acc.canberra += r.canberra;
    acc.kl += r.kl;
    acc.cosine += r.cosine;
    acc.intersection += r.intersection;
    acc.accuracy += r.accuracy;
  }
  if (!reports.empty()) {
    const double inv = 1.0 / static_cast<double>(reports.size());
    acc.chebyshev *= inv;
    acc.clark *= inv;
    acc.canberra *= inv;
    acc.kl *= inv;
    acc.cosine *= inv;
    acc.intersection *= inv;
    acc.accuracy *= inv;
  }
  acc.sample_count = reports.size();
  return acc;
}

/// Scores the branch-averaged prediction of every sample and averages.
inline MetricReport evaluate(std::span<const VoteSample> samples, const ModelParams& params, bool raw = false) {
  if (samples.empty()) throw InvalidArgument("evaluate: empty dataset");
  std::vector<MetricReport> per_sample;
  per_sample.reserve(samples.size());
  for (const auto& s : samples) {
    if (s.distribution.size() != params.dims.categories) throw DimensionError("evaluate: category count");
    const ForwardTrace t = forward(params, s.features);
    per_sample.push_back(score_pair(s.distribution, predict_distribution(t.probs()), raw));
  }
  return average(per_sample);
}

inline nlohmann::ordered_json to_json(const MetricReport& r) {
  nlohmann::ordered_json j;
  j["chebyshev"] = r.chebyshev;
  j["clark"] = r.clark;
  j["canberra"] = r.canberra;
  j["kl"] = r.kl;
  j["cosine"] = r.cosine;
  j["intersection"] = r.intersection;
  j["accuracy"] = r.accuracy;
  j["sample_count"] = r.sample_count;
  return j;
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.chebyshev = j.at("chebyshev").get<double>();
  r.clark = j.at("clark").get<double>();
  r.canberra = j.at("canberra").get<double>();
  r.kl = j.at("kl").get<double>();
  r.cosine = j.at("cosine").get<double>();
  r.intersection = j.at("intersection").get<double>();
  r.accuracy = j.at("accuracy").get<double>();
  r.sample_count = j.at("sample_count").get<std::size_t>();
  return r;
}

/// Column order of the CSV form.
inline constexpr const char* kCsvHeader = "chebyshev,clark,canberra,kl,cosine,intersection,accuracy,sample_count";

/// CSV data row; values use the same shortest round-trip form as the JSON.
inline std::string to_csv_row(const MetricReport& r) {
  auto num = [](double x) { return nlohmann::json(x).dump(); };
  return num(r.chebyshev) + "," + num(r.clark) + "," + num(r.canberra) + "," + num(r.kl) + "," +
         num(r.cosine) + "," + num(r.intersection) + "," + num(r.accuracy) + "," +
         std::to_string(r.sample_count);
}

}  // namespace samnet::metrics
