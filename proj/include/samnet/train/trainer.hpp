#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "samnet/core/errors.hpp"
#include "samnet/core/rng.hpp"
#include "samnet/data/dataset.hpp"
#include "samnet/losses/losses.hpp"
#include "samnet/metrics/metrics.hpp"
#include "samnet/model/model.hpp"
#include "samnet/train/adam.hpp"
#include "samnet/train/config.hpp"

namespace samnet {

struct LossValues {
  double l_sub = 0.0;
  double l_mat = 0.0;
  double l_kl = 0.0;
  double total = 0.0;

  friend bool operator==(const LossValues&, const LossValues&) = default;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double lr = 0.0;
  LossValues train;  // mean over the epoch's mini-batches
  LossValues eval;   // on the held-out set, after the epoch
  metrics::MetricReport report;
};

struct TrainResult {
  ModelParams final_params;
  ModelParams best_params;
  std::size_t best_epoch = 0;
  LossValues initial_eval;
  metrics::MetricReport initial_report;
  std::vector<EpochRecord> log;
};

inline LossOptions loss_options(const TrainConfig& config) {
  LossOptions opt;
  opt.mode = config.effective_mode();
  opt.terms.subjectivity = config.ablation.use_subjectivity_loss;
  return opt;
}

/// Loss values (no gradients) over a whole sample set.
inline LossValues evaluate_losses(std::span<const VoteSample> samples, const ModelParams& params,
                                  LossOptions opt) {
  opt.compute_grads = false;
  const LossBundle b = total_loss(samples, params, opt);
  return LossValues{b.l_sub, b.l_mat, b.l_kl, b.total};
}

/// Throws SchemaError unless the dataset header agrees with the config dims.
inline void check_compatible(const TrainConfig& config, const Dataset& ds) {
  const Dims& d = config.dims;
  if (ds.feature_dim != d.feature_dim || ds.categories != d.categories || ds.annotators != d.branches) {
    throw SchemaError("dataset header {d1:" + std::to_string(ds.feature_dim) + ",C:" +
                      std::to_string(ds.categories) + ",N:" + std::to_string(ds.annotators) +
                      "} does not match config dims " + d.to_string());
  }
}

inline void check_samples(const TrainConfig& config, std::span<const VoteSample> samples, const char* which) {
  if (samples.empty()) throw InvalidArgument(std::string("train: empty ") + which + " set");
  for (const auto& s : samples) {
    if (s.features.size() != config.dims.feature_dim || s.distribution.size() != config.dims.categories ||
        s.votes.size() != config.dims.branches) {
      throw SchemaError(std::string("train: ") + which + " sample '" + s.id + "' does not match dims " +
                        config.dims.to_string());
    }
  }
}

inline nlohmann::ordered_json to_json(const LossValues& v) {
  nlohmann::ordered_json j;
  j["l_sub"] = v.l_sub;
  j["l_mat"] = v.l_mat;
  j["l_kl"] = v.l_kl;
  j["total"] = v.total;
  return j;
}

inline nlohmann::ordered_json to_json(const EpochRecord& r) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["lr"] = r.lr;
  j["train"] = to_json(r.train);
  j["eval_loss"] = to_json(r.eval);
  j["eval"] = metrics::to_json(r.report);
  return j;
}

/// Called after every epoch; used by the CLI to stream the log.
using EpochCallback = std::function<void(const EpochRecord&)>;

/// Mini-batch Adam training. Batches are drawn from a per-epoch seeded
/// shuffle; the step-decayed learning rate is fixed within an epoch. The
/// best parameters are those with the lowest held-out KL measure (earliest
/// epoch on ties).
inline TrainResult train(const TrainConfig& config, std::span<const VoteSample> train_set,
                         std::span<const VoteSample> eval_set, const EpochCallback& on_epoch = {}) {
  config.validate();
  check_samples(config, train_set, "training");
  check_samples(config, eval_set, "evaluation");

  const LossOptions opt = loss_options(config);
  TrainResult result;
  ModelParams params = init_params(config.model_dims(), config.seed);
  AdamState adam = AdamState::for_params(params);

  result.initial_eval = evaluate_losses(eval_set, params, opt);
  result.initial_report = metrics::evaluate(eval_set, params);
  result.best_params = params;
  double best_kl = std::numeric_limits<double>::infinity();

  std::vector<std::size_t> order(train_set.size());
  std::vector<VoteSample> batch;
  batch.reserve(config.batch_size);
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = config.lr_at(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SeededRng(config.seed, Stream::Shuffle).derive(epoch).shuffle(order);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.lr = lr;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
      const LossBundle b = total_loss(batch, params, opt);
      if (!std::isfinite(b.total) || !all_finite(b.grads)) {
        throw NumericError("non-finite loss or gradient at epoch " + std::to_string(epoch));
      }
      adam_step(params, b.grads, adam, lr, config.weight_decay);
      rec.train.l_sub += b.l_sub;
      rec.train.l_mat += b.l_mat;
      rec.train.l_kl += b.l_kl;
      ++steps;
    }
    if (!all_finite(params)) throw NumericError("non-finite parameters after epoch " + std::to_string(epoch));
    const double inv_steps = 1.0 / static_cast<double>(steps);
    rec.train.l_sub *= inv_steps;
    rec.train.l_mat *= inv_steps;
    rec.train.l_kl *= inv_steps;
    rec.train.total = rec.train.l_sub + rec.train.l_mat + rec.train.l_kl;

    rec.eval = evaluate_losses(eval_set, params, opt);
    rec.report = metrics::evaluate(eval_set, params);
    if (rec.report.kl < best_kl) {
      best_kl = rec.report.kl;
      result.best_params = params;
      result.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(rec);
    result.log.push_back(rec);
  }
  result.final_params = std::move(params);
  return result;
}

}  // namespace samnet
