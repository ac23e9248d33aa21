// samnet: data generation, training, evaluation, gradient checking and
// memory inspection for the multi-branch memory head.
//
// stdout carries only machine-readable output (JSON, JSONL or CSV); all
// diagnostics, including the resolved configuration, go to stderr.
//
// Exit codes: 0 success, 2 usage error, 3 data/schema error, 4 numeric failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "samnet/samnet.hpp"

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t env_seed() {
  const char* s = std::getenv("SAMNET_SEED");
  if (!s || !*s) return 0;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != std::string(s).size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string("SAMNET_SEED is not a non-negative integer: '") + s + "'");
  }
}

void print_json(const ordered_json& j) { std::cout << j.dump() << '\n'; }

void log_resolved(const std::string& what, const std::string& body, std::uint64_t seed) {
  std::cerr << "# " << what << " (resolved)\n" << body;
  if (!body.empty() && body.back() != '\n') std::cerr << '\n';
  std::cerr << "# seed = " << seed << '\n';
}

// ---------------------------------------------------------------------------
// gen-data

struct GenArgs {
  samnet::GeneratorConfig cfg;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void setup_gen(CLI::App& app, GenArgs& a) {
  app.add_option("--out,-o", a.out, "Output dataset path (JSONL)")->required();
  app.add_option("--samples", a.cfg.samples, "Number of samples")->capture_default_str();
  app.add_option("--seed", a.seed, "Generator seed (default: $SAMNET_SEED or 0)");
  app.add_option("--latent-dim", a.cfg.latent_dim, "Latent dimension L")->capture_default_str();
  app.add_option("--feature-dim", a.cfg.feature_dim, "Feature dimension d1")->capture_default_str();
  app.add_option("--categories", a.cfg.categories, "Categories C")->capture_default_str();
  app.add_option("--annotators", a.cfg.annotators, "Annotators N")->capture_default_str();
  app.add_option("--noise", a.cfg.feature_noise, "Feature noise standard deviation")->capture_default_str();
  app.add_option("--temperature", a.cfg.temperature, "Vote temperature")->capture_default_str();
  app.add_option("--consensus", a.cfg.consensus, "Weight of the shared preference in [0, 1)")
      ->capture_default_str();
}

int run_gen(GenArgs& a) {
  a.cfg.seed = a.seed.value_or(env_seed());
  if (a.cfg.samples == 0) throw UsageError("--samples must be >= 1");
  const ordered_json resolved = {{"samples", a.cfg.samples},       {"L", a.cfg.latent_dim},
                                 {"d1", a.cfg.feature_dim},        {"C", a.cfg.categories},
                                 {"N", a.cfg.annotators},          {"noise", a.cfg.feature_noise},
                                 {"temperature", a.cfg.temperature}, {"consensus", a.cfg.consensus},
                                 {"seed", a.cfg.seed}};
  log_resolved("gen-data", resolved.dump(), a.cfg.seed);
  samnet::GeneratorSpec spec;
  try {
    spec = samnet::make_generator_spec(a.cfg);
  } catch (const samnet::InvalidArgument& e) {
    throw UsageError(e.what());
  }
  const samnet::Dataset ds = samnet::generate(spec);
  samnet::write_dataset(ds, fs::path(a.out));

  std::vector<double> freq(ds.categories, 0.0);
  for (const auto& s : ds.samples) {
    for (int v : s.votes) freq[static_cast<std::size_t>(v)] += 1.0;
  }
  const double total = static_cast<double>(ds.size() * ds.annotators);
  for (double& f : freq) f /= total;
  ordered_json out;
  out["samples"] = ds.size();
  out["C"] = ds.categories;
  out["N"] = ds.annotators;
  out["d1"] = ds.feature_dim;
  out["vote_frequencies"] = freq;
  out["seed"] = a.cfg.seed;
  out["path"] = a.out;
  print_json(out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// Shared training-config flags (train, grad-check)

struct ConfigArgs {
  std::string preset = "full";
  std::string config_path;
  std::optional<double> lr, lr_decay, weight_decay, train_frac;
  std::optional<std::size_t> decay_every, epochs, batch_size;
  std::optional<std::size_t> d1, d2, k, c, n;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> ablations;
  std::optional<std::string> loss_mode;
};

void setup_config(CLI::App& app, ConfigArgs& a, const std::string& default_preset) {
  a.preset = default_preset;
  app.add_option("--preset", a.preset, "Base configuration: full or desk")
      ->check(CLI::IsMember({"full", "desk"}))
      ->capture_default_str();
  app.add_option("--config", a.config_path, "TOML config file applied on top of the preset");
  app.add_option("--lr", a.lr, "Initial learning rate");
  app.add_option("--lr-decay", a.lr_decay, "Step decay factor");
  app.add_option("--decay-every", a.decay_every, "Epochs between decays");
  app.add_option("--weight-decay", a.weight_decay, "Coupled L2 weight decay");
  app.add_option("--epochs", a.epochs, "Number of epochs");
  app.add_option("--batch-size", a.batch_size, "Mini-batch size");
  app.add_option("--train-frac", a.train_frac, "Fraction of samples used for training");
  app.add_option("--seed", a.seed, "Seed (default: config, else $SAMNET_SEED, else 0)");
  app.add_option("--d1", a.d1, "Feature dimension");
  app.add_option("--d2", a.d2, "Embedding dimension");
  app.add_option("--K", a.k, "Memory slots per branch (0 bypasses the memory)");
  app.add_option("--C", a.c, "Categories");
  app.add_option("--N", a.n, "Branches (annotators)");
  app.add_option("--ablation", a.ablations, "no-memory, single-branch or no-subjectivity (repeatable)")
      ->check(CLI::IsMember({"no-memory", "single-branch", "no-subjectivity"}));
  app.add_option("--loss-mode", a.loss_mode, "match (Hungarian pairing) or ce (sorted pairing)")
      ->check(CLI::IsMember({"match", "ce"}));
}

samnet::TrainConfig resolve_config(const ConfigArgs& a) {
  samnet::TrainConfig c = a.preset == "desk" ? samnet::desk_config() : samnet::TrainConfig{};
  c.seed = env_seed();
  if (!a.config_path.empty()) {
    try {
      c = samnet::load_config(a.config_path, c);
    } catch (const samnet::InvalidArgument& e) {
      throw UsageError(std::string("config: ") + e.what());
    }
  }
  if (a.lr) c.lr = *a.lr;
  if (a.lr_decay) c.lr_decay = *a.lr_decay;
  if (a.weight_decay) c.weight_decay = *a.weight_decay;
  if (a.train_frac) c.train_frac = *a.train_frac;
  if (a.decay_every) c.decay_every = *a.decay_every;
  if (a.epochs) c.epochs = *a.epochs;
  if (a.batch_size) c.batch_size = *a.batch_size;
  if (a.seed) c.seed = *a.seed;
  if (a.d1) c.dims.feature_dim = *a.d1;
  if (a.d2) c.dims.embed_dim = *a.d2;
  if (a.k) c.dims.memory_slots = *a.k;
  if (a.c) c.dims.categories = *a.c;
  if (a.n) c.dims.branches = *a.n;
  for (const auto& ab : a.ablations) {
    if (ab == "no-memory") c.ablation.use_memory = false;
    if (ab == "single-branch") c.ablation.multi_branch = false;
    if (ab == "no-subjectivity") c.ablation.use_subjectivity_loss = false;
  }
  if (a.loss_mode) c.ablation.loss_mode = samnet::parse_loss_mode(*a.loss_mode);
  try {
    c.validate();
  } catch (const samnet::InvalidArgument& e) {
    throw UsageError(e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// train

struct TrainArgs {
  ConfigArgs config;
  std::string data;
  std::string out_dir;
};

void write_bytes(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw samnet::Error("cannot open '" + p.string() + "' for writing");
  out << text;
}

int run_train(TrainArgs& a) {
  const samnet::TrainConfig cfg = resolve_config(a.config);
  log_resolved("train config", samnet::to_toml(cfg), cfg.seed);
  const samnet::Dataset ds = samnet::read_dataset(fs::path(a.data));
  samnet::check_compatible(cfg, ds);
  const auto [train_set, eval_set] = samnet::split(ds.samples, cfg.train_frac, cfg.seed);

  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_bytes(dir / "config.toml", samnet::to_toml(cfg));
  std::ofstream log(dir / "epochs.jsonl", std::ios::binary);
  if (!log) throw samnet::Error("cannot open epoch log in '" + dir.string() + "'");

  const samnet::TrainResult r = samnet::train(cfg, train_set, eval_set, [&](const samnet::EpochRecord& rec) {
    log << samnet::to_json(rec).dump() << '\n';
    log.flush();
    std::cerr << "epoch " << rec.epoch << " lr " << rec.lr << " train " << rec.train.total << " eval_kl "
              << rec.report.kl << '\n';
  });
  samnet::save_checkpoint(r.final_params, dir / "final.ckpt");
  samnet::save_checkpoint(r.best_params, dir / "best.ckpt");

  ordered_json out;
  out["train_samples"] = train_set.size();
  out["eval_samples"] = eval_set.size();
  out["epochs"] = r.log.size();
  out["seed"] = cfg.seed;
  out["best_epoch"] = r.best_epoch;
  out["initial_eval"] = samnet::metrics::to_json(r.initial_report);
  out["initial_eval_loss"] = samnet::to_json(r.initial_eval);
  out["final_eval"] = samnet::metrics::to_json(r.log.back().report);
  out["best_eval"] = samnet::metrics::to_json(r.log[r.best_epoch].report);
  out["final_checkpoint"] = (dir / "final.ckpt").string();
  out["best_checkpoint"] = (dir / "best.ckpt").string();
  out["log"] = (dir / "epochs.jsonl").string();
  print_json(out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// eval

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  std::string subset = "all";
  std::optional<std::uint64_t> seed;
  double train_frac = 0.8;
  bool csv = false;
  bool raw = false;
};

std::vector<samnet::VoteSample> select_subset(const samnet::Dataset& ds, const std::string& subset,
                                              std::uint64_t seed, double train_frac) {
  if (subset == "all") return ds.samples;
  auto [tr, ev] = samnet::split(ds.samples, train_frac, seed);
  return subset == "train" ? tr : ev;
}

int run_eval(EvalArgs& a) {
  const std::uint64_t seed = a.seed.value_or(env_seed());
  const ordered_json resolved = {{"checkpoint", a.checkpoint}, {"data", a.data},         {"subset", a.subset},
                                 {"train_frac", a.train_frac}, {"seed", seed},           {"raw", a.raw}};
  log_resolved("eval", resolved.dump(), seed);
  if (!(a.train_frac > 0.0 && a.train_frac < 1.0)) throw UsageError("--train-frac must lie in (0, 1)");
  const samnet::ModelParams params = samnet::load_checkpoint(a.checkpoint);
  const samnet::Dataset ds = samnet::read_dataset(fs::path(a.data));
  if (ds.feature_dim != params.dims.feature_dim || ds.categories != params.dims.categories) {
    throw samnet::SchemaError("dataset header {d1:" + std::to_string(ds.feature_dim) + ",C:" +
                              std::to_string(ds.categories) + "} does not match checkpoint dims " +
                              params.dims.to_string());
  }
  const auto samples = select_subset(ds, a.subset, seed, a.train_frac);
  const samnet::metrics::MetricReport r = samnet::metrics::evaluate(samples, params, a.raw);
  if (a.csv) {
    std::cout << samnet::metrics::kCsvHeader << '\n' << samnet::metrics::to_csv_row(r) << '\n';
  } else {
    print_json(samnet::metrics::to_json(r));
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grad-check

struct GradArgs {
  ConfigArgs config;
  double tolerance = 1e-4;
};

int run_grad_check(GradArgs& a) {
  const samnet::TrainConfig cfg = resolve_config(a.config);
  log_resolved("grad-check config", samnet::to_toml(cfg), cfg.seed);
  samnet::GradCheckReport r;
  try {
    r = samnet::grad_check(cfg, a.tolerance);
  } catch (const samnet::InvalidArgument& e) {
    throw UsageError(e.what());
  }
  ordered_json out;
  out["passed"] = r.passed;
  out["tolerance"] = r.tolerance;
  out["max_relative_error"] = r.max_relative_error();
  out["seed"] = cfg.seed;
  out["blocks"] = ordered_json::array();
  for (const auto& b : r.blocks) {
    out["blocks"].push_back({{"branch", b.branch},
                             {"block", samnet::block_name(b.kind)},
                             {"entries", b.entries},
                             {"max_relative_error", b.max_relative_error},
                             {"max_absolute_error", b.max_absolute_error},
                             {"passed", b.passed}});
  }
  print_json(out);
  return kExitOk;
}

// ---------------------------------------------------------------------------
// inspect-memory

struct InspectArgs {
  std::string checkpoint;
  std::string data;
  std::string sample_id;
  std::size_t top = 5;
};

int run_inspect(InspectArgs& a) {
  const ordered_json resolved = {
      {"checkpoint", a.checkpoint}, {"data", a.data}, {"sample_id", a.sample_id}, {"top", a.top}};
  log_resolved("inspect-memory", resolved.dump(), env_seed());
  const samnet::ModelParams params = samnet::load_checkpoint(a.checkpoint);
  const samnet::Dataset ds = samnet::read_dataset(fs::path(a.data));
  if (ds.feature_dim != params.dims.feature_dim) {
    throw samnet::SchemaError("dataset d1 " + std::to_string(ds.feature_dim) + " does not match checkpoint dims " +
                              params.dims.to_string());
  }
  const samnet::VoteSample* found = nullptr;
  for (const auto& s : ds.samples) {
    if (s.id == a.sample_id) {
      found = &s;
      break;
    }
  }
  if (!found) throw samnet::LookupError("sample id '" + a.sample_id + "' not found in " + a.data);
  ordered_json out;
  out["sample_id"] = found->id;
  out["votes"] = found->votes;
  out["distribution"] = found->distribution;
  const ordered_json report = samnet::to_json(samnet::inspect_memory(params, found->features, a.top));
  for (auto it = report.begin(); it != report.end(); ++it) out[it.key()] = it.value();
  print_json(out);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"samnet: subjectivity-aware emotion distribution learning at desk scale"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "samnet 1.0");

  GenArgs gen;
  TrainArgs tr;
  EvalArgs ev;
  GradArgs gc;
  InspectArgs in;

  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic crowd-voting dataset");
  setup_gen(*gen_cmd, gen);

  auto* train_cmd = app.add_subcommand("train", "Train the model; writes checkpoints and an epoch log");
  setup_config(*train_cmd, tr.config, "full");
  train_cmd->add_option("--data", tr.data, "Dataset path")->required();
  train_cmd->add_option("--out-dir", tr.out_dir, "Directory for checkpoints and log")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Checkpoint path")->required();
  eval_cmd->add_option("--data", ev.data, "Dataset path")->required();
  eval_cmd->add_option("--subset", ev.subset, "all, train or test (split as in training)")
      ->check(CLI::IsMember({"all", "train", "test"}))
      ->capture_default_str();
  eval_cmd->add_option("--seed", ev.seed, "Split seed (default: $SAMNET_SEED or 0)");
  eval_cmd->add_option("--train-frac", ev.train_frac, "Split fraction")->capture_default_str();
  eval_cmd->add_flag("--csv", ev.csv, "Print a CSV header and row instead of JSON");
  eval_cmd->add_flag("--raw", ev.raw, "Report Clark and Canberra without normalization");

  auto* grad_cmd = app.add_subcommand("grad-check", "Compare analytic and finite-difference gradients");
  setup_config(*grad_cmd, gc.config, "desk");
  grad_cmd->add_option("--tolerance", gc.tolerance, "Max relative error per block")->capture_default_str();

  auto* inspect_cmd = app.add_subcommand("inspect-memory", "Per-branch memory attention for one sample");
  inspect_cmd->add_option("--checkpoint", in.checkpoint, "Checkpoint path")->required();
  inspect_cmd->add_option("--data", in.data, "Dataset path")->required();
  inspect_cmd->add_option("--sample-id", in.sample_id, "Sample id")->required();
  inspect_cmd->add_option("--top", in.top, "Number of top slots to report")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return run_gen(gen);
    if (*train_cmd) return run_train(tr);
    if (*eval_cmd) return run_eval(ev);
    if (*grad_cmd) return run_grad_check(gc);
    if (*inspect_cmd) return run_inspect(in);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const samnet::InvalidArgument& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const samnet::NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const samnet::Error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitUsage;
}
