#pragma once

#include <cctype>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>

#include <nlohmann/json.hpp>

#include "samnet/core/errors.hpp"
#include "samnet/losses/losses.hpp"
#include "samnet/model/model.hpp"

namespace samnet {

struct Ablation {
  bool multi_branch = true;
  bool use_memory = true;
  bool use_subjectivity_loss = true;
  LossMode loss_mode = LossMode::Match;  // Match or Ordered ("ce")

  friend bool operator==(const Ablation&, const Ablation&) = default;
};

struct TrainConfig {
  double lr = 1e-5;
  double lr_decay = 0.1;
  std::size_t decay_every = 10;
  double weight_decay = 5e-5;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double train_frac = 0.8;
  Dims dims{};
  Ablation ablation{};

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;

  void validate() const {
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidArgument("lr must be >= 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw InvalidArgument("lr_decay must lie in (0, 1]");
    if (decay_every == 0) throw InvalidArgument("decay_every must be >= 1");
    if (!(weight_decay >= 0.0)) throw InvalidArgument("weight_decay must be >= 0");
    if (epochs == 0) throw InvalidArgument("epochs must be >= 1");
    if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
    if (!(train_frac > 0.0 && train_frac < 1.0)) throw InvalidArgument("train_frac must lie in (0, 1)");
    dims.validate();
  }

  /// Dims of the model actually built once ablations are applied.
  Dims model_dims() const {
    Dims d = dims;
    if (!ablation.multi_branch) d.branches = 1;
    if (!ablation.use_memory) d.memory_slots = 0;
    return d;
  }

  LossMode effective_mode() const { return ablation.multi_branch ? ablation.loss_mode : LossMode::Dominant; }

  /// Learning rate in effect during 0-based epoch `e`.
  double lr_at(std::size_t e) const {
    double rate = lr;
    for (std::size_t k = 0; k < e / decay_every; ++k) rate *= lr_decay;
    return rate;
  }
};

/// Configuration the test suite and acceptance runs use for the desk-scale
/// synthetic set. The full-scale defaults (lr 1e-5, d2 1024, K 1000) barely
/// move a 16-dimensional head in 50 epochs.
inline TrainConfig desk_config(std::uint64_t seed = 0) {
  TrainConfig c;
  c.lr = 1e-2;
  c.dims = kDeskDims;
  c.seed = seed;
  return c;
}

inline const char* loss_mode_name(LossMode m) {
  switch (m) {
    case LossMode::Match: return "match";
    case LossMode::Ordered: return "ce";
    case LossMode::Dominant: return "dominant";
  }
  return "?";
}

inline LossMode parse_loss_mode(const std::string& s) {
  if (s == "match") return LossMode::Match;
  if (s == "ce") return LossMode::Ordered;
  throw InvalidArgument("loss_mode must be \"match\" or \"ce\", got \"" + s + "\"");
}

// ---------------------------------------------------------------------------
// Flat TOML subset: [table] headers, key = value with integer, float,
// boolean or basic-string values, '#' comments.

using TomlValue = std::variant<std::int64_t, double, bool, std::string>;

inline std::map<std::string, TomlValue> parse_toml(std::istream& in) {
  std::map<std::string, TomlValue> out;
  std::string line, table;
  std::size_t lineno = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return std::string();
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments outside strings.
    bool in_str = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      if (line[i] == '"' && (i == 0 || line[i - 1] != '\\')) in_str = !in_str;
      if (line[i] == '#' && !in_str) {
        line.erase(i);
        break;
      }
    }
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ParseError("unterminated table header", lineno);
      table = trim(line.substr(1, line.size() - 2));
      if (table.empty()) throw ParseError("empty table name", lineno);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ParseError("expected key = value", lineno);
    const std::string key = trim(line.substr(0, eq));
    const std::string raw = trim(line.substr(eq + 1));
    if (key.empty() || raw.empty()) throw ParseError("expected key = value", lineno);
    for (char ch : key) {
      if (!(std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '-')) {
        throw ParseError("invalid key '" + key + "'", lineno);
      }
    }
    const std::string full = table.empty() ? key : table + "." + key;
    if (out.count(full)) throw ParseError("duplicate key '" + full + "'", lineno);

    TomlValue v;
    if (raw.front() == '"') {
      if (raw.size() < 2 || raw.back() != '"') throw ParseError("unterminated string", lineno);
      v = raw.substr(1, raw.size() - 2);
    } else if (raw == "true" || raw == "false") {
      v = raw == "true";
    } else {
      std::string num;
      for (char ch : raw) {
        if (ch != '_') num.push_back(ch);
      }
      std::int64_t iv{};
      auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), iv);
      if (ec == std::errc() && p == num.data() + num.size()) {
        v = iv;
      } else {
        double dv{};
        auto [p2, ec2] = std::from_chars(num.data(), num.data() + num.size(), dv);
        if (ec2 != std::errc() || p2 != num.data() + num.size()) {
          throw ParseError("unrecognized value '" + raw + "'", lineno);
        }
        v = dv;
      }
    }
    out.emplace(full, std::move(v));
  }
  return out;
}

namespace detail {

inline double toml_number(const TomlValue& v, const std::string& key) {
  if (auto* i = std::get_if<std::int64_t>(&v)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&v)) return *d;
  throw InvalidArgument("config key '" + key + "' must be a number");
}

inline std::uint64_t toml_unsigned(const TomlValue& v, const std::string& key) {
  auto* i = std::get_if<std::int64_t>(&v);
  if (!i || *i < 0) throw InvalidArgument("config key '" + key + "' must be a non-negative integer");
  return static_cast<std::uint64_t>(*i);
}

inline bool toml_bool(const TomlValue& v, const std::string& key) {
  auto* b = std::get_if<bool>(&v);
  if (!b) throw InvalidArgument("config key '" + key + "' must be a boolean");
  return *b;
}

}  // namespace detail

/// Applies parsed keys on top of `base`. Unknown keys are rejected.
inline TrainConfig apply_toml(const std::map<std::string, TomlValue>& kv, TrainConfig base) {
  using namespace detail;
  for (const auto& [key, v] : kv) {
    if (key == "lr") base.lr = toml_number(v, key);
    else if (key == "lr_decay") base.lr_decay = toml_number(v, key);
    else if (key == "decay_every") base.decay_every = toml_unsigned(v, key);
    else if (key == "weight_decay") base.weight_decay = toml_number(v, key);
    else if (key == "epochs") base.epochs = toml_unsigned(v, key);
    else if (key == "batch_size") base.batch_size = toml_unsigned(v, key);
    else if (key == "seed") base.seed = toml_unsigned(v, key);
    else if (key == "train_frac") base.train_frac = toml_number(v, key);
    else if (key == "dims.d1") base.dims.feature_dim = toml_unsigned(v, key);
    else if (key == "dims.d2") base.dims.embed_dim = toml_unsigned(v, key);
    else if (key == "dims.K") base.dims.memory_slots = toml_unsigned(v, key);
    else if (key == "dims.C") base.dims.categories = toml_unsigned(v, key);
    else if (key == "dims.N") base.dims.branches = toml_unsigned(v, key);
    else if (key == "ablation.multi_branch") base.ablation.multi_branch = toml_bool(v, key);
    else if (key == "ablation.use_memory") base.ablation.use_memory = toml_bool(v, key);
    else if (key == "ablation.use_subjectivity_loss") base.ablation.use_subjectivity_loss = toml_bool(v, key);
    else if (key == "ablation.loss_mode") {
      auto* s = std::get_if<std::string>(&v);
      if (!s) throw InvalidArgument("config key 'ablation.loss_mode' must be a string");
      base.ablation.loss_mode = parse_loss_mode(*s);
    } else {
      throw InvalidArgument("unknown config key '" + key + "'");
    }
  }
  return base;
}

inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config '" + path.string() + "'");
  return apply_toml(parse_toml(in), std::move(base));
}

/// The config as TOML text; parsing it back yields the same config.
inline std::string to_toml(const TrainConfig& c) {
  auto num = [](double x) {
    std::string s = nlohmann::json(x).dump();
    if (s.find_first_of(".eE") == std::string::npos) s += ".0";
    return s;
  };
  std::ostringstream o;
  o << "lr = " << num(c.lr) << "\n"
    << "lr_decay = " << num(c.lr_decay) << "\n"
    << "decay_every = " << c.decay_every << "\n"
    << "weight_decay = " << num(c.weight_decay) << "\n"
    << "epochs = " << c.epochs << "\n"
    << "batch_size = " << c.batch_size << "\n"
    << "seed = " << c.seed << "\n"
    << "train_frac = " << num(c.train_frac) << "\n\n"
    << "[dims]\n"
    << "d1 = " << c.dims.feature_dim << "\n"
    << "d2 = " << c.dims.embed_dim << "\n"
    << "K = " << c.dims.memory_slots << "\n"
    << "C = " << c.dims.categories << "\n"
    << "N = " << c.dims.branches << "\n\n"
    << "[ablation]\n"
    << "multi_branch = " << (c.ablation.multi_branch ? "true" : "false") << "\n"
    << "use_memory = " << (c.ablation.use_memory ? "true" : "false") << "\n"
    << "use_subjectivity_loss = " << (c.ablation.use_subjectivity_loss ? "true" : "false") << "\n"
    << "loss_mode = \"" << loss_mode_name(c.ablation.loss_mode) << "\"\n";
  return o.str();
}

}  // namespace samnet
