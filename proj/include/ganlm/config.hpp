#pragma once

// Run configuration file.
//
//   # comment
//   preset = table2-64          (top level, before any section)
//   seed = 7
//   [encoder]
//   model_dim = 64
//
// Keys outside the known table are rejected. A preset is expanded first, so
// explicit keys override it no matter where they appear in the file.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ganlm/data.hpp"
#include "ganlm/encoder.hpp"
#include "ganlm/errors.hpp"
#include "ganlm/ssgan.hpp"
#include "ganlm/textnorm.hpp"

namespace ganlm {

struct PathsConfig {
  std::string corpus;
  std::string vocab;
  std::string checkpoint;
  std::string out_dir = "run";
};

struct DataConfig {
  std::vector<std::string> classes{"fake", "authentic"};
  std::string positive_class = "fake";
  std::size_t max_vocab = 30000;
  std::size_t min_freq = 1;
  std::size_t max_len = 64;  // tokens per row including [CLS]
};

struct SynthConfig {
  std::size_t n_per_class = 600;
  std::size_t vocab_size = 500;
  std::size_t markers_per_class = 20;
  double marker_rate = 0.3;
  std::size_t min_len = 64;
  std::size_t max_len = 64;
};

struct RunConfig {
  std::optional<std::string> preset;
  std::uint64_t seed = 0;
  PathsConfig paths;
  DataConfig data;
  NormalizerConfig normalizer;
  EncoderConfig encoder;  // vocab_size comes from the vocabulary file
  SsganConfig ssgan;
  SplitSpec split;
  PretrainConfig pretrain;
  SynthConfig synth;

  // Messages lead with the offending key so the parser can point at its line.
  void validate() const {
    auto check = [](bool ok, const char* key, const char* what) {
      if (!ok) throw ConfigError(std::string(key) + ": " + what);
    };
    check(!normalizer.url_token.empty(), "normalizer.url_token", "must not be empty");
    check(!normalizer.emoji_token.empty(), "normalizer.emoji_token", "must not be empty");
    normalizer.validate();
    check(data.classes.size() >= 2, "data.classes", "needs at least two names");
    try {
      (void)ClassSet(data.classes);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("data.classes: ") + e.what());
    }
    check(std::find(data.classes.begin(), data.classes.end(), data.positive_class) != data.classes.end(),
          "data.positive_class", "is not one of data.classes");
    check(data.max_len >= 2, "data.max_len", "must be >= 2");
    check(data.max_vocab > Vocab::kReserved, "data.max_vocab", "must exceed the reserved tokens");
    check(encoder.model_dim >= 1, "encoder.model_dim", "must be >= 1");
    check(encoder.n_layers >= 1, "encoder.n_layers", "must be >= 1");
    check(encoder.n_heads >= 1 && encoder.model_dim % encoder.n_heads == 0, "encoder.n_heads",
          "must be >= 1 and divide model_dim");
    check(encoder.max_len >= data.max_len, "encoder.max_len", "must be >= data.max_len");
    check(encoder.dropout >= 0.0 && encoder.dropout < 1.0, "encoder.dropout", "must lie in [0, 1)");
    check(ssgan.batch_size >= 1, "ssgan.batch_size", "must be >= 1");
    check(ssgan.lr_d > 0.0, "ssgan.lr_d", "must be > 0");
    check(ssgan.lr_g > 0.0, "ssgan.lr_g", "must be > 0");
    check(ssgan.weight_decay >= 0.0, "ssgan.weight_decay", "must be >= 0");
    check(ssgan.epochs >= 1, "ssgan.epochs", "must be >= 1");
    check(ssgan.noise_dim >= 1, "ssgan.noise_dim", "must be >= 1");
    check(ssgan.k == data.classes.size(), "ssgan.k", "must equal the number of data.classes");
    check(ssgan.dropout >= 0.0 && ssgan.dropout < 1.0, "ssgan.dropout", "must lie in [0, 1)");
    check(pretrain.batch_size >= 1, "pretrain.batch_size", "must be >= 1");
    check(pretrain.learning_rate > 0.0, "pretrain.learning_rate", "must be > 0");
    check(pretrain.mask_rate > 0.0 && pretrain.mask_rate < 1.0, "pretrain.mask_rate", "must lie in (0, 1)");
    check(pretrain.weight_decay >= 0.0, "pretrain.weight_decay", "must be >= 0");
    check(synth.marker_rate >= 0.0 && synth.marker_rate <= 1.0, "synth.marker_rate", "must lie in [0, 1]");
    check(synth.min_len >= 1 && synth.min_len <= synth.max_len, "synth.min_len", "must lie in [1, synth.max_len]");
    check(synth.n_per_class >= 1, "synth.n_per_class", "must be >= 1");
  }
};

struct Preset {
  std::string name;
  std::size_t n_labeled, n_unlabeled, n_test;
};

// Labeled / unlabeled / test sizes of the six grid rows; all share batch 16,
// learning rate 5e-5 and 7 epochs.
inline const std::vector<Preset>& presets() {
  static const std::vector<Preset> p{{"table2-32", 32, 512, 512},   {"table2-64", 64, 512, 512},
                                     {"table2-128", 128, 512, 512}, {"table2-256", 256, 512, 512},
                                     {"table2-512", 512, 512, 512}, {"table2-1024", 1024, 512, 128}};
  return p;
}

inline const Preset& find_preset(const std::string& name) {
  for (const auto& p : presets())
    if (p.name == name) return p;
  std::string known;
  for (const auto& p : presets()) known += (known.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

inline void apply_preset(RunConfig& cfg, const std::string& name) {
  const auto& p = find_preset(name);
  cfg.preset = p.name;
  cfg.split.n_labeled = p.n_labeled;
  cfg.split.n_unlabeled = p.n_unlabeled;
  cfg.split.n_test = p.n_test;
  cfg.ssgan.batch_size = 16;
  cfg.ssgan.lr_d = cfg.ssgan.lr_g = 5e-5;
  cfg.ssgan.epochs = 7;
}

namespace config_detail {

inline std::string trim(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::size_t to_size(const std::string& v) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); }))
    throw ConfigError("expected a non-negative integer, got '" + v + "'");
  try {
    return static_cast<std::size_t>(std::stoull(v));
  } catch (const std::exception&) {
    throw ConfigError("integer out of range: '" + v + "'");
  }
}

inline double to_double(const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return d;
}

inline bool to_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

inline std::vector<std::string> to_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

#define GANLM_SIZE(field) [](RunConfig& c, const std::string& v) { c.field = to_size(v); }
#define GANLM_REAL(field) [](RunConfig& c, const std::string& v) { c.field = to_double(v); }
#define GANLM_BOOL(field) [](RunConfig& c, const std::string& v) { c.field = to_bool(v); }
#define GANLM_TEXT(field) [](RunConfig& c, const std::string& v) { c.field = v; }

inline const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table{
      {"seed", [](RunConfig& c, const std::string& v) { c.seed = to_size(v); }},
      {"paths.corpus", GANLM_TEXT(paths.corpus)},
      {"paths.vocab", GANLM_TEXT(paths.vocab)},
      {"paths.checkpoint", GANLM_TEXT(paths.checkpoint)},
      {"paths.out_dir", GANLM_TEXT(paths.out_dir)},
      {"data.classes", [](RunConfig& c, const std::string& v) { c.data.classes = to_list(v); }},
      {"data.positive_class", GANLM_TEXT(data.positive_class)},
      {"data.max_vocab", GANLM_SIZE(data.max_vocab)},
      {"data.min_freq", GANLM_SIZE(data.min_freq)},
      {"data.max_len", GANLM_SIZE(data.max_len)},
      {"normalizer.url_token", GANLM_TEXT(normalizer.url_token)},
      {"normalizer.emoji_token", GANLM_TEXT(normalizer.emoji_token)},
      {"normalizer.unicode_nfkc", GANLM_BOOL(normalizer.unicode_nfkc)},
      {"normalizer.collapse_whitespace", GANLM_BOOL(normalizer.collapse_whitespace)},
      {"normalizer.normalize_quotes", GANLM_BOOL(normalizer.normalize_quotes)},
      {"encoder.model_dim", GANLM_SIZE(encoder.model_dim)},
      {"encoder.n_layers", GANLM_SIZE(encoder.n_layers)},
      {"encoder.n_heads", GANLM_SIZE(encoder.n_heads)},
      {"encoder.ffn_dim", GANLM_SIZE(encoder.ffn_dim)},
      {"encoder.max_len", GANLM_SIZE(encoder.max_len)},
      {"encoder.dropout", GANLM_REAL(encoder.dropout)},
      {"ssgan.batch_size", GANLM_SIZE(ssgan.batch_size)},
      {"ssgan.lr_d", GANLM_REAL(ssgan.lr_d)},
      {"ssgan.lr_g", GANLM_REAL(ssgan.lr_g)},
      {"ssgan.weight_decay", GANLM_REAL(ssgan.weight_decay)},
      {"ssgan.epochs", GANLM_SIZE(ssgan.epochs)},
      {"ssgan.noise_dim", GANLM_SIZE(ssgan.noise_dim)},
      {"ssgan.hidden_dim", GANLM_SIZE(ssgan.hidden_dim)},
      {"ssgan.k", GANLM_SIZE(ssgan.k)},
      {"ssgan.slope", GANLM_REAL(ssgan.slope)},
      {"ssgan.dropout", GANLM_REAL(ssgan.dropout)},
      {"split.n_labeled", GANLM_SIZE(split.n_labeled)},
      {"split.n_unlabeled", GANLM_SIZE(split.n_unlabeled)},
      {"split.n_test", GANLM_SIZE(split.n_test)},
      {"split.stratified", GANLM_BOOL(split.stratified)},
      {"pretrain.epochs", GANLM_SIZE(pretrain.epochs)},
      {"pretrain.batch_size", GANLM_SIZE(pretrain.batch_size)},
      {"pretrain.learning_rate", GANLM_REAL(pretrain.learning_rate)},
      {"pretrain.mask_rate", GANLM_REAL(pretrain.mask_rate)},
      {"pretrain.weight_decay", GANLM_REAL(pretrain.weight_decay)},
      {"synth.n_per_class", GANLM_SIZE(synth.n_per_class)},
      {"synth.vocab_size", GANLM_SIZE(synth.vocab_size)},
      {"synth.markers_per_class", GANLM_SIZE(synth.markers_per_class)},
      {"synth.marker_rate", GANLM_REAL(synth.marker_rate)},
      {"synth.min_len", GANLM_SIZE(synth.min_len)},
      {"synth.max_len", GANLM_SIZE(synth.max_len)},
  };
  return table;
}

#undef GANLM_SIZE
#undef GANLM_REAL
#undef GANLM_BOOL
#undef GANLM_TEXT

}  // namespace config_detail

inline std::vector<std::string> config_keys() {
  std::vector<std::string> keys{"preset"};
  for (const auto& [k, _] : config_detail::setters()) keys.push_back(k);
  return keys;
}

// Errors carry the 1-based line of the offending entry.
inline RunConfig parse_config(std::istream& in) {
  using namespace config_detail;
  struct Entry {
    std::string key, value;
    std::size_t line;
  };
  std::vector<Entry> entries;
  std::optional<Entry> preset;
  std::string section, raw;
  std::size_t line_no = 0;
  std::map<std::string, std::size_t> seen;
  auto fail = [&](const std::string& msg, std::size_t line) -> ConfigError {
    return ConfigError("line " + std::to_string(line) + ": " + msg);
  };
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw fail("unterminated section header", line_no);
      section = trim(line.substr(1, line.size() - 2));
      static const char* known[] = {"paths", "data", "normalizer", "encoder", "ssgan", "split", "pretrain", "synth"};
      if (std::find(std::begin(known), std::end(known), section) == std::end(known))
        throw fail("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw fail("expected 'key = value'", line_no);
    const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
    if (key.empty()) throw fail("empty key", line_no);
    const std::string full = section.empty() ? key : section + "." + key;
    if (auto [it, fresh] = seen.emplace(full, line_no); !fresh)
      throw fail("duplicate key '" + full + "' (first on line " + std::to_string(it->second) + ")", line_no);
    if (full == "preset") {
      preset = Entry{full, value, line_no};
    } else if (!setters().count(full)) {
      throw fail("unknown key '" + full + "'", line_no);
    } else {
      entries.push_back({full, value, line_no});
    }
  }
  RunConfig cfg;
  if (preset) {
    try {
      apply_preset(cfg, preset->value);
    } catch (const ConfigError& e) {
      throw fail(e.what(), preset->line);
    }
  }
  for (const auto& e : entries) {
    try {
      setters().at(e.key)(cfg, e.value);
    } catch (const ConfigError& err) {
      throw fail(e.key + ": " + err.what(), e.line);
    }
  }
  try {
    cfg.validate();
  } catch (const ConfigError& err) {
    const std::string msg = err.what();
    const std::string key = msg.substr(0, msg.find(':'));
    for (const auto& e : entries)
      if (e.key == key) throw fail(msg, e.line);
    throw;
  }
  cfg.split.seed = cfg.seed;
  cfg.ssgan.seed = cfg.seed;
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config '" + path + "'");
  return parse_config(in);
}

}  // namespace ganlm
