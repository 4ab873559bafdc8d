#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "json.hpp"

#include "ganlm/errors.hpp"
#include "ganlm/rng.hpp"
#include "ganlm/tensor.hpp"
#include "ganlm/textnorm.hpp"

namespace ganlm {

// The task's k class names; index order is label order.
class ClassSet {
 public:
  ClassSet() = default;
  explicit ClassSet(std::vector<std::string> names) : names_(std::move(names)) {
    std::set<std::string> seen;
    for (const auto& n : names_) {
      if (n.empty() || n == "-") throw ConfigError("invalid class name '" + n + "'");
      if (!seen.insert(n).second) throw ConfigError("duplicate class name '" + n + "'");
    }
  }

  std::size_t size() const noexcept { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_.at(i); }
  const std::vector<std::string>& names() const noexcept { return names_; }

  std::optional<int> index_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
      if (names_[i] == name) return static_cast<int>(i);
    return std::nullopt;
  }

  int require(std::string_view name) const {
    auto i = index_of(name);
    if (!i) throw LabelError("unknown label '" + std::string(name) + "'");
    return *i;
  }

 private:
  std::vector<std::string> names_;
};

struct Review {
  std::string id;
  std::string text;
  std::optional<std::string> label;
};

using Corpus = std::vector<Review>;

// ---------------------------------------------------------------------------
// Corpus files: UTF-8, one JSON object per line,
//   {"id": "<string>", "text": "<string>", "label": "<class name>"}
// with "label" optional (absent or null for unlabeled records). Blank lines are
// ignored.

inline Corpus read_corpus(std::istream& in, const ClassSet& classes, const NormalizerConfig& norm = {}) {
  Corpus corpus;
  std::set<std::string> ids;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
    if (!obj.is_object()) throw ParseError("record is not an object", line_no);
    for (const auto& [key, _] : obj.items())
      if (key != "id" && key != "text" && key != "label") throw ParseError("unknown field '" + key + "'", line_no);
    if (!obj.contains("id") || !obj["id"].is_string()) throw ParseError("missing string field 'id'", line_no);
    if (!obj.contains("text") || !obj["text"].is_string()) throw ParseError("missing string field 'text'", line_no);
    Review r;
    r.id = obj["id"].get<std::string>();
    if (r.id.empty()) throw ParseError("empty id", line_no);
    r.text = normalize_text(obj["text"].get<std::string>(), norm);
    if (r.text.empty()) throw ParseError("text of '" + r.id + "' is empty after normalization", line_no);
    if (obj.contains("label") && !obj["label"].is_null()) {
      if (!obj["label"].is_string()) throw ParseError("field 'label' must be a string", line_no);
      auto label = obj["label"].get<std::string>();
      if (!classes.index_of(label)) throw LabelError("line " + std::to_string(line_no) + ": unknown label '" + label + "'");
      r.label = std::move(label);
    }
    if (!ids.insert(r.id).second) {
      throw UniquenessError("line " + std::to_string(line_no) + ": duplicate id '" + r.id + "'");
    }
    corpus.push_back(std::move(r));
  }
  return corpus;
}

inline Corpus load_corpus(const std::string& path, const ClassSet& classes, const NormalizerConfig& norm = {}) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file '" + path + "'");
  return read_corpus(in, classes, norm);
}

inline void write_corpus(std::ostream& out, const Corpus& corpus) {
  for (const auto& r : corpus) {
    nlohmann::ordered_json obj;
    obj["id"] = r.id;
    obj["text"] = r.text;
    if (r.label) obj["label"] = *r.label;
    out << obj.dump() << '\n';
  }
}

inline void save_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus file '" + path + "'");
  write_corpus(out, corpus);
}

// ---------------------------------------------------------------------------
// Tokenizer: whitespace separates tokens; every Unicode punctuation character
// is a token of its own.

inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  const icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(text.data(), static_cast<int32_t>(text.size())));
  icu::UnicodeString current;
  auto flush = [&] {
    if (current.isEmpty()) return;
    std::string s;
    current.toUTF8String(s);
    tokens.push_back(std::move(s));
    current.remove();
  };
  for (int32_t i = 0; i < u.length();) {
    const UChar32 c = u.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      flush();
    } else if (u_ispunct(c)) {
      flush();
      current.append(c);
      flush();
    } else {
      current.append(c);
    }
  }
  flush();
  return tokens;
}

class Vocab {
 public:
  static constexpr int kPad = 0;
  static constexpr int kUnk = 1;
  static constexpr int kCls = 2;
  static constexpr int kMask = 3;
  static constexpr int kReserved = 4;

  Vocab() : tokens_{"[PAD]", "[UNK]", "[CLS]", "[MASK]"} {
    for (int i = 0; i < kReserved; ++i) index_.emplace(tokens_[static_cast<std::size_t>(i)], i);
  }

  std::size_t size() const noexcept { return tokens_.size(); }

  int id(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kUnk : it->second;
  }

  bool contains(std::string_view token) const { return index_.count(std::string(token)) != 0; }

  const std::string& token(int id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) throw IndexError("token id " + std::to_string(id) + " out of range");
    return tokens_[static_cast<std::size_t>(id)];
  }

  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  void add(const std::string& token) {
    if (index_.count(token)) throw UniquenessError("duplicate vocabulary token '" + token + "'");
    index_.emplace(token, static_cast<int>(tokens_.size()));
    tokens_.push_back(token);
  }

  // One token per line; line number (from 0) is the id.
  void save(std::ostream& out) const {
    for (const auto& t : tokens_) out << t << '\n';
  }

  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write vocab file '" + path + "'");
    save(out);
  }

  static Vocab load(std::istream& in) {
    Vocab v;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line_no <= static_cast<std::size_t>(kReserved)) {
        if (line != v.tokens_[line_no - 1]) {
          throw ParseError("expected reserved token " + v.tokens_[line_no - 1] + ", got '" + line + "'", line_no);
        }
        continue;
      }
      if (line.empty()) throw ParseError("empty vocabulary token", line_no);
      if (v.contains(line)) throw ParseError("duplicate vocabulary token '" + line + "'", line_no);
      v.add(line);
    }
    if (line_no < static_cast<std::size_t>(kReserved)) throw ParseError("vocab file lacks the reserved tokens", line_no);
    return v;
  }

  static Vocab load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open vocab file '" + path + "'");
    return load(in);
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> index_;
};

// Most frequent tokens first (ties: lexicographic byte order), keeping tokens
// seen at least min_freq times, until the vocabulary holds max_vocab entries
// including the four reserved ones.
inline Vocab build_vocab(const Corpus& corpus, std::size_t max_vocab, std::size_t min_freq = 1) {
  std::map<std::string, std::size_t> counts;
  for (const auto& r : corpus)
    for (auto& t : tokenize(r.text)) ++counts[t];
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocab v;
  for (const auto& [tok, n] : ranked) {
    if (v.size() >= max_vocab) break;
    if (n < min_freq) break;
    if (v.contains(tok)) continue;  // a literal "[PAD]" etc. in the text
    v.add(tok);
  }
  return v;
}

struct EncodedBatch {
  std::size_t rows = 0;
  std::size_t max_len = 0;
  std::vector<int> token_ids;        // rows x max_len
  std::vector<bool> attention_mask;  // rows x max_len, true on non-[PAD]
  std::vector<int> labels;           // class index, -1 when unlabeled
  std::vector<bool> labeled_mask;

  int token(std::size_t r, std::size_t t) const { return token_ids[r * max_len + t]; }

  // Rows in the given order.
  EncodedBatch select(std::span<const std::size_t> which) const {
    EncodedBatch out;
    out.rows = which.size();
    out.max_len = max_len;
    out.token_ids.reserve(which.size() * max_len);
    out.attention_mask.reserve(which.size() * max_len);
    for (std::size_t r : which) {
      if (r >= rows) throw IndexError("batch row " + std::to_string(r) + " out of range");
      out.token_ids.insert(out.token_ids.end(), token_ids.begin() + static_cast<std::ptrdiff_t>(r * max_len),
                           token_ids.begin() + static_cast<std::ptrdiff_t>((r + 1) * max_len));
      for (std::size_t t = 0; t < max_len; ++t) out.attention_mask.push_back(attention_mask[r * max_len + t]);
      out.labels.push_back(labels[r]);
      out.labeled_mask.push_back(labeled_mask[r]);
    }
    return out;
  }
};

// [CLS] + token ids, truncated to max_len and right-padded with [PAD].
inline EncodedBatch encode_reviews(std::span<const Review> reviews, const Vocab& vocab, std::size_t max_len,
                                   const ClassSet& classes) {
  if (max_len < 2) throw ContractError("max_len must be at least 2");
  EncodedBatch b;
  b.rows = reviews.size();
  b.max_len = max_len;
  b.token_ids.assign(b.rows * max_len, Vocab::kPad);
  b.attention_mask.assign(b.rows * max_len, false);
  for (std::size_t r = 0; r < reviews.size(); ++r) {
    int* row = b.token_ids.data() + r * max_len;
    row[0] = Vocab::kCls;
    b.attention_mask[r * max_len] = true;
    std::size_t pos = 1;
    for (const auto& tok : tokenize(reviews[r].text)) {
      if (pos >= max_len) break;
      row[pos] = vocab.id(tok);
      b.attention_mask[r * max_len + pos] = true;
      ++pos;
    }
    const int label = reviews[r].label ? classes.require(*reviews[r].label) : -1;
    b.labels.push_back(label);
    b.labeled_mask.push_back(label >= 0);
  }
  return b;
}

// ---------------------------------------------------------------------------
// Labeled / unlabeled / test partition.

struct SplitSpec {
  std::size_t n_labeled = 32;
  std::size_t n_unlabeled = 512;
  std::size_t n_test = 512;
  std::uint64_t seed = 0;
  bool stratified = true;
};

struct DataSplit {
  Corpus labeled;
  Corpus unlabeled;  // labels erased
  Corpus test;
};

namespace data_detail {

// Largest-remainder apportionment of total over weights, capped per bucket.
inline std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& weights,
                                          const std::vector<std::size_t>& caps) {
  const std::size_t k = weights.size();
  std::size_t wsum = 0;
  for (auto w : weights) wsum += w;
  std::vector<std::size_t> q(k, 0);
  if (wsum == 0 || total == 0) return q;
  std::vector<std::pair<double, std::size_t>> rema;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = static_cast<double>(total) * static_cast<double>(weights[c]) / static_cast<double>(wsum);
    q[c] = std::min(static_cast<std::size_t>(exact), caps[c]);
    assigned += q[c];
    rema.emplace_back(exact - static_cast<double>(static_cast<std::size_t>(exact)), c);
  }
  std::stable_sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  while (assigned < total) {
    bool progressed = false;
    for (const auto& [_, c] : rema) {
      if (assigned == total) break;
      if (q[c] < caps[c]) {
        ++q[c];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return q;
}

}  // namespace data_detail

// Seeded shuffle, then labeled and test parts drawn from labeled records
// (stratified by class proportion when requested), then the unlabeled part
// from whatever remains, with labels erased. Each part keeps shuffle order.
inline DataSplit make_split(const Corpus& corpus, const SplitSpec& spec, const ClassSet& classes) {
  const std::size_t k = classes.size();
  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(spec.seed);
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::vector<std::size_t>> by_class(k);
  std::size_t n_with_label = 0;
  for (std::size_t i : order) {
    if (!corpus[i].label) continue;
    by_class[static_cast<std::size_t>(classes.require(*corpus[i].label))].push_back(i);
    ++n_with_label;
  }

  const std::size_t need_labeled_pool = spec.n_labeled + spec.n_test;
  const std::size_t need_total = need_labeled_pool + spec.n_unlabeled;
  if (need_labeled_pool > n_with_label || need_total > corpus.size()) {
    std::ostringstream msg;
    msg << "insufficient data for split (" << spec.n_labeled << ", " << spec.n_unlabeled << ", " << spec.n_test
        << ") from " << corpus.size() << " records, " << n_with_label << " labeled:";
    const std::size_t lab_short = spec.n_labeled > n_with_label ? spec.n_labeled - n_with_label : 0;
    const std::size_t lab_got = spec.n_labeled - lab_short;
    const std::size_t test_avail = n_with_label - lab_got;
    const std::size_t test_short = spec.n_test > test_avail ? spec.n_test - test_avail : 0;
    const std::size_t used = lab_got + (spec.n_test - test_short);
    const std::size_t unl_avail = corpus.size() - used;
    const std::size_t unl_short = spec.n_unlabeled > unl_avail ? spec.n_unlabeled - unl_avail : 0;
    msg << " labeled short by " << lab_short << "; test short by " << test_short << "; unlabeled short by " << unl_short;
    throw CapacityError(msg.str());
  }

  std::vector<bool> taken(corpus.size(), false);
  std::vector<std::size_t> labeled_idx, test_idx;
  if (spec.stratified) {
    std::vector<std::size_t> weights(k), caps(k);
    for (std::size_t c = 0; c < k; ++c) weights[c] = caps[c] = by_class[c].size();
    const auto q_lab = data_detail::apportion(spec.n_labeled, weights, caps);
    for (std::size_t c = 0; c < k; ++c) caps[c] -= q_lab[c];
    const auto q_test = data_detail::apportion(spec.n_test, weights, caps);
    for (std::size_t c = 0; c < k; ++c) {
      for (std::size_t j = 0; j < q_lab[c]; ++j) labeled_idx.push_back(by_class[c][j]);
      for (std::size_t j = 0; j < q_test[c]; ++j) test_idx.push_back(by_class[c][q_lab[c] + j]);
    }
  } else {
    std::vector<std::size_t> pool;
    for (std::size_t i : order)
      if (corpus[i].label) pool.push_back(i);
    labeled_idx.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(spec.n_labeled));
    test_idx.assign(pool.begin() + static_cast<std::ptrdiff_t>(spec.n_labeled),
                    pool.begin() + static_cast<std::ptrdiff_t>(need_labeled_pool));
  }
  for (auto i : labeled_idx) taken[i] = true;
  for (auto i : test_idx) taken[i] = true;

  std::vector<std::size_t> position(corpus.size());
  for (std::size_t p = 0; p < order.size(); ++p) position[order[p]] = p;
  auto by_position = [&](std::size_t a, std::size_t b) { return position[a] < position[b]; };
  std::sort(labeled_idx.begin(), labeled_idx.end(), by_position);
  std::sort(test_idx.begin(), test_idx.end(), by_position);

  DataSplit split;
  for (auto i : labeled_idx) split.labeled.push_back(corpus[i]);
  for (auto i : test_idx) split.test.push_back(corpus[i]);
  for (std::size_t i : order) {
    if (split.unlabeled.size() == spec.n_unlabeled) break;
    if (taken[i]) continue;
    Review r = corpus[i];
    r.label.reset();
    split.unlabeled.push_back(std::move(r));
  }
  return split;
}

// ---------------------------------------------------------------------------
// Synthetic corpora.
//
// Each token of a text is, with probability marker_rate, drawn uniformly from
// the class's exclusive marker tokens, and otherwise from the class's weights
// over the shared vocabulary. Text lengths are uniform in [min_len, max_len].

struct ClassProfile {
  std::string name;
  std::vector<double> shared_weights;  // over SyntheticSpec::shared_tokens
  std::vector<std::string> markers;
};

struct SyntheticSpec {
  std::vector<std::string> shared_tokens;
  std::vector<ClassProfile> profiles;
  double marker_rate = 0.3;
  std::size_t min_len = 64;
  std::size_t max_len = 64;
};

// k classes over a vocabulary of vocab_size word types: markers_per_class
// exclusive markers per class and identical Zipf(exponent) weights over the
// remaining shared tokens.
inline SyntheticSpec make_synthetic_spec(const std::vector<std::string>& class_names, std::size_t vocab_size,
                                         std::size_t markers_per_class, double marker_rate, std::size_t min_len,
                                         std::size_t max_len, double zipf_exponent = 1.0) {
  const std::size_t k = class_names.size();
  if (k * markers_per_class >= vocab_size) throw ConfigError("synthetic vocabulary too small for the marker sets");
  SyntheticSpec spec;
  spec.marker_rate = marker_rate;
  spec.min_len = min_len;
  spec.max_len = max_len;
  const std::size_t n_shared = vocab_size - k * markers_per_class;
  std::vector<double> zipf(n_shared);
  for (std::size_t i = 0; i < n_shared; ++i) {
    spec.shared_tokens.push_back("w" + std::to_string(i));
    zipf[i] = 1.0 / std::pow(static_cast<double>(i + 1), zipf_exponent);
  }
  for (std::size_t c = 0; c < k; ++c) {
    ClassProfile p;
    p.name = class_names[c];
    p.shared_weights = zipf;
    for (std::size_t m = 0; m < markers_per_class; ++m) p.markers.push_back("m" + std::to_string(c) + "x" + std::to_string(m));
    spec.profiles.push_back(std::move(p));
  }
  return spec;
}

namespace data_detail {
inline std::size_t sample_cdf(const std::vector<double>& cdf, Rng& rng) {
  const double u = rng.uniform() * cdf.back();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<std::size_t>(it - cdf.begin());
}
}  // namespace data_detail

// Class-major order: n_per_class records of class 0, then class 1, ...
inline Corpus generate_synthetic_corpus(Rng& rng, std::size_t n_per_class, const SyntheticSpec& spec) {
  if (spec.profiles.size() < 2) throw ConfigError("synthetic corpus needs at least two class profiles");
  if (spec.marker_rate < 0.0 || spec.marker_rate > 1.0) throw ConfigError("marker rate must lie in [0, 1]");
  if (spec.min_len < 1 || spec.min_len > spec.max_len) throw ConfigError("invalid synthetic text length range");
  std::vector<std::vector<double>> cdfs;
  for (const auto& p : spec.profiles) {
    if (p.shared_weights.size() != spec.shared_tokens.size()) {
      throw ConfigError("profile '" + p.name + "' has " + std::to_string(p.shared_weights.size()) + " weights for " +
                        std::to_string(spec.shared_tokens.size()) + " shared tokens");
    }
    std::vector<double> cdf;
    double acc = 0.0;
    for (double w : p.shared_weights) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("profile '" + p.name + "' has an invalid weight");
      acc += w;
      cdf.push_back(acc);
    }
    if (spec.marker_rate < 1.0 && !(acc > 0.0)) throw ConfigError("profile '" + p.name + "' has all-zero probabilities");
    if (spec.marker_rate > 0.0 && p.markers.empty()) throw ConfigError("profile '" + p.name + "' has no marker tokens");
    cdfs.push_back(std::move(cdf));
  }
  Corpus corpus;
  std::size_t serial = 0;
  for (std::size_t c = 0; c < spec.profiles.size(); ++c) {
    const auto& p = spec.profiles[c];
    for (std::size_t n = 0; n < n_per_class; ++n) {
      const std::size_t len = spec.min_len + static_cast<std::size_t>(rng.uniform_int(spec.max_len - spec.min_len + 1));
      std::string text;
      for (std::size_t t = 0; t < len; ++t) {
        if (t) text += ' ';
        if (rng.uniform() < spec.marker_rate)
          text += p.markers[static_cast<std::size_t>(rng.uniform_int(p.markers.size()))];
        else
          text += spec.shared_tokens[data_detail::sample_cdf(cdfs[c], rng)];
      }
      std::ostringstream id;
      id << "syn-" << std::setw(6) << std::setfill('0') << serial++;
      corpus.push_back(Review{id.str(), std::move(text), p.name});
    }
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// Embedding files: "dim=<d>" then one record per line,
//   id TAB label-or-"-" TAB v1 v2 ... vd
// with values printed to 17 significant digits.

struct EmbeddingRecord {
  std::string id;
  std::optional<std::string> label;
  std::vector<double> vector;
};

inline void write_embeddings(std::ostream& out, const std::vector<EmbeddingRecord>& records, std::size_t dim) {
  out << "dim=" << dim << '\n';
  char buf[40];
  for (const auto& r : records) {
    if (r.vector.size() != dim) throw FormatError("record '" + r.id + "' has dimension " + std::to_string(r.vector.size()));
    out << r.id << '\t' << (r.label ? *r.label : std::string("-")) << '\t';
    for (std::size_t i = 0; i < dim; ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", r.vector[i]);
      out << (i ? " " : "") << buf;
    }
    out << '\n';
  }
}

inline void save_embeddings(const std::string& path, const std::vector<EmbeddingRecord>& records, std::size_t dim) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write embedding file '" + path + "'");
  write_embeddings(out, records, dim);
}

inline std::vector<EmbeddingRecord> read_embeddings(std::istream& in, std::size_t* dim_out = nullptr) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("dim=", 0) != 0) throw FormatError("embedding file must start with 'dim=<d>'");
  std::size_t dim = 0;
  try {
    dim = static_cast<std::size_t>(std::stoull(line.substr(4)));
  } catch (const std::exception&) {
    throw FormatError("bad embedding header '" + line + "'");
  }
  if (dim_out) *dim_out = dim;
  std::vector<EmbeddingRecord> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto t1 = line.find('\t');
    const auto t2 = t1 == std::string::npos ? t1 : line.find('\t', t1 + 1);
    if (t2 == std::string::npos) throw ParseError("expected id<TAB>label<TAB>values", line_no);
    EmbeddingRecord r;
    r.id = line.substr(0, t1);
    const std::string label = line.substr(t1 + 1, t2 - t1 - 1);
    if (label != "-") r.label = label;
    std::istringstream vals(line.substr(t2 + 1));
    std::string tok;
    while (vals >> tok) {
      char* end = nullptr;
      const double v = std::strtod(tok.c_str(), &end);
      if (end == tok.c_str() || *end != '\0') throw ParseError("bad number '" + tok + "' in record '" + r.id + "'", line_no);
      r.vector.push_back(v);
    }
    if (r.vector.size() != dim) {
      throw FormatError("record '" + r.id + "' has dimension " + std::to_string(r.vector.size()) + ", file declares " +
                        std::to_string(dim));
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<EmbeddingRecord> load_embeddings(const std::string& path, std::size_t* dim_out = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embedding file '" + path + "'");
  return read_embeddings(in, dim_out);
}

}  // namespace ganlm
