#include <gtest/gtest.h>

#include <map>
#include <set>
#include <sstream>

#include "ganlm/data.hpp"

using namespace ganlm;

namespace {

const ClassSet kClasses({"fake", "authentic"});

Corpus parse(const std::string& text) {
  std::istringstream in(text);
  return read_corpus(in, kClasses);
}

Review rv(std::string id, std::string text, std::optional<std::string> label = std::nullopt) {
  return {std::move(id), std::move(text), std::move(label)};
}

// -- corpus files -----------------------------------------------------------------

TEST(Corpus, ParsesRecordsInOrder) {
  const auto c = parse(
      "{\"id\": \"r1\", \"text\": \"good   food\", \"label\": \"authentic\"}\n"
      "{\"id\": \"r2\", \"text\": \"buy now www.x.com\"}\n");
  ASSERT_EQ(c.size(), 2u);
  EXPECT_EQ(c[0].id, "r1");
  EXPECT_EQ(c[0].text, "good food");
  EXPECT_EQ(c[0].label, "authentic");
  EXPECT_EQ(c[1].text, "buy now <URL>");
  EXPECT_FALSE(c[1].label);
}

TEST(Corpus, EmptyAndBlankLines) {
  EXPECT_TRUE(parse("").empty());
  EXPECT_EQ(parse("\n{\"id\":\"a\",\"text\":\"x\",\"label\":null}\n\n").size(), 1u);
}

TEST(Corpus, UnknownLabelNamesTheLine) {
  try {
    parse("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\"y\",\"label\":\"bogus\"}\n");
    FAIL() << "expected LabelError";
  } catch (const LabelError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
}

TEST(Corpus, MalformedRecordsCarryLineNumbers) {
  try {
    parse("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"b\",\"text\":\n");
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse("{\"id\":\"a\",\"text\":\"x\",\"stars\":5}\n"), ParseError);
  EXPECT_THROW(parse("{\"text\":\"x\"}\n"), ParseError);
  EXPECT_THROW(parse("[1,2]\n"), ParseError);
  EXPECT_THROW(parse("{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n"), UniquenessError);
}

TEST(Corpus, WriteReadRoundTrip) {
  const Corpus c{rv("1", "a \"quoted\" text", "fake"), rv("2", "unlabeled \\ text")};
  std::ostringstream out;
  write_corpus(out, c);
  const auto back = parse(out.str());
  ASSERT_EQ(back.size(), 2u);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_EQ(back[i].id, c[i].id);
    EXPECT_EQ(back[i].text, c[i].text);
    EXPECT_EQ(back[i].label, c[i].label);
  }
}

// -- tokenizer and vocabulary --------------------------------------------------------

TEST(Tokenize, WhitespaceAndPunctuation) {
  EXPECT_EQ(tokenize("Hello, world!"), (std::vector<std::string>{"Hello", ",", "world", "!"}));
  EXPECT_EQ(tokenize("  a\tb  "), (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(tokenize("<URL>"), (std::vector<std::string>{"<URL>"}));
  EXPECT_EQ(tokenize("\"x\""), (std::vector<std::string>{"\"", "x", "\""}));
  EXPECT_TRUE(tokenize("").empty());
}

TEST(Vocab, FrequencyThenLexicographic) {
  const Corpus c{rv("1", "a b"), rv("2", "a c")};
  const auto v = build_vocab(c, 10);
  ASSERT_TRUE(v.contains("a") && v.contains("b") && v.contains("c"));
  EXPECT_LT(v.id("a"), v.id("b"));
  EXPECT_LT(v.id("b"), v.id("c"));
  EXPECT_EQ(v.id("a"), Vocab::kReserved);
  const auto v2 = build_vocab(c, 10, 2);
  EXPECT_TRUE(v2.contains("a"));
  EXPECT_FALSE(v2.contains("b") || v2.contains("c"));
  EXPECT_EQ(v2.size(), static_cast<std::size_t>(Vocab::kReserved) + 1);
}

TEST(Vocab, MaxVocabCountsReservedTokens) {
  const Corpus c{rv("1", "a a a b b c d")};
  const auto v = build_vocab(c, 6);
  EXPECT_EQ(v.size(), 6u);
  EXPECT_TRUE(v.contains("a") && v.contains("b"));
  EXPECT_FALSE(v.contains("c"));
}

TEST(Vocab, ReservedIdsAndUnknownFallback) {
  Vocab v;
  EXPECT_EQ(v.id("[PAD]"), Vocab::kPad);
  EXPECT_EQ(v.id("[UNK]"), Vocab::kUnk);
  EXPECT_EQ(v.id("[CLS]"), Vocab::kCls);
  EXPECT_EQ(v.id("[MASK]"), Vocab::kMask);
  EXPECT_EQ(v.id("never-seen"), Vocab::kUnk);
  EXPECT_THROW(v.token(99), IndexError);
}

TEST(Vocab, FileRoundTripAndValidation) {
  const auto v = build_vocab({rv("1", "x y y z")}, 100);
  std::ostringstream out;
  v.save(out);
  std::istringstream in(out.str());
  const auto back = Vocab::load(in);
  EXPECT_EQ(back.tokens(), v.tokens());
  std::istringstream bad("[PAD]\n[CLS]\n[UNK]\n[MASK]\n");
  EXPECT_THROW(Vocab::load(bad), ParseError);
  std::istringstream dup("[PAD]\n[UNK]\n[CLS]\n[MASK]\nq\nq\n");
  EXPECT_THROW(Vocab::load(dup), DataError);
}

// -- encoding --------------------------------------------------------------------

TEST(Encode, ClsPadAndMask) {
  Vocab v;
  v.add("a");
  v.add("b");
  const Corpus c{rv("1", "a b", "fake")};
  const auto b = encode_reviews(c, v, 4, kClasses);
  EXPECT_EQ(b.token_ids, (std::vector<int>{Vocab::kCls, v.id("a"), v.id("b"), Vocab::kPad}));
  EXPECT_EQ(b.attention_mask, (std::vector<bool>{true, true, true, false}));
  EXPECT_EQ(b.labels, (std::vector<int>{0}));
  EXPECT_EQ(b.labeled_mask, (std::vector<bool>{true}));
}

TEST(Encode, UnknownAndTruncation) {
  Vocab v;
  v.add("a");
  const Corpus c{rv("1", "zzz"), rv("2", "a a a a a a a a a")};
  const auto b = encode_reviews(c, v, 5, kClasses);
  EXPECT_EQ(b.token(0, 1), Vocab::kUnk);
  for (std::size_t t = 0; t < 5; ++t) EXPECT_TRUE(b.attention_mask[5 + t]);
  EXPECT_EQ(b.token_ids.size(), 10u);
  EXPECT_EQ(b.labels[0], -1);
}

TEST(Encode, ShapeAndMaskCountProperty) {
  Rng r(4);
  Vocab v;
  for (int i = 0; i < 10; ++i) v.add("t" + std::to_string(i));
  for (int trial = 0; trial < 200; ++trial) {
    Corpus c;
    std::vector<std::size_t> lens;
    const std::size_t n = 1 + r.uniform_int(6);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t len = 1 + r.uniform_int(20);
      std::string text;
      for (std::size_t t = 0; t < len; ++t) text += (t ? " t" : "t") + std::to_string(r.uniform_int(12));
      c.push_back(rv(std::to_string(i), text));
      lens.push_back(len);
    }
    const std::size_t max_len = 2 + r.uniform_int(15);
    const auto b = encode_reviews(c, v, max_len, kClasses);
    ASSERT_EQ(b.rows, n);
    ASSERT_EQ(b.token_ids.size(), n * max_len);
    for (std::size_t i = 0; i < n; ++i) {
      std::size_t on = 0;
      for (std::size_t t = 0; t < max_len; ++t) on += b.attention_mask[i * max_len + t];
      ASSERT_EQ(on, std::min(lens[i] + 1, max_len));
    }
  }
}

// -- splits ------------------------------------------------------------------------

Corpus labeled_corpus(std::size_t n_fake, std::size_t n_auth, std::size_t n_unl = 0) {
  Corpus c;
  for (std::size_t i = 0; i < n_fake; ++i) c.push_back(rv("f" + std::to_string(i), "x", "fake"));
  for (std::size_t i = 0; i < n_auth; ++i) c.push_back(rv("a" + std::to_string(i), "x", "authentic"));
  for (std::size_t i = 0; i < n_unl; ++i) c.push_back(rv("u" + std::to_string(i), "x"));
  return c;
}

std::set<std::string> ids(const Corpus& c) {
  std::set<std::string> s;
  for (const auto& r : c) s.insert(r.id);
  return s;
}

TEST(Split, GridSizesDisjointAndDeterministic) {
  // 871 : 5015 class imbalance
  const auto corpus = labeled_corpus(871, 5015);
  const std::vector<std::array<std::size_t, 3>> rows{{32, 512, 512}, {1024, 512, 128}};
  for (const auto& [nl, nu, nt] : rows) {
    const SplitSpec spec{nl, nu, nt, 7, true};
    const auto s = make_split(corpus, spec, kClasses);
    EXPECT_EQ(s.labeled.size(), nl);
    EXPECT_EQ(s.unlabeled.size(), nu);
    EXPECT_EQ(s.test.size(), nt);
    const auto a = ids(s.labeled), b = ids(s.unlabeled), c = ids(s.test);
    EXPECT_EQ(a.size() + b.size() + c.size(), nl + nu + nt);
    std::set<std::string> all = a;
    all.insert(b.begin(), b.end());
    all.insert(c.begin(), c.end());
    EXPECT_EQ(all.size(), nl + nu + nt);
    for (const auto& r : s.unlabeled) EXPECT_FALSE(r.label);
    const auto again = make_split(corpus, spec, kClasses);
    EXPECT_EQ(ids(again.labeled), a);
    EXPECT_EQ(ids(again.unlabeled), b);
    EXPECT_EQ(ids(again.test), c);
  }
}

TEST(Split, StratificationWithinOnePerClass) {
  const auto corpus = labeled_corpus(871, 5015, 100);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto s = make_split(corpus, {32, 512, 512, seed, true}, kClasses);
    for (const auto* part : {&s.labeled, &s.test}) {
      std::size_t fakes = 0;
      for (const auto& r : *part) fakes += *r.label == "fake";
      const double expected = static_cast<double>(part->size()) * 871.0 / (871.0 + 5015.0);
      EXPECT_LE(std::abs(static_cast<double>(fakes) - expected), 1.0) << "seed " << seed;
    }
  }
}

TEST(Split, CapacityShortfallIsReported) {
  const auto corpus = labeled_corpus(10, 10, 5);
  try {
    make_split(corpus, {8, 20, 8, 1, true}, kClasses);
    FAIL() << "expected CapacityError";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("unlabeled short by 11"), std::string::npos) << e.what();
  }
  EXPECT_THROW(make_split(corpus, {16, 0, 8, 1, true}, kClasses), CapacityError);
}

// -- synthetic corpus -----------------------------------------------------------------

// Count-based oracle: label by which class's markers occur more often.
double marker_oracle_accuracy(const Corpus& c, const SyntheticSpec& spec) {
  std::map<std::string, int> owner;
  for (std::size_t k = 0; k < spec.profiles.size(); ++k)
    for (const auto& m : spec.profiles[k].markers) owner[m] = static_cast<int>(k);
  std::size_t right = 0;
  for (const auto& r : c) {
    std::vector<int> counts(spec.profiles.size());
    for (const auto& t : tokenize(r.text))
      if (auto it = owner.find(t); it != owner.end()) ++counts[static_cast<std::size_t>(it->second)];
    const auto best = std::max_element(counts.begin(), counts.end()) - counts.begin();
    right += spec.profiles[static_cast<std::size_t>(best)].name == *r.label;
  }
  return static_cast<double>(right) / static_cast<double>(c.size());
}

// Unigram-count classifier fitted on one half and applied to the other.
double unigram_oracle_accuracy(const Corpus& c) {
  std::map<std::string, std::array<double, 2>> counts;
  const std::size_t half = c.size() / 2;
  for (std::size_t i = 0; i < half; ++i)
    for (const auto& t : tokenize(c[i].text)) counts[t][*c[i].label == "fake" ? 0 : 1] += 1.0;
  std::size_t right = 0;
  for (std::size_t i = half; i < c.size(); ++i) {
    double score = 0.0;
    for (const auto& t : tokenize(c[i].text)) {
      const auto& n = counts[t];
      score += std::log((n[0] + 1.0) / (n[1] + 1.0));
    }
    right += (score > 0.0 ? "fake" : "authentic") == *c[i].label;
  }
  return static_cast<double>(right) / static_cast<double>(c.size() - half);
}

TEST(Synthetic, CountsLabelsAndIds) {
  Rng r(1);
  const auto spec = make_synthetic_spec(kClasses.names(), 500, 20, 0.3, 10, 20);
  const auto c = generate_synthetic_corpus(r, 100, spec);
  ASSERT_EQ(c.size(), 200u);
  std::size_t fakes = 0;
  for (const auto& x : c) {
    fakes += *x.label == "fake";
    const auto n = tokenize(x.text).size();
    EXPECT_GE(n, 10u);
    EXPECT_LE(n, 20u);
  }
  EXPECT_EQ(fakes, 100u);
  EXPECT_EQ(ids(c).size(), 200u);
}

TEST(Synthetic, FullMarkerRateIsPerfectlySeparable) {
  Rng r(2);
  const auto spec = make_synthetic_spec(kClasses.names(), 500, 20, 1.0, 64, 64);
  const auto c = generate_synthetic_corpus(r, 100, spec);
  EXPECT_EQ(marker_oracle_accuracy(c, spec), 1.0);
}

TEST(Synthetic, ZeroMarkerRateIsIndistinguishable) {
  Rng r(3);
  const auto spec = make_synthetic_spec(kClasses.names(), 500, 20, 0.0, 64, 64);
  auto c = generate_synthetic_corpus(r, 500, spec);
  r.shuffle(std::span<Review>(c));
  const double acc = unigram_oracle_accuracy(c);
  // 500 held-out texts: chance +- 3 standard errors
  EXPECT_NEAR(acc, 0.5, 0.07);
}

TEST(Synthetic, MarkerRateMatchesSpec) {
  Rng r(4);
  const auto spec = make_synthetic_spec(kClasses.names(), 500, 20, 0.3, 64, 64);
  const auto c = generate_synthetic_corpus(r, 200, spec);
  std::set<std::string> markers;
  for (const auto& p : spec.profiles) markers.insert(p.markers.begin(), p.markers.end());
  std::size_t hit = 0, total = 0;
  for (const auto& x : c)
    for (const auto& t : tokenize(x.text)) {
      hit += markers.count(t);
      ++total;
    }
  EXPECT_NEAR(static_cast<double>(hit) / static_cast<double>(total), 0.3, 0.01);
}

TEST(Synthetic, DegenerateSpecsRejected) {
  EXPECT_THROW(make_synthetic_spec(kClasses.names(), 40, 20, 0.3, 5, 5), ConfigError);
  auto spec = make_synthetic_spec(kClasses.names(), 100, 5, 0.3, 5, 5);
  spec.marker_rate = 1.5;
  Rng r(1);
  EXPECT_THROW(generate_synthetic_corpus(r, 3, spec), ConfigError);
}

// -- embedding files -------------------------------------------------------------------

TEST(Embeddings, RoundTripIsExact) {
  Rng r(5);
  std::vector<EmbeddingRecord> recs;
  for (int i = 0; i < 5; ++i) {
    EmbeddingRecord e{"id" + std::to_string(i), i % 2 ? std::optional<std::string>("fake") : std::nullopt, {}};
    for (int j = 0; j < 8; ++j) e.vector.push_back(r.normal() * 1e3);
    recs.push_back(e);
  }
  std::stringstream io;
  write_embeddings(io, recs, 8);
  std::size_t dim = 0;
  const auto back = read_embeddings(io, &dim);
  EXPECT_EQ(dim, 8u);
  ASSERT_EQ(back.size(), 5u);
  for (int i = 0; i < 5; ++i) {
    EXPECT_EQ(back[i].id, recs[i].id);
    EXPECT_EQ(back[i].label, recs[i].label);
    EXPECT_EQ(back[i].vector, recs[i].vector);
  }
}

TEST(Embeddings, MixedDimensionsAndEmptySet) {
  std::istringstream mixed("dim=8\na\t-\t1 2 3 4 5 6 7 8\nb\t-\t1 2 3 4 5 6 7 8 9 10 11 12 13 14 15 16\n");
  EXPECT_THROW(read_embeddings(mixed), FormatError);
  std::vector<EmbeddingRecord> ragged{{"a", std::nullopt, std::vector<double>(8)},
                                      {"b", std::nullopt, std::vector<double>(16)}};
  std::ostringstream sink;
  EXPECT_THROW(write_embeddings(sink, ragged, 8), FormatError);
  std::ostringstream out;
  write_embeddings(out, {}, 4);
  EXPECT_EQ(out.str(), "dim=4\n");
  std::istringstream in(out.str());
  EXPECT_TRUE(read_embeddings(in).empty());
}

}  // namespace
