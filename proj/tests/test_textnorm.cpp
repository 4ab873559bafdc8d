#include <gtest/gtest.h>

#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <string>
#include <vector>

#include "ganlm/rng.hpp"
#include "ganlm/textnorm.hpp"
#include "unicode_gen.hpp"

using namespace ganlm;
using unigen::random_text;
using unigen::utf8;

namespace {

TEST(Normalize, FixedVectors) {
  EXPECT_EQ(normalize_text("good   food "), "good food");
  EXPECT_EQ(normalize_text("see https://x.yz/a now"), "see <URL> now");
  EXPECT_EQ(normalize_text(utf8(U"“ok”")), "\"ok\"");
  EXPECT_EQ(normalize_text(utf8(U"it’s")), "it's");
  EXPECT_EQ(normalize_text("WWW.Example.com/x?y=1, then"), "<URL> then");
  EXPECT_EQ(normalize_text("ftp://host/file"), "<URL>");
  EXPECT_EQ(normalize_text("nothttp://x"), "nothttp://x");
  EXPECT_EQ(normalize_text(" \t\n a    b \r\n"), "a b");
  EXPECT_EQ(normalize_text(""), "");
  EXPECT_EQ(normalize_text("   "), "");
}

TEST(Normalize, EmojiReplacement) {
  EXPECT_EQ(normalize_text(utf8(U"great \U0001F600 food")), "great <EMO> food");
  // skin tone and ZWJ sequence collapse into one token
  EXPECT_EQ(normalize_text(utf8(U"\U0001F44D\U0001F3FD ok")), "<EMO> ok");
  EXPECT_EQ(normalize_text(utf8(U"\U0001F468‍\U0001F373!")), "<EMO>!");
  // a flag is a pair of regional indicators
  EXPECT_EQ(normalize_text(utf8(U"\U0001F1E7\U0001F1E9")), "<EMO>");
  EXPECT_EQ(normalize_text(utf8(U"\U0001F680\U0001F680")), "<EMO><EMO>");
}

TEST(Normalize, ConfigurableTokensAndSwitches) {
  NormalizerConfig cfg;
  cfg.url_token = "[link]";
  cfg.emoji_token = "[e]";
  EXPECT_EQ(normalize_text(utf8(U"http://a.b \U0001F600"), cfg), "[link] [e]");
  cfg.collapse_whitespace = false;
  EXPECT_EQ(normalize_text(" a  b ", cfg), "a  b");
  cfg.normalize_quotes = false;
  EXPECT_EQ(normalize_text(utf8(U"“x”"), cfg), utf8(U"“x”"));
  cfg.unicode_nfkc = false;
  EXPECT_EQ(normalize_text(utf8(U"ａ"), cfg), utf8(U"ａ"));
  EXPECT_EQ(normalize_text(utf8(U"ａ")), "a");
  NormalizerConfig bad;
  bad.url_token = "a b";
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(NormalizeProperty, IdempotentOnRandomUnicode) {
  Rng r(2718);
  for (int i = 0; i < 10000; ++i) {
    const std::string s = random_text(r);
    const std::string once = normalize_text(s);
    ASSERT_EQ(normalize_text(once), once) << "case " << i;
  }
}

TEST(NormalizeProperty, NoConsecutiveWhitespace) {
  Rng r(3141);
  for (int i = 0; i < 5000; ++i) {
    const auto out = icu::UnicodeString::fromUTF8(normalize_text(random_text(r)));
    bool prev = false;
    for (int32_t k = 0; k < out.length();) {
      const UChar32 c = out.char32At(k);
      const bool ws = u_isUWhiteSpace(c);
      ASSERT_FALSE(prev && ws) << "case " << i;
      prev = ws;
      k += U16_LENGTH(c);
    }
  }
}

// Bengali letters survive untouched, except the three nukta letters that
// Unicode excludes from composition: NFKC rewrites them to base + nukta.
TEST(NormalizeProperty, BengaliLettersPassThrough) {
  for (char32_t c = 0x0980; c <= 0x09FF; ++c) {
    if (!u_isdefined(static_cast<UChar32>(c)) || c == 0x09DC || c == 0x09DD || c == 0x09DF) continue;
    const std::string s = utf8(std::u32string(1, c));
    EXPECT_EQ(normalize_text(s), s) << std::hex << static_cast<unsigned>(c);
  }
  EXPECT_EQ(normalize_text(utf8(U"ড়")), utf8(U"ড়"));
  EXPECT_EQ(normalize_text(utf8(U"ঢ়")), utf8(U"ঢ়"));
  EXPECT_EQ(normalize_text(utf8(U"য়")), utf8(U"য়"));
  const std::string word = utf8(U"খাবার ভালো");
  EXPECT_EQ(normalize_text(word), word);
}

}  // namespace
