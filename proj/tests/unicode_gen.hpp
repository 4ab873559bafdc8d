#pragma once

#include <unicode/unistr.h>

#include <string>
#include <string_view>
#include <vector>

#include "ganlm/rng.hpp"

namespace unigen {

using ganlm::Rng;

inline std::string utf8(std::u32string_view s) {
  std::string out;
  for (char32_t c : s) {
    icu::UnicodeString u(static_cast<UChar32>(c));
    u.toUTF8String(out);
  }
  return out;
}

// Strings assembled from pieces that exercise every stage, plus arbitrary
// scalar values.
inline std::string random_text(Rng& r) {
  static const std::vector<std::u32string> pieces{
      U"a", U"Z", U"7", U" ", U"  ", U"\t", U"\n", U" ", U"　", U" ", U"​", U" ",
      U"http://", U"HTTPS://", U"ftp://", U"www.", U"wWw.", U".com/", U"?q=1", U"x.yz",
      U"‘", U"’", U"‚", U"‛", U"“", U"”", U"„", U"‟", U"'", U"\"",
      U"\U0001F600", U"\U0001F64F", U"\U0001F300", U"\U0001F5FF", U"\U0001F680", U"\U0001F6FF", U"\U0001F900",
      U"\U0001F9FF", U"\U0001F1E6", U"\U0001F1FF", U"\U0001F3FB", U"️", U"︎", U"⃣", U"‍",
      U"\U000E0067", U"́", U"̈",
      U"ক", U"া", U"ে", U"ো", U"ড়", U"ড়", U"৳",
      U"ﬁ", U"Ａ", U"．", U"①", U"ᄀ", U"ᅡ", U"ᆨ", U"가", U"Å", U"Å",
      U"é", U"Å", U"<", U">", U"<URL>", U"<EMO>", U"�", U"\U0010FFFD"};
  std::u32string s;
  const std::size_t n = r.uniform_int(24);
  for (std::size_t i = 0; i < n; ++i) {
    if (r.bernoulli(0.15)) {
      char32_t c;
      do {
        c = static_cast<char32_t>(r.uniform_int(0x110000));
      } while (c >= 0xD800 && c <= 0xDFFF);
      s.push_back(c);
    } else {
      s += pieces[r.uniform_int(pieces.size())];
    }
  }
  return utf8(s);
}

}  // namespace unigen
