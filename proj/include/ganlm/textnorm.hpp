#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include "ganlm/errors.hpp"

namespace ganlm {

struct NormalizerConfig {
  std::string url_token = "<URL>";
  std::string emoji_token = "<EMO>";
  bool unicode_nfkc = true;
  bool collapse_whitespace = true;
  bool normalize_quotes = true;

  void validate() const {
    for (const auto* tok : {&url_token, &emoji_token}) {
      if (tok->empty()) throw ConfigError("replacement token must not be empty");
      for (unsigned char c : *tok)
        if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v')
          throw ConfigError("replacement token '" + *tok + "' contains whitespace");
    }
  }
};

namespace textnorm_detail {

using CodePoints = std::vector<UChar32>;

inline CodePoints to_code_points(const icu::UnicodeString& s) {
  CodePoints out;
  out.reserve(static_cast<std::size_t>(s.length()));
  for (int32_t i = 0; i < s.length();) {
    const UChar32 c = s.char32At(i);
    out.push_back(c);
    i += U16_LENGTH(c);
  }
  return out;
}

inline CodePoints to_code_points(std::string_view utf8) {
  return to_code_points(icu::UnicodeString::fromUTF8(icu::StringPiece(utf8.data(), static_cast<int32_t>(utf8.size()))));
}

inline std::string to_utf8(const CodePoints& cps) {
  icu::UnicodeString s;
  for (UChar32 c : cps) s.append(c);
  std::string out;
  s.toUTF8String(out);
  return out;
}

inline void append_ascii(CodePoints& out, std::string_view token) {
  const auto cps = to_code_points(token);
  out.insert(out.end(), cps.begin(), cps.end());
}

inline bool is_space(UChar32 c) { return u_isUWhiteSpace(c) != 0; }

// Emoji blocks: emoticons, misc symbols and pictographs, transport and map,
// supplemental symbols and pictographs, regional indicators (flags).
inline bool is_emoji(UChar32 c) {
  return (c >= 0x1F600 && c <= 0x1F64F) || (c >= 0x1F300 && c <= 0x1F5FF) || (c >= 0x1F680 && c <= 0x1F6FF) ||
         (c >= 0x1F900 && c <= 0x1F9FF) || (c >= 0x1F1E6 && c <= 0x1F1FF);
}

inline bool is_regional_indicator(UChar32 c) { return c >= 0x1F1E6 && c <= 0x1F1FF; }

// Code points that attach to a preceding emoji: variation selectors, keycap,
// tag characters and any combining mark.
inline bool is_emoji_modifier(UChar32 c) {
  if (c == 0xFE0E || c == 0xFE0F || c == 0x20E3) return true;
  if (c >= 0xE0020 && c <= 0xE007F) return true;
  const int8_t cat = u_charType(c);
  return cat == U_NON_SPACING_MARK || cat == U_ENCLOSING_MARK || cat == U_COMBINING_SPACING_MARK ||
         u_getCombiningClass(c) != 0;
}

inline char ascii_lower(UChar32 c) {
  if (c >= 'A' && c <= 'Z') return static_cast<char>(c - 'A' + 'a');
  return c < 0x80 ? static_cast<char>(c) : '\0';
}

inline bool starts_with_ci(const CodePoints& s, std::size_t at, std::string_view prefix) {
  if (at + prefix.size() > s.size()) return false;
  for (std::size_t i = 0; i < prefix.size(); ++i)
    if (ascii_lower(s[at + i]) != prefix[i]) return false;
  return true;
}

inline bool url_starts_at(const CodePoints& s, std::size_t i) {
  if (i > 0 && u_isalnum(s[i - 1])) return false;
  for (std::string_view p : {"http://", "https://", "ftp://", "www."})
    if (starts_with_ci(s, i, p)) return true;
  return false;
}

inline CodePoints replace_urls(const CodePoints& in, std::string_view token) {
  CodePoints out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    if (url_starts_at(in, i)) {
      append_ascii(out, token);
      while (i < in.size() && !is_space(in[i])) ++i;
      continue;
    }
    out.push_back(in[i++]);
  }
  return out;
}

inline CodePoints replace_emoji(const CodePoints& in, std::string_view token) {
  CodePoints out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    if (!is_emoji(in[i])) {
      out.push_back(in[i++]);
      continue;
    }
    const bool flag = is_regional_indicator(in[i]);
    ++i;
    if (flag && i < in.size() && is_regional_indicator(in[i])) ++i;
    for (;;) {
      if (i < in.size() && is_emoji_modifier(in[i])) {
        ++i;
      } else if (i < in.size() && in[i] >= 0x1F3FB && in[i] <= 0x1F3FF) {
        ++i;
      } else if (i + 1 < in.size() && in[i] == 0x200D && is_emoji(in[i + 1])) {
        i += 2;
      } else if (i < in.size() && in[i] == 0x200D) {
        ++i;
      } else {
        break;
      }
    }
    append_ascii(out, token);
  }
  return out;
}

inline UChar32 straight_quote(UChar32 c) {
  switch (c) {
    case 0x2018:
    case 0x2019:
    case 0x201A:
    case 0x201B:
      return '\'';
    case 0x201C:
    case 0x201D:
    case 0x201E:
    case 0x201F:
      return '"';
    default:
      return c;
  }
}

inline CodePoints collapse_and_trim(const CodePoints& in, bool collapse) {
  CodePoints out;
  out.reserve(in.size());
  for (std::size_t i = 0; i < in.size();) {
    if (collapse && is_space(in[i])) {
      while (i < in.size() && is_space(in[i])) ++i;
      out.push_back(' ');
      continue;
    }
    out.push_back(in[i++]);
  }
  std::size_t b = 0, e = out.size();
  while (b < e && is_space(out[b])) ++b;
  while (e > b && is_space(out[e - 1])) --e;
  return CodePoints(out.begin() + static_cast<std::ptrdiff_t>(b), out.begin() + static_cast<std::ptrdiff_t>(e));
}

inline icu::UnicodeString nfkc(const icu::UnicodeString& s) {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* norm = icu::Normalizer2::getNFKCInstance(status);
  if (U_FAILURE(status)) throw Error(std::string("ICU NFKC unavailable: ") + u_errorName(status));
  icu::UnicodeString out = norm->normalize(s, status);
  if (U_FAILURE(status)) throw Error(std::string("ICU normalization failed: ") + u_errorName(status));
  return out;
}

}  // namespace textnorm_detail

// Applies in order: NFKC, URL replacement, emoji replacement, curly-quote
// straightening, whitespace-run collapse, trim.
//
// URLs are runs starting at "http://", "https://", "ftp://" or "www."
// (case-insensitive, not preceded by a letter or digit) and ending before the
// next whitespace. An emoji is one code point from the emoji blocks plus any
// attached modifiers, ZWJ continuations and a paired regional indicator.
inline std::string normalize_text(std::string_view raw, const NormalizerConfig& cfg = {}) {
  namespace d = textnorm_detail;
  icu::UnicodeString u = icu::UnicodeString::fromUTF8(icu::StringPiece(raw.data(), static_cast<int32_t>(raw.size())));
  if (cfg.unicode_nfkc) u = d::nfkc(u);
  d::CodePoints cps = d::to_code_points(u);
  cps = d::replace_urls(cps, cfg.url_token);
  cps = d::replace_emoji(cps, cfg.emoji_token);
  if (cfg.normalize_quotes)
    for (auto& c : cps) c = d::straight_quote(c);
  cps = d::collapse_and_trim(cps, cfg.collapse_whitespace);
  return d::to_utf8(cps);
}

}  // namespace ganlm
