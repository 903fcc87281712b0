#include "hanrag/text.hpp"

#include <cstdint>
#include <sstream>

namespace hanrag {
namespace {

constexpr char32_t k_replacement = 0xFFFD;

// Decodes one code point starting at pos and advances pos. Malformed
// sequences yield U+FFFD and consume a single byte.
char32_t next_code_point(std::string_view s, std::size_t& pos) {
  const auto lead = static_cast<unsigned char>(s[pos]);
  if (lead < 0x80) {
    ++pos;
    return lead;
  }
  std::size_t len = 0;
  char32_t cp = 0;
  if ((lead & 0xE0) == 0xC0) {
    len = 2;
    cp = lead & 0x1F;
  } else if ((lead & 0xF0) == 0xE0) {
    len = 3;
    cp = lead & 0x0F;
  } else if ((lead & 0xF8) == 0xF0) {
    len = 4;
    cp = lead & 0x07;
  } else {
    ++pos;
    return k_replacement;
  }
  if (pos + len > s.size()) {
    ++pos;
    return k_replacement;
  }
  for (std::size_t i = 1; i < len; ++i) {
    const auto c = static_cast<unsigned char>(s[pos + i]);
    if ((c & 0xC0) != 0x80) {
      ++pos;
      return k_replacement;
    }
    cp = (cp << 6) | (c & 0x3F);
  }
  pos += len;
  return cp;
}

void append_utf8(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

char32_t fold_case(char32_t cp) {
  if (cp >= 'A' && cp <= 'Z') return cp + 32;
  if (cp < 0xC0) return cp;
  if (cp <= 0xDE) return cp == 0xD7 ? cp : cp + 32;
  if (cp >= 0x100 && cp <= 0x137) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x139 && cp <= 0x148) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp >= 0x14A && cp <= 0x177) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp == 0x178) return 0xFF;
  if (cp >= 0x179 && cp <= 0x17E) return (cp % 2 == 1) ? cp + 1 : cp;
  if (cp == 0x386) return 0x3AC;
  if (cp >= 0x388 && cp <= 0x38A) return cp + 37;
  if (cp == 0x38C) return 0x3CC;
  if (cp == 0x38E || cp == 0x38F) return cp + 63;
  if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 32;
  if (cp >= 0x400 && cp <= 0x40F) return cp + 80;
  if (cp >= 0x410 && cp <= 0x42F) return cp + 32;
  if (cp >= 0x1E00 && cp <= 0x1E95) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0x1EA0 && cp <= 0x1EFF) return (cp % 2 == 0) ? cp + 1 : cp;
  if (cp >= 0xFF21 && cp <= 0xFF3A) return cp + 32;
  return cp;
}

bool in_range(char32_t cp, char32_t lo, char32_t hi) { return cp >= lo && cp <= hi; }

// Letters, digits and combining marks count as word characters. Outside
// ASCII this is a block-level approximation: known punctuation, symbol and
// space blocks are separators, everything else is treated as a letter.
bool is_word_code_point(char32_t cp) {
  if (cp < 0x80) {
    return (cp >= '0' && cp <= '9') || (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z');
  }
  if (cp < 0xC0) return cp == 0xAA || cp == 0xB5 || cp == 0xBA;
  if (cp == 0xD7 || cp == 0xF7) return false;
  if (cp == k_replacement || cp == 0xFEFF) return false;
  if (in_range(cp, 0x2000, 0x206F)) return false;  // general punctuation, spaces
  if (in_range(cp, 0x20A0, 0x20CF)) return false;  // currency
  if (in_range(cp, 0x2190, 0x23FF)) return false;  // arrows, math operators
  if (in_range(cp, 0x2500, 0x27BF)) return false;  // box drawing, shapes, dingbats
  if (in_range(cp, 0x2E00, 0x2E7F)) return false;
  if (in_range(cp, 0x3000, 0x303F)) return false;  // CJK symbols and punctuation
  if (in_range(cp, 0xFE30, 0xFE4F)) return false;
  if (in_range(cp, 0xFF00, 0xFF0F) || in_range(cp, 0xFF1A, 0xFF20) ||
      in_range(cp, 0xFF3B, 0xFF40) || in_range(cp, 0xFF5B, 0xFF65)) {
    return false;
  }
  if (in_range(cp, 0x1F000, 0x1FAFF)) return false;  // emoji and pictographs
  return true;
}

bool is_ascii_space(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_ascii_punct(char c) {
  const auto u = static_cast<unsigned char>(c);
  return (u >= 33 && u <= 47) || (u >= 58 && u <= 64) || (u >= 91 && u <= 96) ||
         (u >= 123 && u <= 126);
}

}  // namespace

std::string to_lower_utf8(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const std::size_t start = pos;
    const char32_t cp = next_code_point(text, pos);
    if (cp == k_replacement && pos - start == 1 && static_cast<unsigned char>(text[start]) >= 0x80) {
      out.push_back(text[start]);  // keep malformed bytes as-is
      continue;
    }
    append_utf8(out, fold_case(cp));
  }
  return out;
}

std::string_view trim(std::string_view text) noexcept {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_ascii_space(text[begin])) ++begin;
  while (end > begin && is_ascii_space(text[end - 1])) --end;
  return text.substr(begin, end - begin);
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> terms;
  std::string current;
  std::size_t pos = 0;
  while (pos < text.size()) {
    const char32_t cp = next_code_point(text, pos);
    if (is_word_code_point(cp)) {
      append_utf8(current, fold_case(cp));
    } else if (!current.empty()) {
      terms.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) terms.push_back(std::move(current));
  return terms;
}

std::string normalize_answer(std::string_view text) {
  std::string lowered = to_lower_utf8(text);
  std::string no_punct;
  no_punct.reserve(lowered.size());
  for (char c : lowered) {
    if (!is_ascii_punct(c)) no_punct.push_back(c);
  }
  // Articles are removed as whole words; the surrounding whitespace
  // collapses in the same pass.
  std::string out;
  std::istringstream words(no_punct);
  std::string word;
  while (words >> word) {
    if (word == "a" || word == "an" || word == "the") continue;
    if (!out.empty()) out.push_back(' ');
    out += word;
  }
  return out;
}

std::vector<std::string> normalized_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::istringstream words(normalize_answer(text));
  std::string word;
  while (words >> word) tokens.push_back(word);
  return tokens;
}

bool iequals_ascii(std::string_view a, std::string_view b) noexcept {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    char x = a[i];
    char y = b[i];
    if (x >= 'A' && x <= 'Z') x = static_cast<char>(x + 32);
    if (y >= 'A' && y <= 'Z') y = static_cast<char>(y + 32);
    if (x != y) return false;
  }
  return true;
}

}  // namespace hanrag
