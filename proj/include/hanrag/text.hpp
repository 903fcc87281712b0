#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace hanrag {

// UTF-8 helpers shared by the retriever, the metrics and the scripted oracle.
// Case folding covers ASCII, Latin-1, Latin Extended-A, Greek, Cyrillic and
// fullwidth Latin; other scripts pass through unchanged.

std::string to_lower_utf8(std::string_view text);

// Trims ASCII whitespace on both ends.
std::string_view trim(std::string_view text) noexcept;

// Lowercased terms, split on anything that is not a letter, digit or
// combining mark. No stemming, no stopwords.
std::vector<std::string> tokenize(std::string_view text);

// SQuAD-style answer normalization: lowercase, drop ASCII punctuation, drop
// the articles a/an/the as whole words, collapse whitespace.
std::string normalize_answer(std::string_view text);

// Whitespace tokens of normalize_answer(text).
std::vector<std::string> normalized_tokens(std::string_view text);

bool iequals_ascii(std::string_view a, std::string_view b) noexcept;

}  // namespace hanrag
