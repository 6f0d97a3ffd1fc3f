#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace compm::data {

/// Lowercases ASCII letters and splits on whitespace and punctuation.
///
/// Letters, digits, and non-ASCII bytes form words; an apostrophe between two word
/// characters stays inside the word ("who'd"). Every other punctuation character is
/// a token of its own.
std::vector<std::string> segment(std::string_view text);

/// Trimmed, lowercased text; empty when the input holds only whitespace.
std::string normalize(std::string_view text);

}  // namespace compm::data
