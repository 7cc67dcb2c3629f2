#pragma once

#include <span>
#include <string_view>

#include "chainblock/abp_rules.hpp"

namespace chainblock::detail {

// ABP separator class: anything but a letter, digit, or one of `_-.%`.
bool is_separator_char(char c);

// Wildcard match of `tokens` against text[start..]. Literals must already be
// in the same case as `text`. Without `right_anchored` the pattern only has
// to match a prefix of the remaining text.
bool glob_match(std::span<const PatternToken> tokens, std::string_view text, std::size_t start, bool leading_star,
                bool right_anchored);

}  // namespace chainblock::detail
