#include <algorithm>
#include <array>
#include <cctype>

#include "chainblock/abp_rules.hpp"
#include "chainblock/error.hpp"
#include "chainblock/url.hpp"

namespace chainblock {

namespace {

bool is_token_char(char c) {
    auto u = static_cast<unsigned char>(c);
    return u < 0x80 && std::isalnum(u);
}

// Every maximal alphanumeric run in `text`, lowercased input assumed.
std::vector<std::string> url_tokens(std::string_view text) {
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && !is_token_char(text[i])) ++i;
        std::size_t start = i;
        while (i < text.size() && is_token_char(text[i])) ++i;
        if (i > start) tokens.emplace_back(text.substr(start, i - start));
    }
    std::sort(tokens.begin(), tokens.end());
    tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    return tokens;
}

// Alphanumeric runs of the pattern that are guaranteed to appear as whole
// tokens in any URL the rule matches.
std::vector<std::string> bounded_pattern_tokens(const NetworkRule& rule) {
    std::vector<std::string> out;
    const auto& tokens = rule.pattern;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
        if (tokens[t].kind != PatternToken::Kind::literal) continue;
        const std::string& text = tokens[t].text;

        bool left_bounded_at_start = false;
        if (t == 0) {
            left_bounded_at_start = rule.anchor != Anchor::none;
        } else {
            left_bounded_at_start = tokens[t - 1].kind == PatternToken::Kind::separator;
        }
        bool right_bounded_at_end = false;
        if (t + 1 == tokens.size()) {
            right_bounded_at_end = rule.right_anchored;
        } else {
            right_bounded_at_end = tokens[t + 1].kind == PatternToken::Kind::separator;
        }

        std::size_t i = 0;
        while (i < text.size()) {
            while (i < text.size() && !is_token_char(text[i])) ++i;
            std::size_t start = i;
            while (i < text.size() && is_token_char(text[i])) ++i;
            if (i == start) continue;
            bool left = start > 0 || left_bounded_at_start;
            bool right = i < text.size() || right_bounded_at_end;
            if (left && right) out.push_back(to_lower_ascii(std::string_view(text).substr(start, i - start)));
        }
    }
    return out;
}

bool is_cosmetic(std::string_view line) {
    static constexpr std::array<std::string_view, 9> markers{"##", "#@#", "#?#", "#@?#", "#$#",
                                                            "#@$#", "#%#", "#@%#", "$$"};
    for (auto marker : markers) {
        std::size_t pos = line.find(marker);
        if (pos == std::string_view::npos) continue;
        std::string_view prefix = line.substr(0, pos);
        if (prefix.find_first_of("/*|@\"!^") == std::string_view::npos) return true;
    }
    return false;
}

std::string_view trim_line(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

}  // namespace

void RuleSet::TokenIndex::add(const NetworkRule& rule, std::uint32_t position) {
    auto candidates = bounded_pattern_tokens(rule);
    if (candidates.empty()) {
        untokenized.push_back(position);
        return;
    }
    // Prefer the least populated bucket so lookups stay short; ties go to
    // the longer (more selective) token.
    const std::string* best = nullptr;
    std::size_t best_load = 0;
    for (const auto& token : candidates) {
        auto it = by_token.find(token);
        std::size_t load = it == by_token.end() ? 0 : it->second.size();
        if (!best || load < best_load || (load == best_load && token.size() > best->size())) {
            best = &token;
            best_load = load;
        }
    }
    by_token[*best].push_back(position);
}

std::optional<std::uint32_t> RuleSet::TokenIndex::first_match(const std::vector<NetworkRule>& rules,
                                                              const std::vector<std::string>& tokens,
                                                              const RequestContext& request) const {
    std::vector<std::uint32_t> candidates = untokenized;
    for (const auto& token : tokens) {
        auto it = by_token.find(token);
        if (it != by_token.end()) candidates.insert(candidates.end(), it->second.begin(), it->second.end());
    }
    std::sort(candidates.begin(), candidates.end());
    for (std::uint32_t position : candidates) {
        if (matches(rules[position], request)) return position;
    }
    return std::nullopt;
}

Verdict RuleSet::match(const RequestContext& request) const {
    if (empty()) return {};
    auto tokens = url_tokens(request.url_lower);
    if (auto hit = exception_index_.first_match(exceptions_, tokens, request)) {
        return {Verdict::Kind::excepted, &exceptions_[*hit]};
    }
    if (auto hit = blocking_index_.first_match(blocking_, tokens, request)) {
        return {Verdict::Kind::blocked, &blocking_[*hit]};
    }
    return {};
}

RuleSetBuilder& RuleSetBuilder::add_rule(NetworkRule rule) {
    if (rule.is_exception) {
        set_.exceptions_.push_back(std::move(rule));
        ++set_.stats_.exceptions;
    } else {
        set_.blocking_.push_back(std::move(rule));
        ++set_.stats_.blocking;
    }
    return *this;
}

RuleSetBuilder& RuleSetBuilder::add_list(std::string_view source_name, std::string_view text) {
    set_.sources_.emplace_back(source_name);
    std::size_t pos = 0;
    std::size_t line_number = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view raw = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_number;
        std::string_view line = trim_line(raw);
        if (line_number == 1 && line.substr(0, 3) == "\xEF\xBB\xBF") line = trim_line(line.substr(3));
        if (line.empty()) continue;
        ++set_.stats_.lines;

        if (line.front() == '!' || (line.front() == '[' && line.back() == ']')) {
            ++set_.stats_.comments;
            continue;
        }
        if (is_cosmetic(line)) {
            ++set_.stats_.cosmetic;
            continue;
        }
        try {
            add_rule(parse_network_rule(line));
        } catch (const RuleSyntaxError& e) {
            ++set_.stats_.skipped;
            set_.diagnostics_.push_back({std::string(source_name), line_number, std::string(line), e.what()});
        }
    }
    return *this;
}

RuleSet RuleSetBuilder::build() && {
    RuleSet out = std::move(set_);
    for (std::uint32_t i = 0; i < out.blocking_.size(); ++i) out.blocking_index_.add(out.blocking_[i], i);
    for (std::uint32_t i = 0; i < out.exceptions_.size(); ++i) out.exception_index_.add(out.exceptions_[i], i);
    return out;
}

RuleSet parse_list(std::string_view text, std::string_view source_name) {
    RuleSetBuilder builder;
    builder.add_list(source_name, text);
    return std::move(builder).build();
}

}  // namespace chainblock
