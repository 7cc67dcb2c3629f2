#include "chainblock/abp_rules.hpp"

#include <algorithm>
#include <array>
#include <cctype>

#include "chainblock/error.hpp"
#include "chainblock/url.hpp"
#include "rule_matching.hpp"

namespace chainblock {

namespace {

struct TypeName {
    std::string_view name;
    TypeOption type;
};

// Canonical order for serialization.
constexpr std::array<TypeName, 12> kTypeNames{{
    {"image", TypeOption::image},
    {"subdocument", TypeOption::subdocument},
    {"script", TypeOption::script},
    {"other", TypeOption::other},
    {"stylesheet", TypeOption::stylesheet},
    {"xmlhttprequest", TypeOption::xmlhttprequest},
    {"object", TypeOption::object},
    {"media", TypeOption::media},
    {"font", TypeOption::font},
    {"websocket", TypeOption::websocket},
    {"ping", TypeOption::ping},
    {"webrtc", TypeOption::webrtc},
}};

constexpr std::array<std::pair<std::string_view, std::string_view>, 5> kTypeAliases{{
    {"xhr", "xmlhttprequest"},
    {"css", "stylesheet"},
    {"frame", "subdocument"},
    {"object-subrequest", "object"},
    {"ws", "websocket"},
}};

std::optional<TypeOption> type_option(std::string_view name) {
    for (auto [alias, target] : kTypeAliases) {
        if (name == alias) name = target;
    }
    for (const auto& entry : kTypeNames) {
        if (entry.name == name) return entry.type;
    }
    return std::nullopt;
}

std::uint32_t bit(TypeOption t) { return static_cast<std::uint32_t>(t); }

std::uint32_t request_type_bit(ResourceType type) {
    switch (type) {
        case ResourceType::image: return bit(TypeOption::image);
        case ResourceType::subdocument: return bit(TypeOption::subdocument);
        case ResourceType::script: return bit(TypeOption::script);
        case ResourceType::other: return bit(TypeOption::other);
    }
    return bit(TypeOption::other);
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

void parse_options(std::string_view text, RuleOptions& options) {
    if (text.empty()) throw RuleSyntaxError("empty option list");
    std::size_t pos = 0;
    while (pos <= text.size()) {
        std::size_t comma = text.find(',', pos);
        if (comma == std::string_view::npos) comma = text.size();
        std::string option = to_lower_ascii(trim(text.substr(pos, comma - pos)));
        pos = comma + 1;
        if (option.empty()) throw RuleSyntaxError("empty option");

        bool negated = option.front() == '~';
        std::string_view name = negated ? std::string_view(option).substr(1) : std::string_view(option);

        if (auto type = type_option(name)) {
            (negated ? options.exclude_types : options.include_types) |= bit(*type);
        } else if (name == "third-party" || name == "3p") {
            options.third_party = !negated;
        } else if (name == "first-party" || name == "1p") {
            options.third_party = negated;
        } else if (name == "match-case" && !negated) {
            options.match_case = true;
        } else if ((name.rfind("domain=", 0) == 0 || name.rfind("from=", 0) == 0) && !negated) {
            std::string_view list = name.substr(name.find('=') + 1);
            if (list.empty()) throw RuleSyntaxError("empty domain= list");
            std::size_t dp = 0;
            while (dp <= list.size()) {
                std::size_t bar = list.find('|', dp);
                if (bar == std::string_view::npos) bar = list.size();
                std::string_view domain = list.substr(dp, bar - dp);
                dp = bar + 1;
                bool exclude = !domain.empty() && domain.front() == '~';
                if (exclude) domain.remove_prefix(1);
                if (domain.empty()) throw RuleSyntaxError("empty domain in domain= list");
                (exclude ? options.exclude_domains : options.include_domains).emplace_back(domain);
            }
        } else {
            throw RuleSyntaxError("unsupported option '" + option + "'");
        }
        if (comma == text.size()) break;
    }
}

void tokenize_pattern(std::string_view pattern, bool match_case, std::vector<PatternToken>& out) {
    for (char c : pattern) {
        if (c == '*') {
            if (out.empty() || out.back().kind != PatternToken::Kind::wildcard) {
                out.push_back({PatternToken::Kind::wildcard, {}});
            }
        } else if (c == '^') {
            out.push_back({PatternToken::Kind::separator, {}});
        } else {
            if (out.empty() || out.back().kind != PatternToken::Kind::literal) {
                out.push_back({PatternToken::Kind::literal, {}});
            }
            char stored = c;
            if (!match_case && c >= 'A' && c <= 'Z') stored = static_cast<char>(c - 'A' + 'a');
            out.back().text.push_back(stored);
        }
    }
}

bool domain_matches(std::string_view host, std::string_view domain) {
    if (host.size() < domain.size()) return false;
    if (host.substr(host.size() - domain.size()) != domain) return false;
    return host.size() == domain.size() || host[host.size() - domain.size() - 1] == '.';
}

bool options_match(const RuleOptions& options, const RequestContext& request) {
    std::uint32_t type = request_type_bit(request.resource_type);
    if (options.include_types != 0 && (options.include_types & type) == 0) return false;
    if ((options.exclude_types & type) != 0) return false;

    if (options.third_party) {
        bool third = request.request_site != request.source_origin;
        if (third != *options.third_party) return false;
    }

    if (!options.include_domains.empty() || !options.exclude_domains.empty()) {
        std::string_view host = request.source_host.empty() ? std::string_view(request.source_origin)
                                                            : std::string_view(request.source_host);
        // The most specific listed domain decides.
        std::size_t best_include = 0;
        std::size_t best_exclude = 0;
        for (const auto& d : options.include_domains) {
            if (domain_matches(host, d)) best_include = std::max(best_include, d.size());
        }
        for (const auto& d : options.exclude_domains) {
            if (domain_matches(host, d)) best_exclude = std::max(best_exclude, d.size());
        }
        if (best_exclude > 0 && best_exclude >= best_include) return false;
        if (!options.include_domains.empty() && best_include == 0) return false;
    }
    return true;
}

}  // namespace

namespace detail {

bool is_separator_char(char c) {
    auto u = static_cast<unsigned char>(c);
    if (u >= 0x80) return false;
    if (std::isalnum(u)) return false;
    return c != '_' && c != '-' && c != '.' && c != '%';
}

namespace {

struct Cursor {
    std::size_t token = 0;
    std::size_t offset = 0;
};

Cursor next(std::span<const PatternToken> tokens, Cursor c) {
    if (tokens[c.token].kind == PatternToken::Kind::literal && c.offset + 1 < tokens[c.token].text.size()) {
        return {c.token, c.offset + 1};
    }
    return {c.token + 1, 0};
}

}  // namespace

bool glob_match(std::span<const PatternToken> tokens, std::string_view text, std::size_t start, bool leading_star,
                bool right_anchored) {
    const std::size_t count = tokens.size();
    Cursor p;
    std::size_t t = start;
    bool have_star = leading_star;
    Cursor star_p;
    std::size_t star_t = start;

    while (t < text.size()) {
        if (p.token < count) {
            const PatternToken& tok = tokens[p.token];
            if (tok.kind == PatternToken::Kind::wildcard) {
                have_star = true;
                star_p = next(tokens, p);
                star_t = t;
                p = star_p;
                continue;
            }
            bool ok = tok.kind == PatternToken::Kind::separator ? is_separator_char(text[t])
                                                                 : tok.text[p.offset] == text[t];
            if (ok) {
                p = next(tokens, p);
                ++t;
                continue;
            }
        } else if (!right_anchored) {
            return true;
        }
        if (!have_star) return false;
        p = star_p;
        t = ++star_t;
    }
    // End of text: only wildcards and separators (which match the end) remain.
    while (p.token < count && tokens[p.token].kind != PatternToken::Kind::literal) p = next(tokens, p);
    return p.token == count;
}

}  // namespace detail

std::string_view to_string(ResourceType type) {
    switch (type) {
        case ResourceType::image: return "image";
        case ResourceType::subdocument: return "subdocument";
        case ResourceType::script: return "script";
        case ResourceType::other: return "other";
    }
    return "other";
}

ResourceType resource_type_from_string(std::string_view name) {
    std::string lower = to_lower_ascii(name);
    if (lower == "image" || lower == "img") return ResourceType::image;
    if (lower == "subdocument" || lower == "iframe" || lower == "frame" || lower == "sub_frame") {
        return ResourceType::subdocument;
    }
    if (lower == "script") return ResourceType::script;
    return ResourceType::other;
}

std::string NetworkRule::to_string() const {
    std::string out;
    if (is_exception) out += "@@";
    if (anchor == Anchor::domain_anchor) out += "||";
    if (anchor == Anchor::left_anchor) out += "|";
    for (const auto& tok : pattern) {
        switch (tok.kind) {
            case PatternToken::Kind::literal: out += tok.text; break;
            case PatternToken::Kind::wildcard: out += '*'; break;
            case PatternToken::Kind::separator: out += '^'; break;
        }
    }
    if (right_anchored) out += '|';

    std::vector<std::string> opts;
    for (const auto& entry : kTypeNames) {
        if (options.include_types & bit(entry.type)) opts.emplace_back(entry.name);
    }
    for (const auto& entry : kTypeNames) {
        if (options.exclude_types & bit(entry.type)) opts.push_back("~" + std::string(entry.name));
    }
    if (options.third_party) opts.emplace_back(*options.third_party ? "third-party" : "~third-party");
    if (!options.include_domains.empty() || !options.exclude_domains.empty()) {
        std::string d = "domain=";
        bool first = true;
        for (const auto& dom : options.include_domains) {
            d += (first ? "" : "|") + dom;
            first = false;
        }
        for (const auto& dom : options.exclude_domains) {
            d += (first ? "~" : "|~") + dom;
            first = false;
        }
        opts.push_back(std::move(d));
    }
    if (options.match_case) opts.emplace_back("match-case");
    if (!opts.empty()) {
        out += '$';
        for (std::size_t i = 0; i < opts.size(); ++i) {
            if (i) out += ',';
            out += opts[i];
        }
    }
    return out;
}

bool NetworkRule::same_rule(const NetworkRule& other) const {
    return is_exception == other.is_exception && anchor == other.anchor && right_anchored == other.right_anchored &&
           pattern == other.pattern && options == other.options;
}

NetworkRule parse_network_rule(std::string_view line) {
    line = trim(line);
    if (line.empty()) throw RuleSyntaxError("empty rule");

    NetworkRule rule;
    rule.raw_text = std::string(line);

    std::string_view body = line;
    if (body.substr(0, 2) == "@@") {
        rule.is_exception = true;
        body.remove_prefix(2);
    }

    std::string_view pattern = body;
    if (std::size_t dollar = body.rfind('$'); dollar != std::string_view::npos) {
        // A '$' followed by something that cannot be an option list belongs
        // to the pattern.
        std::string_view tail = body.substr(dollar + 1);
        bool looks_like_options = tail.empty() || tail.find('/') == std::string_view::npos;
        if (looks_like_options) {
            parse_options(tail, rule.options);
            pattern = body.substr(0, dollar);
        }
    }

    if (pattern.size() >= 2 && pattern.front() == '/' && pattern.back() == '/') {
        throw RuleSyntaxError("regular-expression rules are not supported");
    }

    if (pattern.substr(0, 2) == "||") {
        rule.anchor = Anchor::domain_anchor;
        pattern.remove_prefix(2);
        if (pattern.empty()) throw RuleSyntaxError("domain anchor without a pattern");
    } else if (pattern.substr(0, 1) == "|") {
        rule.anchor = Anchor::left_anchor;
        pattern.remove_prefix(1);
    }
    if (!pattern.empty() && pattern.back() == '|') {
        rule.right_anchored = true;
        pattern.remove_suffix(1);
    }
    if (pattern.find('|') != std::string_view::npos) {
        throw RuleSyntaxError("'|' is only valid as an anchor");
    }
    tokenize_pattern(pattern, rule.options.match_case, rule.pattern);
    return rule;
}

RequestContext make_request_context(std::string_view url, std::string_view source_origin, ResourceType type,
                                    const PublicSuffixTable& psl, std::string_view source_host) {
    Url parsed = parse_absolute_url(url);
    RequestContext ctx;
    ctx.url = parsed.request_string();
    ctx.url_lower = to_lower_ascii(ctx.url);
    ctx.source_origin = to_lower_ascii(source_origin);
    ctx.source_host = source_host.empty() ? ctx.source_origin : to_lower_ascii(source_host);
    ctx.resource_type = type;
    ctx.host_begin = parsed.scheme.size() + 3;
    if (parsed.host.find(':') != std::string::npos) ++ctx.host_begin;  // '['
    ctx.host_end = ctx.host_begin + parsed.host.size();
    ctx.request_site = psl.registrable_domain(parsed.host).value_or(parsed.host);
    return ctx;
}

bool matches(const NetworkRule& rule, const RequestContext& request) {
    if (!options_match(rule.options, request)) return false;
    std::string_view text = rule.options.match_case ? request.url : request.url_lower;
    std::span<const PatternToken> tokens(rule.pattern);
    switch (rule.anchor) {
        case Anchor::left_anchor:
            return detail::glob_match(tokens, text, 0, false, rule.right_anchored);
        case Anchor::none:
            return detail::glob_match(tokens, text, 0, true, rule.right_anchored);
        case Anchor::domain_anchor:
            for (std::size_t s = request.host_begin; s < request.host_end; ++s) {
                if (s != request.host_begin && text[s - 1] != '.') continue;
                if (detail::glob_match(tokens, text, s, false, rule.right_anchored)) return true;
            }
            return false;
    }
    return false;
}

std::string format_rule_list(const ListHeader& header, const std::vector<NetworkRule>& rules) {
    std::string out = "[Adblock Plus 2.0]\n";
    out += "! Title: " + header.title + "\n";
    out += "! Generator: " + header.generator + "\n";
    if (!header.date.empty()) out += "! Date: " + header.date + "\n";
    if (!header.crawl_id.empty()) out += "! Source crawl: " + header.crawl_id + "\n";
    out += "! Rules: " + std::to_string(rules.size()) + "\n";
    for (const auto& rule : rules) out += rule.to_string() + "\n";
    return out;
}

}  // namespace chainblock
