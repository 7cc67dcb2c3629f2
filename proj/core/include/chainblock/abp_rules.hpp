#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chainblock/public_suffix.hpp"
#include "chainblock/resource_type.hpp"

namespace chainblock {

enum class Anchor : std::uint8_t { none, domain_anchor, left_anchor };

struct PatternToken {
    enum class Kind : std::uint8_t { literal, wildcard, separator };
    Kind kind = Kind::literal;
    std::string text;  // literal characters; empty for wildcard/separator

    bool operator==(const PatternToken&) const = default;
};

// Bit positions for `$type` options. Only the first four can be produced by
// a RequestContext; the rest exist so EasyList rules that name other types
// parse and correctly never match our requests.
enum class TypeOption : std::uint32_t {
    image = 1u << 0,
    subdocument = 1u << 1,
    script = 1u << 2,
    other = 1u << 3,
    stylesheet = 1u << 4,
    xmlhttprequest = 1u << 5,
    object = 1u << 6,
    media = 1u << 7,
    font = 1u << 8,
    websocket = 1u << 9,
    ping = 1u << 10,
    webrtc = 1u << 11,
};

struct RuleOptions {
    std::uint32_t include_types = 0;  // 0 means every type not excluded
    std::uint32_t exclude_types = 0;
    std::optional<bool> third_party;
    std::vector<std::string> include_domains;
    std::vector<std::string> exclude_domains;
    bool match_case = false;

    bool operator==(const RuleOptions&) const = default;
};

struct NetworkRule {
    std::string raw_text;
    bool is_exception = false;
    Anchor anchor = Anchor::none;
    bool right_anchored = false;
    std::vector<PatternToken> pattern;
    RuleOptions options;

    // Canonical ABP text: options in a fixed order, wildcard runs collapsed.
    std::string to_string() const;

    // Structural equality; raw_text is not compared.
    bool same_rule(const NetworkRule& other) const;
};

// Throws RuleSyntaxError for lines that are not supported network rules.
NetworkRule parse_network_rule(std::string_view line);

struct RequestContext {
    std::string url;            // normalized request string (no fragment)
    std::string source_origin;  // eTLD+1 of the requesting frame
    ResourceType resource_type = ResourceType::other;

    std::string source_host;   // full host of the frame, used by $domain=
    std::string request_site;  // eTLD+1 of `url`, or its host when it has none
    std::string url_lower;
    std::size_t host_begin = 0;
    std::size_t host_end = 0;
};

// Throws UrlError unless `url` is absolute with a host. `source_host`
// defaults to `source_origin`.
RequestContext make_request_context(std::string_view url, std::string_view source_origin, ResourceType type,
                                    const PublicSuffixTable& psl, std::string_view source_host = {});

bool matches(const NetworkRule& rule, const RequestContext& request);

struct ListDiagnostic {
    std::string source;
    std::size_t line_number = 0;  // 1-based
    std::string line;
    std::string reason;
};

struct ListStats {
    std::size_t lines = 0;
    std::size_t comments = 0;
    std::size_t cosmetic = 0;
    std::size_t skipped = 0;
    std::size_t blocking = 0;
    std::size_t exceptions = 0;
};

struct Verdict {
    enum class Kind : std::uint8_t { unmatched, blocked, excepted };
    Kind kind = Kind::unmatched;
    const NetworkRule* rule = nullptr;  // witness; null when unmatched

    bool blocked() const { return kind == Kind::blocked; }
    bool excepted() const { return kind == Kind::excepted; }
};

// An immutable, token-indexed collection of parsed network rules. Built with
// RuleSetBuilder or parse_list(); safe to share across threads.
class RuleSet {
public:
    RuleSet() = default;

    const std::vector<NetworkRule>& blocking_rules() const { return blocking_; }
    const std::vector<NetworkRule>& exception_rules() const { return exceptions_; }
    const std::vector<std::string>& source_names() const { return sources_; }
    const ListStats& stats() const { return stats_; }
    const std::vector<ListDiagnostic>& diagnostics() const { return diagnostics_; }
    bool empty() const { return blocking_.empty() && exceptions_.empty(); }

    // Exceptions dominate. The witness is the matching rule that appeared
    // first in list order within its collection.
    Verdict match(const RequestContext& request) const;

private:
    friend class RuleSetBuilder;

    struct TokenIndex {
        std::unordered_map<std::string, std::vector<std::uint32_t>> by_token;
        std::vector<std::uint32_t> untokenized;

        void add(const NetworkRule& rule, std::uint32_t position);
        std::optional<std::uint32_t> first_match(const std::vector<NetworkRule>& rules,
                                                 const std::vector<std::string>& url_tokens,
                                                 const RequestContext& request) const;
    };

    std::vector<NetworkRule> blocking_;
    std::vector<NetworkRule> exceptions_;
    TokenIndex blocking_index_;
    TokenIndex exception_index_;
    std::vector<std::string> sources_;
    ListStats stats_;
    std::vector<ListDiagnostic> diagnostics_;
};

class RuleSetBuilder {
public:
    // Parses one list. Malformed lines are skipped and recorded.
    RuleSetBuilder& add_list(std::string_view source_name, std::string_view text);
    RuleSetBuilder& add_rule(NetworkRule rule);
    RuleSet build() &&;

private:
    RuleSet set_;
};

RuleSet parse_list(std::string_view text, std::string_view source_name = "list");

// Reduces `url` to a domain-anchored rule `||<eTLD+1><path>`: eTLD+1
// reduction, then query, fragment and protocol are dropped. A non-default
// port is kept so the rule still matches the URL it came from.
// Throws RuleGenerationError for IP hosts, hostless URLs and hosts that are
// themselves public suffixes.
NetworkRule generate_rule(std::string_view url, const PublicSuffixTable& psl);

// Drops canonical-text duplicates, keeping first occurrences in order.
std::vector<NetworkRule> dedupe_rules(std::vector<NetworkRule> rules);

struct ListHeader {
    std::string title = "chainblock generated rules";
    std::string generator = "chainblock";
    std::string date;
    std::string crawl_id;
};

// Renders an ABP list file: `[Adblock Plus 2.0]`, `!` header block, rules.
std::string format_rule_list(const ListHeader& header, const std::vector<NetworkRule>& rules);

}  // namespace chainblock
