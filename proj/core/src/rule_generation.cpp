#include <unordered_set>

#include "chainblock/abp_rules.hpp"
#include "chainblock/error.hpp"
#include "chainblock/url.hpp"

namespace chainblock {

NetworkRule generate_rule(std::string_view url, const PublicSuffixTable& psl) {
    auto parsed = parse_url(url);
    if (!parsed) throw RuleGenerationError("not an absolute URL: '" + std::string(url) + "'");
    if (!parsed->has_authority || parsed->host.empty()) {
        throw RuleGenerationError("URL has no host (" + parsed->scheme + ": URL): '" + std::string(url) + "'");
    }
    if (parsed->host_is_ip()) throw RuleGenerationError("IP-literal host has no eTLD+1: '" + std::string(url) + "'");

    // 1. eTLD+1 reduction.
    auto site = psl.registrable_domain(parsed->host);
    if (!site) throw RuleGenerationError("host '" + parsed->host + "' is a public suffix");

    // 2-4. Query, fragment and protocol are simply not carried over.
    std::string text = "||" + *site;
    if (parsed->port) text += ":" + std::to_string(*parsed->port);

    // ABP has no escaping. '$' would start an option list and a trailing
    // '|' would become an anchor; a wildcard matches both characters.
    std::string path = parsed->path.empty() ? "/" : parsed->path;
    for (char& c : path) {
        if (c == '$' || c == '|') c = '*';
    }
    text += path;

    return parse_network_rule(text);
}

std::vector<NetworkRule> dedupe_rules(std::vector<NetworkRule> rules) {
    std::unordered_set<std::string> seen;
    std::vector<NetworkRule> out;
    out.reserve(rules.size());
    for (auto& rule : rules) {
        if (seen.insert(rule.to_string()).second) out.push_back(std::move(rule));
    }
    return out;
}

}  // namespace chainblock
