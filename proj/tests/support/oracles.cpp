#include "oracles.hpp"

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace oracle {

using chainblock::EdgeKind;
using chainblock::NodeKind;
using chainblock::PageGraph;
using chainblock::ResourceType;

namespace {

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

bool host_in(std::string_view host, std::string_view domain) {
    return host == domain || ends_with(host, "." + std::string(domain));
}

std::string type_name(ResourceType t) {
    switch (t) {
        case ResourceType::image: return "image";
        case ResourceType::subdocument: return "subdocument";
        case ResourceType::script: return "script";
        case ResourceType::other: return "other";
    }
    return "other";
}

std::string regex_for(std::string pattern) {
    std::string re;
    if (pattern.rfind("||", 0) == 0) {
        re = "^[a-z][a-z0-9+.-]*://(?:[^/?#]*\\.)?";
        pattern = pattern.substr(2);
    } else if (pattern.rfind("|", 0) == 0) {
        re = "^";
        pattern = pattern.substr(1);
    }
    bool right = !pattern.empty() && pattern.back() == '|';
    if (right) pattern.pop_back();
    for (char c : pattern) {
        if (c == '*') {
            re += ".*";
        } else if (c == '^') {
            re += "(?:[^A-Za-z0-9_.%-]|$)";
        } else if (std::isalnum(static_cast<unsigned char>(c))) {
            re += c;
        } else {
            re += '\\';
            re += c;
        }
    }
    if (right) re += "$";
    return re;
}

}  // namespace

std::string site_of(std::string_view host) {
    auto labels = split(host, '.');
    std::size_t keep = (ends_with(host, ".co.uk") || ends_with(host, ".com.al")) ? 3 : 2;
    if (labels.size() <= keep) return std::string(host);
    std::string out;
    for (std::size_t i = labels.size() - keep; i < labels.size(); ++i) {
        if (!out.empty()) out += ".";
        out += labels[i];
    }
    return out;
}

std::string host_of(std::string_view url) {
    auto p = url.find("://");
    std::string_view rest = url.substr(p + 3);
    auto end = rest.find_first_of("/?#:");
    return std::string(rest.substr(0, end));
}

bool rule_matches(std::string_view rule_text, const Request& request) {
    std::string text(rule_text);
    if (text.rfind("@@", 0) == 0) text = text.substr(2);
    std::string options;
    if (auto dollar = text.rfind('$'); dollar != std::string::npos) {
        options = text.substr(dollar + 1);
        text = text.substr(0, dollar);
    }

    bool match_case = false;
    std::set<std::string> include_types;
    std::set<std::string> exclude_types;
    std::optional<bool> third_party;
    std::vector<std::pair<std::string, bool>> domains;  // (domain, negated)
    if (!options.empty()) {
        for (const auto& opt : split(options, ',')) {
            if (opt == "match-case") {
                match_case = true;
            } else if (opt == "third-party" || opt == "3p") {
                third_party = true;
            } else if (opt == "~third-party" || opt == "1p" || opt == "first-party") {
                third_party = false;
            } else if (opt.rfind("domain=", 0) == 0) {
                for (const auto& d : split(opt.substr(7), '|')) {
                    if (d.front() == '~') {
                        domains.emplace_back(d.substr(1), true);
                    } else {
                        domains.emplace_back(d, false);
                    }
                }
            } else if (opt.front() == '~') {
                exclude_types.insert(opt.substr(1));
            } else {
                include_types.insert(opt);
            }
        }
    }

    std::string type = type_name(request.type);
    if (!include_types.empty() && !include_types.count(type)) return false;
    if (exclude_types.count(type)) return false;
    if (third_party) {
        bool is_third = site_of(host_of(request.url)) != site_of(request.page_host);
        if (is_third != *third_party) return false;
    }
    if (!domains.empty()) {
        std::optional<std::pair<std::string, bool>> best;
        for (const auto& d : domains) {
            if (!host_in(request.page_host, d.first)) continue;
            if (!best || d.first.size() > best->first.size()) best = d;
        }
        bool any_positive = std::any_of(domains.begin(), domains.end(), [](const auto& d) { return !d.second; });
        if (best) {
            if (best->second) return false;
        } else if (any_positive) {
            return false;
        }
    }

    // Compiling dominates; the same rule text is queried many times.
    thread_local std::map<std::pair<std::string, bool>, std::regex> compiled;
    auto key = std::make_pair(std::string(text), match_case);
    auto it = compiled.find(key);
    if (it == compiled.end()) {
        auto flags = std::regex::ECMAScript;
        if (!match_case) flags |= std::regex::icase;
        it = compiled.emplace(key, std::regex(regex_for(text), flags)).first;
    }
    return std::regex_search(request.url, it->second);
}

ListVerdict list_verdict(const std::vector<std::string>& rules, const Request& request) {
    ListVerdict out;
    std::optional<std::size_t> block;
    for (std::size_t i = 0; i < rules.size(); ++i) {
        bool exception = rules[i].rfind("@@", 0) == 0;
        if (!rule_matches(rules[i], request)) continue;
        if (exception) return {Verdict::excepted, i};
        if (!block) block = i;
    }
    if (block) return {Verdict::blocked, block};
    return out;
}

namespace {

struct Creator {
    std::optional<std::uint32_t> actor;
    bool conflict = false;
};

Creator creator_of(const PageGraph& g, std::uint32_t node) {
    Creator c;
    std::optional<std::uint32_t> first_insert;
    for (const auto& e : g.edges()) {
        if (e.to.value != node) continue;
        if (e.kind == EdgeKind::create_node) {
            if (!c.actor) {
                c.actor = e.from.value;
            } else if (*c.actor != e.from.value) {
                c.conflict = true;
            }
        }
        if (e.kind == EdgeKind::insert_node && !first_insert) first_insert = e.from.value;
    }
    if (!c.actor) c.actor = first_insert;
    return c;
}

std::optional<std::uint32_t> element_of(const PageGraph& g, std::uint32_t script) {
    for (const auto& e : g.edges()) {
        if (e.kind == EdgeKind::execute && e.to.value == script) return e.from.value;
    }
    return std::nullopt;
}

std::optional<std::uint32_t> parent_of(const PageGraph& g, std::uint32_t node) {
    for (const auto& e : g.edges()) {
        if (e.kind == EdgeKind::insert_node && e.to.value == node && e.parent) return e.parent->value;
    }
    return std::nullopt;
}

bool parser_made(const PageGraph& g, std::uint32_t node) {
    auto c = creator_of(g, node);
    return c.actor && g.nodes()[*c.actor].kind == NodeKind::parser;
}

}  // namespace

Chain chain_for(const PageGraph& g, std::uint32_t requester) {
    Chain chain;
    std::set<std::uint32_t> seen;
    std::optional<std::uint32_t> element = requester;
    if (g.nodes()[requester].kind == NodeKind::script) {
        chain.scripts.push_back(requester);
        seen.insert(requester);
        element = element_of(g, requester);
        if (element && creator_of(g, *element).conflict) chain.conflict = true;
    }
    while (element) {
        Creator c = creator_of(g, *element);
        if (c.conflict) {
            chain.conflict = true;
            return chain;
        }
        if (!c.actor) break;
        NodeKind kind = g.nodes()[*c.actor].kind;
        if (kind != NodeKind::script) break;
        if (!seen.insert(*c.actor).second) {
            chain.cycle = true;
            return chain;
        }
        chain.scripts.push_back(*c.actor);
        element = element_of(g, *c.actor);
        if (element && creator_of(g, *element).conflict) {
            chain.conflict = true;
            return chain;
        }
    }
    return chain;
}

std::size_t subtree_count(const PageGraph& g, std::uint32_t script) {
    std::set<std::uint32_t> anchors;
    for (const auto& e : g.edges()) {
        if (e.kind != EdgeKind::insert_node || e.from.value != script) continue;
        std::uint32_t point = e.parent ? e.parent->value : e.to.value;
        std::set<std::uint32_t> visited;
        while (!parser_made(g, point)) {
            visited.insert(point);
            auto up = parent_of(g, point);
            if (!up || visited.count(*up)) break;
            point = *up;
        }
        anchors.insert(point);
    }
    return anchors.size();
}

bool script_safe(const PageGraph& g, std::uint32_t script, std::size_t limit) {
    std::vector<std::uint32_t> todo{script};
    std::set<std::uint32_t> done;
    while (!todo.empty()) {
        std::uint32_t s = todo.back();
        todo.pop_back();
        if (!done.insert(s).second) continue;
        if (subtree_count(g, s) > limit) return false;
        for (const auto& n : g.nodes()) {
            if (n.kind != NodeKind::script) continue;
            auto el = element_of(g, n.id.value);
            if (!el) continue;
            auto c = creator_of(g, *el);
            if (c.actor && *c.actor == s) todo.push_back(n.id.value);
        }
    }
    return true;
}

double forest_probability(const std::string& model_json, const std::vector<double>& row) {
    auto j = nlohmann::json::parse(model_json);
    double sum = 0;
    std::size_t trees = 0;
    for (const auto& tree : j.at("trees")) {
        std::size_t i = 0;
        while (!tree[i].contains("value")) {
            const auto& node = tree[i];
            double x = row.at(node.at("feature").get<std::size_t>());
            i = x <= node.at("threshold").get<double>() ? node.at("left").get<std::size_t>()
                                                        : node.at("right").get<std::size_t>();
        }
        sum += tree[i].at("value").get<double>();
        ++trees;
    }
    if (trees == 0) throw std::runtime_error("model without trees");
    return sum / static_cast<double>(trees);
}

double forest_threshold(const std::string& model_json) {
    return nlohmann::json::parse(model_json).at("decision_threshold").get<double>();
}

}  // namespace oracle
