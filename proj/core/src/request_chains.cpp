#include "chainblock/request_chains.hpp"

#include <set>

#include "chainblock/error.hpp"
#include <nlohmann/json.hpp>

namespace chainblock {

namespace {

ChainLink make_link(const PageGraph& graph, NodeId script, Inserter::Kind inserted_by) {
    ChainLink link;
    link.script_node = script;
    const auto& url = graph.node(script).url;
    if (url && !url->empty()) link.script_url = *url;
    link.inserted_by = inserted_by;
    return link;
}

}  // namespace

RequestChain build_chain(const PageGraph& graph, const ResourceRequestRecord& target) {
    RequestChain chain;
    chain.terminal = target;
    std::set<std::uint32_t> seen;

    std::optional<NodeId> element = target.requester;
    // A script that fetched the resource itself is the first link.
    if (graph.node(target.requester).kind == NodeKind::script) {
        NodeId script = target.requester;
        seen.insert(script.value);
        element = graph.element_of_script(script);
        Inserter::Kind kind = Inserter::Kind::unknown;
        if (element) kind = inserter_of(graph, *element).kind;
        chain.links.push_back(make_link(graph, script, kind));
        if (!element) {
            chain.diagnostics.push_back("script '" + graph.node(script).key + "' has no executing element");
            return chain;
        }
    }

    while (element) {
        Inserter ins = inserter_of(graph, *element);
        if (ins.kind == Inserter::Kind::parser) break;
        if (ins.kind == Inserter::Kind::unknown) {
            chain.diagnostics.push_back(ins.diagnostic);
            break;
        }
        if (!seen.insert(ins.script.value).second) {
            throw GraphInvariantError("insertion cycle through script '" + graph.node(ins.script).key + "'");
        }
        auto next = graph.element_of_script(ins.script);
        Inserter::Kind kind = Inserter::Kind::unknown;
        if (next) kind = inserter_of(graph, *next).kind;
        chain.links.push_back(make_link(graph, ins.script, kind));
        if (!next) {
            chain.diagnostics.push_back("script '" + graph.node(ins.script).key + "' has no executing element");
            break;
        }
        element = next;
    }
    if (target.requested_url) chain.diagnostics.push_back("redirected from " + *target.requested_url);
    return chain;
}

std::vector<ChainOutcome> build_all_chains(const PageGraph& graph, const std::vector<ResourceRequestRecord>& targets) {
    std::vector<ChainOutcome> out;
    out.reserve(targets.size());
    for (const auto& target : targets) {
        ChainOutcome outcome;
        outcome.target = target;
        try {
            outcome.chain = build_chain(graph, target);
        } catch (const Error& e) {
            outcome.error = e.what();
        }
        out.push_back(std::move(outcome));
    }
    return out;
}

std::string chain_to_json_line(const PageGraph& graph, const RequestChain& chain) {
    nlohmann::ordered_json j;
    j["terminal_url"] = chain.terminal.resource_url;
    j["resource_type"] = std::string(to_string(chain.terminal.resource_type));
    j["page_url"] = graph.page_url();
    nlohmann::ordered_json scripts = nlohmann::ordered_json::array();
    for (const auto& link : chain.links) {
        nlohmann::ordered_json s;
        s["node"] = graph.node(link.script_node).key;
        s["url"] = link.script_url ? nlohmann::ordered_json(*link.script_url) : nlohmann::ordered_json(nullptr);
        scripts.push_back(std::move(s));
    }
    j["scripts"] = std::move(scripts);
    j["diagnostics"] = chain.diagnostics;
    return j.dump();
}

}  // namespace chainblock
