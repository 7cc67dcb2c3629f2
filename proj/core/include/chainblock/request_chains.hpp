#pragma once

#include <optional>
#include <string>
#include <vector>

#include "chainblock/page_graph.hpp"

namespace chainblock {

struct ChainLink {
    NodeId script_node;
    std::optional<std::string> script_url;  // absent for inline scripts
    Inserter::Kind inserted_by = Inserter::Kind::unknown;  // how this script's element got in
};

// How one resource entered the page. links[0] is the script nearest to the
// resource; each following link inserted the previous link's element.
struct RequestChain {
    ResourceRequestRecord terminal;
    std::vector<ChainLink> links;
    std::vector<std::string> diagnostics;
};

// Walks insertions upward from the requesting element until a
// parser-inserted element is reached. Unknown inserters end the chain with a
// diagnostic; a repeated script throws GraphInvariantError.
RequestChain build_chain(const PageGraph& graph, const ResourceRequestRecord& target);

struct ChainOutcome {
    ResourceRequestRecord target;
    std::optional<RequestChain> chain;
    std::string error;  // set when chain is empty
};

// One outcome per target, in input order. Errors are captured per target.
std::vector<ChainOutcome> build_all_chains(const PageGraph& graph, const std::vector<ResourceRequestRecord>& targets);

// JSON-lines record: terminal URL, ordered script URLs, diagnostics.
std::string chain_to_json_line(const PageGraph& graph, const RequestChain& chain);

}  // namespace chainblock
