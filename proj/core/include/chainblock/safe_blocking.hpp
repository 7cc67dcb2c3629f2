#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "chainblock/abp_rules.hpp"
#include "chainblock/page_graph.hpp"
#include "chainblock/request_chains.hpp"

namespace chainblock {

struct SafetyConfig {
    // A script touching more than this many document regions is unsafe.
    std::size_t subtree_limit = 2;
};

struct ScriptSafety {
    enum class Verdict : std::uint8_t { safe, unsafe };
    enum class Reason : std::uint8_t { default_safe, subtree_count_exceeded, inserts_unsafe_script };

    NodeId script_node;
    Verdict verdict = Verdict::safe;
    Reason reason = Reason::default_safe;
    std::size_t subtree_count = 0;

    bool safe() const { return verdict == Verdict::safe; }
};

std::string_view to_string(ScriptSafety::Reason reason);

// Breakage heuristics over one page graph, memoized per script. Not
// thread-safe; give each worker its own instance.
class SafetyClassifier {
public:
    explicit SafetyClassifier(const PageGraph& graph, SafetyConfig config = {}) : graph_(graph), config_(config) {}

    // Unsafe when the script itself exceeds the subtree limit, or when any
    // script it inserted (transitively) does.
    const ScriptSafety& classify(NodeId script);

    const PageGraph& graph() const { return graph_; }
    const SafetyConfig& config() const { return config_; }

private:
    std::size_t subtree_count(NodeId script);

    const PageGraph& graph_;
    SafetyConfig config_;
    std::unordered_map<std::uint32_t, std::size_t> counts_;
    std::unordered_map<std::uint32_t, ScriptSafety> verdicts_;
};

ScriptSafety classify_script(const PageGraph& graph, NodeId script, SafetyConfig config = {});

struct BlockPlan {
    std::string terminal_url;
    std::optional<std::string> highest_safe_script_url;
    std::optional<std::size_t> highest_safe_index;  // into chain.links
    RequestChain chain;
    std::vector<ScriptSafety> link_safety;  // verdicts for the links walked
    std::vector<NetworkRule> generated_rules;
    std::vector<std::string> diagnostics;
};

// Extends the blocking point up the chain while each link is safe and has
// a URL. The terminal resource is always part of the plan.
BlockPlan highest_blockable(SafetyClassifier& classifier, const RequestChain& chain);
BlockPlan highest_blockable(const PageGraph& graph, const RequestChain& chain, SafetyConfig config = {});

// Generates the terminal rule and, when present, the upstream script rule.
// URLs that cannot become rules are recorded in plan.diagnostics.
void attach_rules(BlockPlan& plan, const PublicSuffixTable& psl);

}  // namespace chainblock
