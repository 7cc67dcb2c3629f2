#include "chainblock/safe_blocking.hpp"

#include <set>

#include "chainblock/error.hpp"

namespace chainblock {

std::string_view to_string(ScriptSafety::Reason reason) {
    switch (reason) {
        case ScriptSafety::Reason::default_safe: return "default_safe";
        case ScriptSafety::Reason::subtree_count_exceeded: return "subtree_count_exceeded";
        case ScriptSafety::Reason::inserts_unsafe_script: return "inserts_unsafe_script";
    }
    return "default_safe";
}

std::size_t SafetyClassifier::subtree_count(NodeId script) {
    auto it = counts_.find(script.value);
    if (it != counts_.end()) return it->second;
    std::size_t count = modified_subtree_count(graph_, script);
    counts_.emplace(script.value, count);
    return count;
}

const ScriptSafety& SafetyClassifier::classify(NodeId script) {
    if (auto it = verdicts_.find(script.value); it != verdicts_.end()) return it->second;

    ScriptSafety result;
    result.script_node = script;
    result.subtree_count = subtree_count(script);
    if (result.subtree_count > config_.subtree_limit) {
        result.verdict = ScriptSafety::Verdict::unsafe;
        result.reason = ScriptSafety::Reason::subtree_count_exceeded;
    } else {
        // Everything this script brought in, directly or through the
        // scripts it inserted.
        std::set<std::uint32_t> visited{script.value};
        std::vector<NodeId> frontier = scripts_inserted_by(graph_, script);
        while (!frontier.empty()) {
            NodeId current = frontier.back();
            frontier.pop_back();
            if (!visited.insert(current.value).second) continue;
            if (subtree_count(current) > config_.subtree_limit) {
                result.verdict = ScriptSafety::Verdict::unsafe;
                result.reason = ScriptSafety::Reason::inserts_unsafe_script;
                break;
            }
            for (NodeId child : scripts_inserted_by(graph_, current)) frontier.push_back(child);
        }
    }
    return verdicts_.emplace(script.value, result).first->second;
}

ScriptSafety classify_script(const PageGraph& graph, NodeId script, SafetyConfig config) {
    SafetyClassifier classifier(graph, config);
    return classifier.classify(script);
}

BlockPlan highest_blockable(SafetyClassifier& classifier, const RequestChain& chain) {
    BlockPlan plan;
    plan.terminal_url = chain.terminal.resource_url;
    plan.chain = chain;
    for (std::size_t i = 0; i < chain.links.size(); ++i) {
        const ChainLink& link = chain.links[i];
        const ScriptSafety& safety = classifier.classify(link.script_node);
        plan.link_safety.push_back(safety);
        if (!safety.safe()) break;
        if (!link.script_url) {
            plan.diagnostics.push_back("chain stops at inline script '" +
                                       classifier.graph().node(link.script_node).key + "'");
            break;
        }
        plan.highest_safe_index = i;
        plan.highest_safe_script_url = link.script_url;
    }
    return plan;
}

BlockPlan highest_blockable(const PageGraph& graph, const RequestChain& chain, SafetyConfig config) {
    SafetyClassifier classifier(graph, config);
    return highest_blockable(classifier, chain);
}

void attach_rules(BlockPlan& plan, const PublicSuffixTable& psl) {
    plan.generated_rules.clear();
    auto add = [&](const std::string& url) {
        try {
            plan.generated_rules.push_back(generate_rule(url, psl));
        } catch (const RuleGenerationError& e) {
            plan.diagnostics.emplace_back(e.what());
        }
    };
    add(plan.terminal_url);
    if (plan.highest_safe_script_url) add(*plan.highest_safe_script_url);
}

}  // namespace chainblock
