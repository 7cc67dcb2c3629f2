#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "chainblock/abp_rules.hpp"
#include "chainblock/crawl.hpp"
#include "chainblock/features.hpp"
#include "chainblock/public_suffix.hpp"
#include "chainblock/random_forest.hpp"
#include "chainblock/report.hpp"
#include "chainblock/safe_blocking.hpp"

namespace chainblock {

struct PipelineConfig {
    std::optional<double> threshold;  // overrides the model's decision threshold
    SafetyConfig safety;
    std::size_t jobs = 1;
    std::uint64_t seed = 1;  // echoed into the report; the run itself draws no randomness
    ListHeader header;
    // Request types counted in the "current lists" column.
    std::set<ResourceType> list_tally_types{ResourceType::image, ResourceType::subdocument};
    const AdSizeTable* sizes = nullptr;  // null = standard table
};

struct GeneratedList {
    ListHeader header;
    std::vector<NetworkRule> rules;  // deduplicated, in first-seen order

    std::string text() const { return format_rule_list(header, rules); }
};

struct PipelineResult {
    GeneratedList list;
    RunReport report;
    std::vector<std::string> chains_jsonl;  // one line per built chain, page order
};

// `model` may be null, in which case only list hits seed the chains.
PipelineResult run_pipeline(const CrawlManifest& manifest, const RuleSet& lists, const ForestModel* model,
                            const PublicSuffixTable& psl, const PipelineConfig& config = {});

}  // namespace chainblock
