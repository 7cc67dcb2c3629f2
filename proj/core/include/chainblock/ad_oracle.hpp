#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "chainblock/abp_rules.hpp"
#include "chainblock/features.hpp"
#include "chainblock/page_graph.hpp"
#include "chainblock/public_suffix.hpp"
#include "chainblock/random_forest.hpp"

namespace chainblock {

// Resource URL -> perceptual ad probability, from a page's perceptual.json.
using PerceptualMap = std::unordered_map<std::string, double>;

// Throws Error unless `text` is a JSON object of numbers in [0,1].
PerceptualMap parse_perceptual_json(std::string_view text);

// Image and iframe requests of the page, in request order.
std::vector<ResourceRequestRecord> ad_candidates(const PageGraph& graph);

// Request context as the page's top frame sees it. Throws UrlError for
// URLs without a host.
RequestContext request_context_for(const PageGraph& graph, const ResourceRequestRecord& request,
                                   const PublicSuffixTable& psl);

// Image/iframe requests the lists block. Excepted requests and URLs that
// cannot be matched (data:, blob:) are left out.
std::vector<ResourceRequestRecord> label_by_lists(const RuleSet& rules, const PageGraph& graph,
                                                  const PublicSuffixTable& psl);

struct ClassifiedAd {
    ResourceRequestRecord record;
    double probability = 0.0;
    bool perceptual_missing = true;
};

struct ClassifierOutcome {
    std::vector<ClassifiedAd> ads;
    std::vector<std::string> diagnostics;  // per-resource extraction failures
};

// Scores candidates that are not in `already`; keeps the ones predicted ad.
ClassifierOutcome classify_new_ads(const ForestModel& model, const PageGraph& graph,
                                   const std::vector<ResourceRequestRecord>& already,
                                   const PerceptualMap& perceptual, const PublicSuffixTable& psl,
                                   const AdSizeTable& sizes = AdSizeTable::standard());

}  // namespace chainblock
