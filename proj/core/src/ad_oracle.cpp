#include "chainblock/ad_oracle.hpp"

#include <cmath>
#include <unordered_set>

#include "chainblock/error.hpp"
#include "chainblock/url.hpp"
#include <nlohmann/json.hpp>

namespace chainblock {

PerceptualMap parse_perceptual_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        throw Error(std::string("perceptual sidecar is not JSON: ") + e.what());
    }
    if (!j.is_object()) throw Error("perceptual sidecar must be a JSON object");
    PerceptualMap out;
    for (auto& [url, value] : j.items()) {
        if (!value.is_number()) throw Error("perceptual probability for '" + url + "' is not a number");
        double p = value.get<double>();
        if (!(p >= 0.0 && p <= 1.0)) throw Error("perceptual probability for '" + url + "' is outside [0,1]");
        out.emplace(url, p);
    }
    return out;
}

std::vector<ResourceRequestRecord> ad_candidates(const PageGraph& graph) {
    std::vector<ResourceRequestRecord> out;
    for (auto& r : resource_requests(graph)) {
        if (r.resource_type == ResourceType::image || r.resource_type == ResourceType::subdocument) {
            out.push_back(std::move(r));
        }
    }
    return out;
}

RequestContext request_context_for(const PageGraph& graph, const ResourceRequestRecord& request,
                                   const PublicSuffixTable& psl) {
    std::string page_host;
    std::string page_site;
    if (auto page = parse_url(graph.page_url()); page && !page->host.empty()) {
        page_host = page->host;
        page_site = psl.registrable_domain(page_host).value_or(page_host);
    }
    return make_request_context(request.resource_url, page_site, request.resource_type, psl, page_host);
}

std::vector<ResourceRequestRecord> label_by_lists(const RuleSet& rules, const PageGraph& graph,
                                                  const PublicSuffixTable& psl) {
    std::vector<ResourceRequestRecord> out;
    if (rules.empty()) return out;
    for (auto& r : ad_candidates(graph)) {
        try {
            if (rules.match(request_context_for(graph, r, psl)).blocked()) out.push_back(std::move(r));
        } catch (const UrlError&) {
            // Not addressable by a network rule.
        }
    }
    return out;
}

ClassifierOutcome classify_new_ads(const ForestModel& model, const PageGraph& graph,
                                   const std::vector<ResourceRequestRecord>& already,
                                   const PerceptualMap& perceptual, const PublicSuffixTable& psl,
                                   const AdSizeTable& sizes) {
    std::unordered_set<std::uint32_t> skip;
    for (const auto& r : already) skip.insert(r.edge_index);
    ClassifierOutcome out;
    for (auto& r : ad_candidates(graph)) {
        if (skip.count(r.edge_index)) continue;
        std::optional<double> p;
        if (auto it = perceptual.find(r.resource_url); it != perceptual.end()) p = it->second;
        try {
            FeatureVector fv = extract_features(graph, r, p, psl, sizes);
            Prediction pred = predict(model, fv);
            if (pred.is_ad) out.ads.push_back({std::move(r), pred.probability, fv.perceptual_missing});
        } catch (const ModelError&) {
            throw;
        } catch (const std::exception& e) {
            out.diagnostics.push_back("features for " + r.resource_url + ": " + e.what());
        }
    }
    return out;
}

}  // namespace chainblock
