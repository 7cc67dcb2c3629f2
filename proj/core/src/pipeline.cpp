#include "chainblock/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "chainblock/ad_oracle.hpp"
#include "chainblock/error.hpp"
#include "chainblock/request_chains.hpp"
#include "chainblock/url.hpp"

namespace chainblock {

namespace {

struct Candidate {
    NetworkRule rule;
    std::string url;
    std::string role;
};

struct PageResult {
    std::set<std::string> list_urls;
    std::set<std::string> classifier_urls;
    std::vector<Candidate> candidates;
    std::vector<RequestContext> excepted;  // observed requests the lists protect
    std::vector<RequestContext> unsafe_scripts;
    std::vector<std::string> chains_jsonl;
    std::vector<std::string> diagnostics;
    std::optional<std::string> failure;
};

class PageContext {
public:
    PageContext(const PageGraph& graph, const PublicSuffixTable& psl) : psl_(psl) {
        if (auto page = parse_url(graph.page_url()); page && !page->host.empty()) {
            host_ = page->host;
            site_ = psl.registrable_domain(host_).value_or(host_);
        }
    }

    std::optional<RequestContext> context(const std::string& url, ResourceType type) const {
        try {
            return make_request_context(url, site_, type, psl_, host_);
        } catch (const UrlError&) {
            return std::nullopt;
        }
    }

private:
    const PublicSuffixTable& psl_;
    std::string host_;
    std::string site_;
};

PageResult process_page(const CrawlPage& page, const RuleSet& lists, const ForestModel* model,
                        const PublicSuffixTable& psl, const PipelineConfig& config) {
    PageResult out;
    const PageGraph& graph = *page.graph;
    PageContext ctx(graph, psl);

    auto list_verdict = [&](const std::string& url, ResourceType type) -> Verdict::Kind {
        auto rc = ctx.context(url, type);
        if (!rc) return Verdict::Kind::unmatched;
        return lists.match(*rc).kind;
    };

    for (const auto& r : resource_requests(graph)) {
        auto rc = ctx.context(r.resource_url, r.resource_type);
        if (!rc) continue;
        Verdict v = lists.match(*rc);
        if (v.blocked() && config.list_tally_types.count(r.resource_type)) out.list_urls.insert(r.resource_url);
        if (v.excepted()) out.excepted.push_back(std::move(*rc));
    }

    std::vector<ResourceRequestRecord> listed = label_by_lists(lists, graph, psl);
    std::vector<ResourceRequestRecord> targets = listed;
    if (model) {
        const AdSizeTable& sizes = config.sizes ? *config.sizes : AdSizeTable::standard();
        ClassifierOutcome found = classify_new_ads(*model, graph, listed, *page.perceptual, psl, sizes);
        for (auto& d : found.diagnostics) out.diagnostics.push_back(std::move(d));
        for (auto& ad : found.ads) {
            out.classifier_urls.insert(ad.record.resource_url);
            targets.push_back(std::move(ad.record));
        }
    }
    std::sort(targets.begin(), targets.end(), [](const auto& a, const auto& b) {
        return std::tie(a.start_time, a.edge_index) < std::tie(b.start_time, b.edge_index);
    });
    // A URL the lists catch on some request is not a classifier addition.
    for (const auto& url : out.list_urls) out.classifier_urls.erase(url);

    SafetyClassifier safety(graph, config.safety);
    for (const GraphNode& node : graph.nodes()) {
        if (node.kind != NodeKind::script || !node.url || node.url->empty()) continue;
        if (safety.classify(node.id).safe()) continue;
        if (auto rc = ctx.context(*node.url, ResourceType::script)) out.unsafe_scripts.push_back(std::move(*rc));
    }

    auto add_candidate = [&](const std::string& url, ResourceType type, const char* role) {
        if (list_verdict(url, type) == Verdict::Kind::blocked) return;
        try {
            out.candidates.push_back({generate_rule(url, psl), url, role});
        } catch (const RuleGenerationError& e) {
            out.diagnostics.emplace_back(e.what());
        }
    };

    for (const ChainOutcome& outcome : build_all_chains(graph, targets)) {
        if (!outcome.chain) {
            out.diagnostics.push_back("chain for " + outcome.target.resource_url + ": " + outcome.error);
            // The terminal can still be blocked on its own.
            add_candidate(outcome.target.resource_url, outcome.target.resource_type, "terminal");
            continue;
        }
        const RequestChain& chain = *outcome.chain;
        out.chains_jsonl.push_back(chain_to_json_line(graph, chain));
        for (const auto& d : chain.diagnostics) out.diagnostics.push_back(chain.terminal.resource_url + ": " + d);
        BlockPlan plan = highest_blockable(safety, chain);
        for (const auto& d : plan.diagnostics) out.diagnostics.push_back(plan.terminal_url + ": " + d);
        add_candidate(plan.terminal_url, chain.terminal.resource_type, "terminal");
        if (plan.highest_safe_script_url) add_candidate(*plan.highest_safe_script_url, ResourceType::script, "script");
    }
    return out;
}

std::string join_types(const std::set<ResourceType>& types) {
    std::string out;
    for (ResourceType t : types) {
        if (!out.empty()) out += ",";
        out += std::string(to_string(t));
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}

}  // namespace

PipelineResult run_pipeline(const CrawlManifest& manifest, const RuleSet& lists, const ForestModel* model,
                            const PublicSuffixTable& psl, const PipelineConfig& config) {
    std::optional<ForestModel> adjusted;
    if (model && config.threshold) {
        adjusted = *model;
        adjusted->decision_threshold = *config.threshold;
        model = &*adjusted;
    }

    const std::size_t n = manifest.pages.size();
    std::vector<PageResult> results(n);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) {
            const CrawlPage& page = manifest.pages[i];
            try {
                if (!page.graph) throw Error("page graph was not loaded");
                results[i] = process_page(page, lists, model, psl, config);
            } catch (const std::exception& e) {
                results[i] = PageResult{};
                results[i].failure = e.what();
            }
        }
    };
    const std::size_t jobs = std::clamp<std::size_t>(config.jobs, 1, std::max<std::size_t>(1, n));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t t = 0; t < jobs; ++t) pool.emplace_back(worker);
    }

    // Merge in manifest order so the output does not depend on scheduling.
    std::vector<const RequestContext*> guards;
    for (const auto& r : results) {
        for (const auto& c : r.excepted) guards.push_back(&c);
        for (const auto& c : r.unsafe_scripts) guards.push_back(&c);
    }

    PipelineResult result;
    RunReport& report = result.report;
    result.list.header = config.header;

    struct RegionState {
        RegionCounts counts;
        std::set<std::string> list_urls;
        std::set<std::string> classifier_urls;
        std::set<std::string> new_urls;
        std::set<std::string> rules;
    };
    std::map<std::string, RegionState> regions;
    for (const auto& page : manifest.pages) regions[page.region].counts.region = page.region;
    for (const auto& skip : manifest.skipped) {
        auto& state = regions[skip.region];
        state.counts.region = skip.region;
        ++state.counts.pages_skipped;
        report.skipped_pages.push_back({skip.region, skip.page_id, skip.reason});
    }

    std::unordered_map<std::string, bool> accepted;  // canonical rule -> passes guards
    std::set<std::string> emitted;
    for (std::size_t i = 0; i < n; ++i) {
        const CrawlPage& page = manifest.pages[i];
        PageResult& r = results[i];
        RegionState& state = regions[page.region];
        if (r.failure) {
            ++state.counts.pages_skipped;
            report.skipped_pages.push_back({page.region, page.page_id, *r.failure});
            continue;
        }
        ++state.counts.pages;
        state.list_urls.insert(r.list_urls.begin(), r.list_urls.end());
        state.classifier_urls.insert(r.classifier_urls.begin(), r.classifier_urls.end());
        for (auto& line : r.chains_jsonl) result.chains_jsonl.push_back(std::move(line));
        for (auto& d : r.diagnostics) report.diagnostics.push_back({page.region, page.page_id, std::move(d)});

        for (const Candidate& c : r.candidates) {
            std::string text = c.rule.to_string();
            auto it = accepted.find(text);
            if (it == accepted.end()) {
                bool ok = true;
                std::string why;
                auto self = make_request_context(c.url, "", ResourceType::other, psl);
                if (!matches(c.rule, self)) {
                    ok = false;
                    why = "does not match its source URL";
                }
                for (const RequestContext* g : guards) {
                    if (!ok) break;
                    if (matches(c.rule, *g)) {
                        ok = false;
                        why = "would also block " + g->url;
                    }
                }
                if (!ok) {
                    ++report.rules_dropped_by_guards;
                    report.diagnostics.push_back({page.region, page.page_id, "dropped rule " + text + ": " + why});
                }
                it = accepted.emplace(text, ok).first;
            }
            if (!it->second) continue;
            state.new_urls.insert(c.url);
            state.rules.insert(text);
            if (emitted.insert(text).second) {
                result.list.rules.push_back(c.rule);
                report.provenance.push_back({text, page.region, page.page_id, c.url, c.role});
            }
        }
    }

    for (auto& [name, state] : regions) {
        for (const auto& url : state.list_urls) state.classifier_urls.erase(url);
        state.counts.ads_by_lists = state.list_urls.size();
        state.counts.ads_by_classifier_only = state.classifier_urls.size();
        state.counts.chain_new_urls = state.new_urls.size();
        state.counts.rules_emitted = state.rules.size();
        report.regions.push_back(state.counts);
    }
    sum_totals(report);
    report.totals.rules_emitted = result.list.rules.size();

    report.config["lists"] = std::to_string(lists.blocking_rules().size()) + " blocking, " +
                             std::to_string(lists.exception_rules().size()) + " exception rules";
    report.config["model"] = model ? std::to_string(model->n_trees()) + " trees" : "none";
    report.config["decision_threshold"] = model ? format_double(model->decision_threshold) : "n/a";
    report.config["subtree_limit"] = std::to_string(config.safety.subtree_limit);
    report.config["unsafe_propagation"] = "transitive";
    report.config["jobs"] = std::to_string(jobs);
    report.config["seed"] = std::to_string(config.seed);
    report.config["list_tally_types"] = join_types(config.list_tally_types);
    report.config["crawl_id"] = config.header.crawl_id;
    report.config["date"] = config.header.date;
    report.config["pages"] = std::to_string(manifest.pages.size());
    return result;
}

}  // namespace chainblock
