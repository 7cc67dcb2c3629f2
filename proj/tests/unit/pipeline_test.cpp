#include <gtest/gtest.h>

#include <fstream>
#include <nlohmann/json.hpp>

#include "chainblock/crawl.hpp"
#include "chainblock/error.hpp"
#include "chainblock/pipeline.hpp"
#include "chainblock/report.hpp"
#include "chainblock/synth_corpus.hpp"
#include "synth_eval.hpp"

using namespace chainblock;

namespace {

const std::filesystem::path kFixtures = CHAINBLOCK_FIXTURES;

ForestModel stump() { return ForestModel::from_json(read_file(kFixtures / "ad_chain" / "stump_model.json")); }

PipelineResult run_ad_chain(const RuleSet& lists, const ForestModel* model, std::size_t jobs = 1) {
    PipelineConfig pc;
    pc.jobs = jobs;
    return run_pipeline(ingest_crawl(kFixtures / "ad_chain" / "crawl"), lists, model, PublicSuffixTable::bundled(),
                        pc);
}

std::vector<std::string> rule_texts(const GeneratedList& list) {
    std::vector<std::string> out;
    for (const auto& r : list.rules) out.push_back(r.to_string());
    return out;
}

}  // namespace

TEST(Crawl, IngestsValidPages) {
    CrawlManifest m = ingest_crawl(kFixtures / "ad_chain" / "crawl");
    ASSERT_EQ(m.pages.size(), 1u);
    EXPECT_EQ(m.pages[0].region, "al");
    EXPECT_EQ(m.pages[0].page_id, "page-0001");
    EXPECT_EQ(m.pages[0].final_url, "https://news.example.al/");
    ASSERT_TRUE(m.pages[0].perceptual);
    EXPECT_EQ(m.pages[0].perceptual->size(), 2u);
    EXPECT_TRUE(m.skipped.empty());
}

TEST(Crawl, CorruptPageIsSkippedNotFatal) {
    CrawlManifest m = ingest_crawl(kFixtures / "crawl_mixed");
    EXPECT_EQ(m.pages.size(), 2u);
    ASSERT_EQ(m.skipped.size(), 1u);
    EXPECT_EQ(m.skipped[0].page_id, "page-0003");
    EXPECT_FALSE(m.skipped[0].reason.empty());
    EXPECT_EQ(m.regions(), std::vector<std::string>{"hu"});
}

TEST(Crawl, EmptyOrMissingDirectoryIsFatal) {
    synth_eval::TempDir empty("empty");
    EXPECT_THROW(ingest_crawl(empty.path()), CrawlError);
    EXPECT_THROW(ingest_crawl(empty.path() / "nope"), CrawlError);
}

TEST(Crawl, FailedVisitIsSkipped) {
    synth_eval::TempDir dir("failed");
    auto page = dir.path() / "al" / "page-0001";
    std::filesystem::create_directories(page);
    std::filesystem::copy_file(kFixtures / "ad_chain" / "crawl" / "al" / "page-0001" / "page.graphml",
                               page / "page.graphml");
    std::ofstream(page / "metadata.json") << R"({"status": "timeout"})";
    auto good = dir.path() / "al" / "page-0002";
    std::filesystem::create_directories(good);
    std::filesystem::copy_file(page / "page.graphml", good / "page.graphml");
    std::ofstream(good / "metadata.json") << R"({"status": "ok"})";
    CrawlManifest m = ingest_crawl(dir.path());
    EXPECT_EQ(m.pages.size(), 1u);
    ASSERT_EQ(m.skipped.size(), 1u);
    EXPECT_EQ(m.skipped[0].page_id, "page-0001");
}

TEST(Pipeline, AdChainEmitsTerminalAndLoaderOnly) {
    RuleSet lists = parse_list(read_file(kFixtures / "ad_chain" / "lists.txt"));
    ForestModel model = stump();
    PipelineResult r = run_ad_chain(lists, &model);
    EXPECT_EQ(rule_texts(r.list), (std::vector<std::string>{"||adnet.com/creative/123.gif", "||adnet.com/js/show.js"}));
    for (const auto& rule : rule_texts(r.list)) EXPECT_EQ(rule.find("adlib"), std::string::npos);

    const RegionCounts& al = r.report.regions.at(0);
    EXPECT_EQ(al.region, "al");
    EXPECT_EQ(al.ads_by_lists, 0u);
    EXPECT_EQ(al.ads_by_classifier_only, 1u);
    EXPECT_EQ(al.chain_new_urls, 2u);
    EXPECT_EQ(al.rules_emitted, 2u);
    EXPECT_FALSE(al.delta_percent().has_value());
    EXPECT_EQ(r.report.totals.rules_emitted, 2u);
    ASSERT_EQ(r.report.provenance.size(), 2u);
    EXPECT_EQ(r.report.provenance[0].role, "terminal");
    EXPECT_EQ(r.report.provenance[1].role, "script");

    ASSERT_EQ(r.chains_jsonl.size(), 1u);
    auto chain = nlohmann::json::parse(r.chains_jsonl[0]);
    EXPECT_EQ(chain["scripts"].size(), 2u);
    EXPECT_NE(r.list.text().find("[Adblock Plus 2.0]"), std::string::npos);
}

TEST(Pipeline, ListHitSeedsChainWithoutModel) {
    PipelineResult r = run_ad_chain(parse_list("||img.adnet.com^"), nullptr);
    // the terminal is already blocked, so only the loader is new
    EXPECT_EQ(rule_texts(r.list), std::vector<std::string>{"||adnet.com/js/show.js"});
    EXPECT_EQ(r.report.totals.ads_by_lists, 1u);
    EXPECT_EQ(r.report.totals.chain_new_urls, 1u);
    EXPECT_EQ(format_delta(r.report.totals.delta_percent()), "100.0%");
}

TEST(Pipeline, NothingToDo) {
    PipelineResult r = run_ad_chain(parse_list(""), nullptr);
    EXPECT_TRUE(r.list.rules.empty());
    EXPECT_EQ(r.report.totals.chain_new_urls, 0u);
    EXPECT_EQ(format_delta(r.report.totals.delta_percent()), "—");
    EXPECT_NE(r.list.text().find("[Adblock Plus 2.0]"), std::string::npos);
}

TEST(Pipeline, GuardDropsRulesHittingExceptedTraffic) {
    // an exception for the loader's path means a generated script rule would
    // fight the existing lists
    ForestModel model = stump();
    PipelineResult r = run_ad_chain(parse_list("@@||ads.adnet.com/js/$script"), &model);
    EXPECT_EQ(rule_texts(r.list), std::vector<std::string>{"||adnet.com/creative/123.gif"});
    EXPECT_EQ(r.report.rules_dropped_by_guards, 1u);
}

TEST(Report, DeltaFormatting) {
    RegionCounts c;
    c.ads_by_lists = 6541;
    c.chain_new_urls = 1771;
    EXPECT_NEAR(*c.delta_percent(), 27.075, 0.001);
    EXPECT_EQ(format_delta(c.delta_percent()), "27.1%");
    c.chain_new_urls = 6541 * 2;
    EXPECT_EQ(format_delta(c.delta_percent()), "200.0%");
    EXPECT_EQ(format_delta(std::nullopt), "—");
    EXPECT_EQ(format_delta(0.0), "0.0%");
}

TEST(Report, JsonRoundTripAndTable) {
    RuleSet lists = parse_list("||img.adnet.com^");
    ForestModel model = stump();
    PipelineResult r = run_ad_chain(lists, &model);
    std::string json = emit_report(r.report, ReportFormat::json);
    RunReport back = report_from_json(json);
    EXPECT_EQ(emit_report(back, ReportFormat::json), json);
    std::string table = emit_report(r.report, ReportFormat::table);
    EXPECT_NE(table.find("Region"), std::string::npos);
    EXPECT_NE(table.find("Total"), std::string::npos);
    EXPECT_THROW(report_from_json(R"({"schema":"x"})"), Error);
}

TEST(Synth, ByteDeterministic) {
    SynthConfig c;
    c.pages = 6;
    c.training_pages = 4;
    SynthCorpus a = generate_synth_corpus(c);
    SynthCorpus b = generate_synth_corpus(c);
    EXPECT_EQ(a.truth.to_json(), b.truth.to_json());
    ASSERT_EQ(a.pages.size(), b.pages.size());
    for (std::size_t i = 0; i < a.pages.size(); ++i) {
        EXPECT_EQ(write_graphml(a.pages[i].graph), write_graphml(b.pages[i].graph));
    }
    c.seed = 2;
    EXPECT_NE(generate_synth_corpus(c).truth.to_json(), a.truth.to_json());
    EXPECT_EQ(GroundTruth::from_json(a.truth.to_json()).to_json(), a.truth.to_json());
}

TEST(Synth, ConfigRejectsUnknownKeys) {
    EXPECT_EQ(SynthConfig::from_json(R"({"pages": 3})").pages, 3u);
    EXPECT_THROW(SynthConfig::from_json(R"({"pagez": 3})"), Error);
}

TEST(Synth, DepthZeroGivesTerminalOnlyRules) {
    SynthConfig c;
    c.pages = 8;
    c.chain_depth_distribution = {1.0};
    c.training_pages = 20;
    synth_eval::Run run = synth_eval::run(c, 2, 15);
    for (const auto& ad : run.corpus.truth.ads) EXPECT_TRUE(ad.chain.empty());
    for (const auto& p : run.result.report.provenance) {
        if (p.role == "script") EXPECT_EQ(p.url.find("/tag/"), std::string::npos) << p.url;
    }
    EXPECT_EQ(run.score.covered, run.score.planted);
}

TEST(Synth, AllUnsafeScriptsAreNeverTargeted) {
    SynthConfig c;
    c.pages = 8;
    c.unsafe_script_rate = 1.0;
    c.training_pages = 20;
    synth_eval::Run run = synth_eval::run(c, 2, 15);
    EXPECT_EQ(run.score.unsafe_blocked, 0u);
    EXPECT_EQ(run.score.safe_chain_scripts_blocked, 0u);
    for (const auto& p : run.result.report.provenance) {
        if (p.role == "script") EXPECT_EQ(p.url.find("/tag/"), std::string::npos) << p.url;
    }
    EXPECT_EQ(run.score.covered, run.score.planted);
}

TEST(Synth, JobsDoNotChangeOutput) {
    SynthConfig c;
    c.pages = 12;
    c.training_pages = 20;
    synth_eval::Run one = synth_eval::run(c, 1, 15);
    synth_eval::Run four = synth_eval::run(c, 4, 15);
    EXPECT_EQ(one.result.list.text(), four.result.list.text());
    RunReport a = one.result.report;
    RunReport b = four.result.report;
    a.config.erase("jobs");
    b.config.erase("jobs");
    EXPECT_EQ(emit_report(a, ReportFormat::json), emit_report(b, ReportFormat::json));
    EXPECT_EQ(one.result.chains_jsonl, four.result.chains_jsonl);
}

TEST(Synth, EndToEndScoresClean) {
    SynthConfig c;
    c.pages = 20;
    c.total_ads = 40;
    c.training_pages = 30;
    synth_eval::Run run = synth_eval::run(c, 2, 20);
    EXPECT_EQ(run.score.planted, 40u);
    EXPECT_EQ(run.score.covered, run.score.planted);
    EXPECT_EQ(run.score.benign_blocked, 0u);
    EXPECT_EQ(run.score.unsafe_blocked, 0u);
    EXPECT_GT(run.score.safe_chain_scripts_blocked, 0u);
    for (const auto& m : run.score.misses) ADD_FAILURE() << m;
}
