#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "chainblock/abp_rules.hpp"
#include "chainblock/crawl.hpp"
#include "chainblock/error.hpp"
#include "chainblock/pipeline.hpp"
#include "chainblock/random_forest.hpp"
#include "chainblock/report.hpp"
#include "chainblock/synth_corpus.hpp"

namespace fs = std::filesystem;
using namespace chainblock;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitSkips = 2;

void write_file(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

std::string today() {
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[16];
    std::strftime(buf, sizeof buf, "%Y-%m-%d", &tm);
    return buf;
}

struct GenerateArgs {
    std::string crawl_dir;
    std::vector<std::string> lists;
    std::string psl;
    std::string model;
    std::string out;
    std::string report;
    std::string report_format = "json";
    std::string chains;
    std::optional<double> threshold;
    std::size_t subtree_limit = 2;
    std::size_t jobs = 1;
    std::uint64_t seed = 1;
    std::string date;
    std::string crawl_id;
    std::vector<std::string> list_types{"image", "subdocument"};
    bool quiet = false;
};

int run_generate(const GenerateArgs& args) {
    CrawlManifest manifest = ingest_crawl(args.crawl_dir);
    for (const auto& skip : manifest.skipped) {
        std::cerr << "skip " << skip.region << "/" << skip.page_id << ": " << skip.reason << "\n";
    }

    RuleSetBuilder builder;
    for (const auto& path : args.lists) builder.add_list(fs::path(path).filename().string(), read_file(path));
    RuleSet lists = std::move(builder).build();
    if (!args.quiet && !lists.diagnostics().empty()) {
        std::cerr << lists.diagnostics().size() << " list line(s) skipped as unsupported\n";
    }

    PublicSuffixTable custom_psl;
    const PublicSuffixTable* psl = &PublicSuffixTable::bundled();
    if (!args.psl.empty()) {
        custom_psl = PublicSuffixTable::load_file(args.psl);
        psl = &custom_psl;
    }

    std::optional<ForestModel> model;
    if (!args.model.empty()) model = ForestModel::from_json(read_file(args.model));

    PipelineConfig config;
    config.threshold = args.threshold;
    config.safety.subtree_limit = args.subtree_limit;
    config.jobs = args.jobs;
    config.seed = args.seed;
    config.header.date = args.date.empty() ? today() : args.date;
    config.header.crawl_id = args.crawl_id.empty() ? fs::path(args.crawl_dir).filename().string() : args.crawl_id;
    config.list_tally_types.clear();
    for (const auto& name : args.list_types) config.list_tally_types.insert(resource_type_from_string(name));

    PipelineResult result = run_pipeline(manifest, lists, model ? &*model : nullptr, *psl, config);

    write_file(args.out, result.list.text());
    if (!args.report.empty()) {
        ReportFormat format = args.report_format == "table" ? ReportFormat::table : ReportFormat::json;
        write_file(args.report, emit_report(result.report, format));
    }
    if (!args.chains.empty()) {
        std::string text;
        for (const auto& line : result.chains_jsonl) text += line + "\n";
        write_file(args.chains, text);
    }
    if (!args.quiet) std::cout << emit_report(result.report, ReportFormat::table);
    return result.report.skipped_pages.empty() ? kExitOk : kExitSkips;
}

int run_validate(const std::string& crawl_dir) {
    CrawlManifest manifest = ingest_crawl(crawl_dir);
    for (const auto& page : manifest.pages) {
        std::cout << "ok    " << page.region << "/" << page.page_id << "  " << page.graph->nodes().size()
                  << " nodes, " << page.graph->edges().size() << " edges"
                  << (page.perceptual_path ? "" : ", no perceptual.json") << "\n";
    }
    for (const auto& skip : manifest.skipped) {
        std::cout << "skip  " << skip.region << "/" << skip.page_id << "  " << skip.reason << "\n";
    }
    std::cout << manifest.pages.size() << " valid, " << manifest.skipped.size() << " skipped\n";
    return manifest.skipped.empty() ? kExitOk : kExitSkips;
}

int run_train(const std::string& data, const std::string& out, const ForestConfig& config) {
    std::vector<LabeledExample> examples = parse_examples_jsonl(read_file(data));
    TrainResult result = train_forest(examples, config);
    for (const auto& w : result.warnings) std::cerr << "warning: " << w << "\n";
    write_file(out, result.model.to_json());
    std::printf("%zu examples, %zu trees, threshold %.4f, cv precision %.4f, cv recall %.4f\n", examples.size(),
                result.model.n_trees(), result.model.decision_threshold, result.cv.precision, result.cv.recall);
    return kExitOk;
}

int run_synth(const std::string& config_path, const std::string& out) {
    SynthConfig config = config_path.empty() ? SynthConfig{} : SynthConfig::from_json(read_file(config_path));
    SynthCorpus corpus = generate_synth_corpus(config);
    write_synth_corpus(corpus, out);
    std::size_t planted = 0;
    for (const auto& ad : corpus.truth.ads) planted += ad.listed ? 0 : 1;
    std::printf("%zu pages, %zu planted ads, %zu listed ads, %zu training examples -> %s\n", corpus.pages.size(),
                planted, corpus.truth.ads.size() - planted, corpus.training.size(), out.c_str());
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Generate ad-blocking filter rules from page execution graphs"};
    app.require_subcommand(1);

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Build rules and a report from a crawl directory");
    generate->add_option("--crawl-dir", gen.crawl_dir, "Crawl directory")->required();
    generate->add_option("--lists", gen.lists, "Existing filter lists")->delimiter(',');
    generate->add_option("--psl", gen.psl, "public_suffix_list.dat (default: bundled snapshot)");
    generate->add_option("--model", gen.model, "Trained classifier model");
    generate->add_option("--out", gen.out, "Output ABP list")->required();
    generate->add_option("--report", gen.report, "Output report");
    generate->add_option("--report-format", gen.report_format)->check(CLI::IsMember({"json", "table"}));
    generate->add_option("--chains", gen.chains, "Write request chains as JSON lines");
    generate->add_option("--threshold", gen.threshold, "Override the model decision threshold")
        ->check(CLI::Range(0.0, 1.01));
    generate->add_option("--subtree-limit", gen.subtree_limit, "Regions a script may touch and stay safe");
    generate->add_option("--jobs", gen.jobs, "Worker threads")->check(CLI::PositiveNumber);
    generate->add_option("--seed", gen.seed);
    generate->add_option("--date", gen.date, "Date written into the list header");
    generate->add_option("--crawl-id", gen.crawl_id, "Crawl identifier written into the list header");
    generate->add_option("--list-types", gen.list_types, "Request types counted as current-list ads")
        ->delimiter(',')
        ->check(CLI::IsMember({"image", "subdocument", "script", "other"}));
    generate->add_flag("-q,--quiet", gen.quiet);

    std::string validate_dir;
    auto* validate = app.add_subcommand("validate", "Check every page of a crawl directory");
    validate->add_option("--crawl-dir", validate_dir)->required();

    std::string train_data;
    std::string train_out;
    ForestConfig forest;
    auto* train = app.add_subcommand("train", "Train the random-forest classifier");
    train->add_option("--data", train_data, "JSON-lines labeled examples")->required();
    train->add_option("--out", train_out, "Model output file")->required();
    train->add_option("--trees", forest.n_trees)->check(CLI::PositiveNumber);
    train->add_option("--max-depth", forest.max_depth, "0 = unlimited");
    train->add_option("--seed", forest.seed);
    train->add_option("--folds", forest.folds)->check(CLI::Range(2, 100));
    train->add_option("--recall-floor", forest.recall_floor)->check(CLI::Range(0.0, 1.0));
    train->add_option("--exclude", forest.excluded_features, "Features left out of the model")->delimiter(',');

    std::string synth_config;
    std::string synth_out;
    auto* synth = app.add_subcommand("synth", "Write a synthetic crawl with planted ad chains");
    synth->add_option("--config", synth_config, "JSON config (default settings when omitted)");
    synth->add_option("--out", synth_out)->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*generate) return run_generate(gen);
        if (*validate) return run_validate(validate_dir);
        if (*train) return run_train(train_data, train_out, forest);
        if (*synth) return run_synth(synth_config, synth_out);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
