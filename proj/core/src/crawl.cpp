#include "chainblock/crawl.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "chainblock/error.hpp"
#include <nlohmann/json.hpp>

namespace chainblock {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw Error("cannot read " + path.string());
    return buf.str();
}

std::vector<std::string> CrawlManifest::regions() const {
    std::set<std::string> names;
    for (const auto& p : pages) names.insert(p.region);
    return {names.begin(), names.end()};
}

namespace {

std::vector<fs::path> sorted_subdirs(const fs::path& dir) {
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && entry.path().filename().string().front() != '.') out.push_back(entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

CrawlPage load_page(const std::string& region, const fs::path& dir) {
    CrawlPage page;
    page.region = region;
    page.page_id = dir.filename().string();
    page.page_dir = dir;

    fs::path meta_path = dir / "metadata.json";
    if (!fs::exists(meta_path)) throw Error("missing metadata.json");
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(read_file(meta_path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("metadata.json: ") + e.what());
    }
    if (!meta.is_object()) throw Error("metadata.json must be an object");
    for (auto& [k, v] : meta.items()) page.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();
    if (meta.contains("status") && meta["status"].is_string() && meta["status"] != "ok") {
        throw Error("visit failed: status " + meta["status"].get<std::string>());
    }

    page.graphml_path = dir / "page.graphml";
    if (!fs::exists(page.graphml_path)) throw Error("missing page.graphml");
    PageGraph graph = load_graphml(read_file(page.graphml_path));

    std::string final_url = meta.value("final_url", std::string{});
    if (final_url.empty()) final_url = graph.page_url();
    if (final_url.empty()) throw Error("no final_url in metadata.json and no page url in page.graphml");
    page.final_url = final_url;
    if (graph.page_url() != final_url) {
        graph = PageGraph(final_url, graph.nodes(), graph.edges());
    }
    page.graph = std::make_shared<const PageGraph>(std::move(graph));

    fs::path perceptual_path = dir / "perceptual.json";
    if (fs::exists(perceptual_path)) {
        try {
            page.perceptual = std::make_shared<const PerceptualMap>(parse_perceptual_json(read_file(perceptual_path)));
        } catch (const Error& e) {
            throw Error(std::string("perceptual.json: ") + e.what());
        }
        page.perceptual_path = perceptual_path;
    } else {
        page.perceptual = std::make_shared<const PerceptualMap>();
    }
    return page;
}

}  // namespace

CrawlManifest ingest_crawl(const fs::path& dir) {
    std::error_code ec;
    if (!fs::is_directory(dir, ec)) throw CrawlError("crawl directory " + dir.string() + " does not exist");
    CrawlManifest manifest;
    manifest.root = dir;
    for (const auto& region_dir : sorted_subdirs(dir)) {
        std::string region = region_dir.filename().string();
        for (const auto& page_dir : sorted_subdirs(region_dir)) {
            try {
                manifest.pages.push_back(load_page(region, page_dir));
            } catch (const std::exception& e) {
                manifest.skipped.push_back({region, page_dir.filename().string(), page_dir, e.what()});
            }
        }
    }
    if (manifest.pages.empty()) {
        std::string msg = "no valid pages under " + dir.string();
        if (!manifest.skipped.empty()) {
            msg += " (" + std::to_string(manifest.skipped.size()) + " skipped, first: " +
                   manifest.skipped.front().reason + ")";
        }
        throw CrawlError(msg);
    }
    return manifest;
}

}  // namespace chainblock
