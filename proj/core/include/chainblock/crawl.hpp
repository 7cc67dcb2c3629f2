#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "chainblock/ad_oracle.hpp"
#include "chainblock/page_graph.hpp"

namespace chainblock {

// One crawled page: <region>/<page-id>/{page.graphml, metadata.json, perceptual.json?}
struct CrawlPage {
    std::string region;
    std::string page_id;
    std::filesystem::path page_dir;
    std::string final_url;
    std::filesystem::path graphml_path;
    std::optional<std::filesystem::path> perceptual_path;
    std::map<std::string, std::string> metadata;  // scalar metadata.json members, JSON-encoded non-strings

    // Loaded and validated at ingest.
    std::shared_ptr<const PageGraph> graph;
    std::shared_ptr<const PerceptualMap> perceptual;
};

struct SkippedPage {
    std::string region;
    std::string page_id;
    std::filesystem::path path;
    std::string reason;
};

struct CrawlManifest {
    std::filesystem::path root;
    std::vector<CrawlPage> pages;  // sorted by (region, page id)
    std::vector<SkippedPage> skipped;

    std::vector<std::string> regions() const;
};

// Validates every page. Unreadable or invalid pages, and pages whose
// metadata marks the visit as failed, are listed in `skipped`. Throws
// CrawlError when the directory is missing or no page validates.
CrawlManifest ingest_crawl(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);

}  // namespace chainblock
