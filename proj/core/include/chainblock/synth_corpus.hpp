#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "chainblock/ad_oracle.hpp"
#include "chainblock/features.hpp"
#include "chainblock/page_graph.hpp"

namespace chainblock {

struct SynthConfig {
    std::size_t pages = 10;
    // Un-listed ads to plant. total_ads, when non-zero, is spread over the
    // pages and takes precedence over ads_per_page.
    std::size_t ads_per_page = 2;
    std::size_t total_ads = 0;
    // Weight of each chain depth (number of scripts above the ad), index = depth.
    std::vector<double> chain_depth_distribution{0.2, 0.3, 0.3, 0.2};
    double unsafe_script_rate = 0.2;
    std::uint64_t seed = 1;
    std::vector<std::string> regions{"al", "hu", "lk"};
    std::size_t listed_ads_per_page = 1;  // ads the bundled existing list already blocks
    std::size_t benign_images_per_page = 4;
    double iframe_rate = 0.2;
    double perceptual_missing_rate = 0.05;
    std::size_t training_pages = 60;  // separate pages used only for training.jsonl

    // Unknown keys are rejected. Throws Error.
    static SynthConfig from_json(std::string_view text);
};

struct PlantedScript {
    std::string page;  // "<region>/<page-id>"
    std::string url;
    std::size_t subtree_count = 0;
    bool own_unsafe = false;  // exceeds the region limit by itself
    bool safe = false;        // neither it nor anything it inserts is unsafe
};

struct PlantedAd {
    std::string page;
    std::string url;
    ResourceType type = ResourceType::image;
    bool listed = false;  // blocked by the generated existing list
    std::vector<PlantedScript> chain;  // nearest to the ad first
};

struct BenignResource {
    std::string page;
    std::string url;
    ResourceType type = ResourceType::image;
};

struct GroundTruth {
    std::vector<PlantedAd> ads;
    std::vector<BenignResource> benign;
    std::vector<PlantedScript> scripts;  // every script with a URL, chains and benign

    std::string to_json() const;
    static GroundTruth from_json(std::string_view text);
};

struct SynthPage {
    std::string region;
    std::string page_id;
    std::string url;
    PageGraph graph;
    PerceptualMap perceptual;
};

struct SynthCorpus {
    std::vector<SynthPage> pages;
    GroundTruth truth;
    std::vector<LabeledExample> training;
    std::string existing_list;
};

// Deterministic in the config, seed included.
SynthCorpus generate_synth_corpus(const SynthConfig& config);

// Writes <out>/<region>/<page-id>/{page.graphml, metadata.json, perceptual.json},
// <out>/ground_truth.json, <out>/training.jsonl and <out>/lists/existing.txt.
void write_synth_corpus(const SynthCorpus& corpus, const std::filesystem::path& out);

}  // namespace chainblock
