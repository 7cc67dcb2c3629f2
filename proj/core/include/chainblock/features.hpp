#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "chainblock/page_graph.hpp"
#include "chainblock/public_suffix.hpp"

namespace chainblock {

// Contextual and perceptual features of one image or iframe request.
struct FeatureVector {
    // content
    std::size_t height_px = 0;
    std::size_t width_px = 0;
    bool is_standard_ad_size = false;
    std::size_t url_length = 0;  // characters (code points) of the full URL
    bool is_subdomain = false;
    bool is_third_party = false;
    bool has_semicolon_in_query = false;
    ResourceType resource_type = ResourceType::image;  // image or subdocument
    double perceptual_ad_probability = 0.5;
    bool perceptual_missing = true;  // bookkeeping only, not a model input
    // structural
    double load_time_ms = 0.0;
    std::size_t node_in_degree = 0;
    std::size_t node_out_degree = 0;
    std::size_t node_total_degree = 0;
    bool modified_by_script = false;
    std::size_t parent_in_degree = 0;
    std::size_t parent_out_degree = 0;
    std::size_t parent_total_degree = 0;
    bool parent_modified_by_script = false;
    double avg_degree_connectivity = 0.0;
};

// Model input columns, in registry order. Stored models record these names
// and are matched by name, so new features can be appended without breaking
// existing model files.
const std::vector<std::string>& feature_names();
std::optional<double> feature_value(const FeatureVector& fv, std::string_view name);
// Throws ModelError for a name that is not in the registry.
std::vector<double> feature_row(const FeatureVector& fv, std::span<const std::string> names);
// Throws ModelError on unknown names; missing names keep their defaults.
FeatureVector feature_vector_from_values(const std::map<std::string, double>& values);
std::map<std::string, double> feature_values(const FeatureVector& fv);

// Standard ad unit sizes (width x height).
class AdSizeTable {
public:
    static const AdSizeTable& standard();
    // One WIDTHxHEIGHT per line, '#' comments.
    static AdSizeTable parse(std::string_view text);

    bool contains(std::size_t width, std::size_t height) const { return sizes_.count({width, height}) > 0; }
    std::size_t size() const { return sizes_.size(); }

private:
    std::set<std::pair<std::size_t, std::size_t>> sizes_;
};

// Throws Error when the requester node is missing or the page URL has no
// host, since every structural feature needs graph context.
FeatureVector extract_features(const PageGraph& graph, const ResourceRequestRecord& request,
                               std::optional<double> perceptual, const PublicSuffixTable& psl,
                               const AdSizeTable& sizes = AdSizeTable::standard());

struct LabeledExample {
    FeatureVector features;
    bool is_ad = false;
    std::string source_page;
};

// JSON lines: {"features": {name: value}, "label": "ad"|"not_ad", "source_page": url}
std::vector<LabeledExample> parse_examples_jsonl(std::string_view text);
std::string example_to_json_line(const LabeledExample& example);

}  // namespace chainblock
