#include "chainblock/features.hpp"

#include <algorithm>
#include <charconv>
#include <functional>

#include "chainblock/error.hpp"
#include "chainblock/url.hpp"
#include <nlohmann/json.hpp>

namespace chainblock {

namespace {

struct FeatureDef {
    std::string name;
    std::function<double(const FeatureVector&)> get;
    std::function<void(FeatureVector&, double)> set;
};

std::size_t to_count(double v) { return v <= 0 ? 0 : static_cast<std::size_t>(v + 0.5); }

#define CB_COUNT(field) \
    FeatureDef { #field, [](const FeatureVector& f) { return static_cast<double>(f.field); }, \
                 [](FeatureVector& f, double v) { f.field = to_count(v); } }
#define CB_FLAG(field) \
    FeatureDef { #field, [](const FeatureVector& f) { return f.field ? 1.0 : 0.0; }, \
                 [](FeatureVector& f, double v) { f.field = v >= 0.5; } }
#define CB_REAL(field) \
    FeatureDef { #field, [](const FeatureVector& f) { return f.field; }, [](FeatureVector& f, double v) { f.field = v; } }

const std::vector<FeatureDef>& registry() {
    static const std::vector<FeatureDef> defs = {
        CB_COUNT(height_px),
        CB_COUNT(width_px),
        CB_FLAG(is_standard_ad_size),
        CB_COUNT(url_length),
        CB_FLAG(is_subdomain),
        CB_FLAG(is_third_party),
        CB_FLAG(has_semicolon_in_query),
        FeatureDef{"resource_type",
                   [](const FeatureVector& f) { return f.resource_type == ResourceType::subdocument ? 1.0 : 0.0; },
                   [](FeatureVector& f, double v) {
                       f.resource_type = v >= 0.5 ? ResourceType::subdocument : ResourceType::image;
                   }},
        FeatureDef{"perceptual_ad_probability", [](const FeatureVector& f) { return f.perceptual_ad_probability; },
                   [](FeatureVector& f, double v) {
                       f.perceptual_ad_probability = v;
                       f.perceptual_missing = false;
                   }},
        CB_REAL(load_time_ms),
        CB_COUNT(node_in_degree),
        CB_COUNT(node_out_degree),
        CB_COUNT(node_total_degree),
        CB_FLAG(modified_by_script),
        CB_COUNT(parent_in_degree),
        CB_COUNT(parent_out_degree),
        CB_COUNT(parent_total_degree),
        CB_FLAG(parent_modified_by_script),
        CB_REAL(avg_degree_connectivity),
    };
    return defs;
}

#undef CB_COUNT
#undef CB_FLAG
#undef CB_REAL

const FeatureDef* find_def(std::string_view name) {
    for (const auto& def : registry()) {
        if (def.name == name) return &def;
    }
    return nullptr;
}

std::size_t code_points(std::string_view s) {
    std::size_t n = 0;
    for (char c : s) {
        if ((static_cast<unsigned char>(c) & 0xC0) != 0x80) ++n;
    }
    return n;
}

std::size_t dimension(const GraphNode& node, const char* name) {
    auto it = node.attributes.find(name);
    if (it == node.attributes.end()) return 0;
    std::size_t value = 0;
    std::from_chars(it->second.data(), it->second.data() + it->second.size(), value);
    return value;
}

}  // namespace

const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto& def : registry()) out.push_back(def.name);
        return out;
    }();
    return names;
}

std::optional<double> feature_value(const FeatureVector& fv, std::string_view name) {
    const FeatureDef* def = find_def(name);
    if (!def) return std::nullopt;
    return def->get(fv);
}

std::vector<double> feature_row(const FeatureVector& fv, std::span<const std::string> names) {
    std::vector<double> row;
    row.reserve(names.size());
    for (const auto& name : names) {
        const FeatureDef* def = find_def(name);
        if (!def) throw ModelError("model expects unknown feature '" + name + "'");
        row.push_back(def->get(fv));
    }
    return row;
}

FeatureVector feature_vector_from_values(const std::map<std::string, double>& values) {
    FeatureVector fv;
    for (const auto& [name, value] : values) {
        const FeatureDef* def = find_def(name);
        if (!def) throw ModelError("unknown feature '" + name + "'");
        def->set(fv, value);
    }
    return fv;
}

std::map<std::string, double> feature_values(const FeatureVector& fv) {
    std::map<std::string, double> out;
    for (const auto& def : registry()) out[def.name] = def.get(fv);
    return out;
}

const AdSizeTable& AdSizeTable::standard() {
    static const AdSizeTable table = parse(
        "120x20 120x60 120x90 120x240 120x600 125x125 160x600 168x28 180x150 200x200 216x36 234x60 240x400 "
        "250x250 250x360 300x50 300x100 300x250 300x600 300x1050 320x50 320x100 320x480 336x280 468x60 "
        "480x320 580x400 728x90 750x100 750x200 750x300 768x1024 930x180 970x66 970x90 970x250 980x120 "
        "1024x768");
    return table;
}

AdSizeTable AdSizeTable::parse(std::string_view text) {
    AdSizeTable table;
    std::size_t pos = 0;
    while (pos < text.size()) {
        if (text[pos] == '#') {
            pos = text.find('\n', pos);
            if (pos == std::string_view::npos) break;
            continue;
        }
        std::size_t end = text.find_first_of(" \t\r\n", pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view item = text.substr(pos, end - pos);
        pos = end + 1;
        if (item.empty()) continue;
        std::size_t x = item.find('x');
        if (x == std::string_view::npos) throw Error("bad ad size '" + std::string(item) + "'");
        std::size_t w = 0;
        std::size_t h = 0;
        auto r1 = std::from_chars(item.data(), item.data() + x, w);
        auto r2 = std::from_chars(item.data() + x + 1, item.data() + item.size(), h);
        if (r1.ec != std::errc{} || r2.ec != std::errc{} || r2.ptr != item.data() + item.size()) {
            throw Error("bad ad size '" + std::string(item) + "'");
        }
        table.sizes_.insert({w, h});
    }
    return table;
}

FeatureVector extract_features(const PageGraph& graph, const ResourceRequestRecord& request,
                               std::optional<double> perceptual, const PublicSuffixTable& psl,
                               const AdSizeTable& sizes) {
    if (request.requester.value >= graph.nodes().size()) {
        throw Error("requester node for " + request.resource_url + " is not in the graph");
    }
    auto page = parse_url(graph.page_url());
    if (!page || page->host.empty()) throw Error("page URL '" + graph.page_url() + "' has no host");
    auto resource = parse_url(request.resource_url);
    if (!resource || resource->host.empty()) throw Error("resource URL '" + request.resource_url + "' has no host");

    const GraphNode& element = graph.node(request.requester);
    FeatureVector fv;
    fv.width_px = dimension(element, "width");
    fv.height_px = dimension(element, "height");
    if (fv.width_px == 0 && fv.height_px == 0) {
        const GraphNode& res = graph.node(request.resource);
        fv.width_px = dimension(res, "width");
        fv.height_px = dimension(res, "height");
    }
    fv.is_standard_ad_size = sizes.contains(fv.width_px, fv.height_px);
    fv.url_length = code_points(request.resource_url);

    std::string resource_site = psl.registrable_domain(resource->host).value_or(resource->host);
    std::string page_site = psl.registrable_domain(page->host).value_or(page->host);
    fv.is_third_party = resource_site != page_site;
    fv.is_subdomain = resource->host != resource_site;
    fv.has_semicolon_in_query = resource->query && resource->query->find(';') != std::string::npos;
    fv.resource_type = request.resource_type == ResourceType::subdocument ? ResourceType::subdocument
                                                                          : ResourceType::image;
    if (perceptual) {
        fv.perceptual_ad_probability = std::clamp(*perceptual, 0.0, 1.0);
        fv.perceptual_missing = false;
    }
    fv.load_time_ms = request.start_time;

    DegreeFeatures deg = node_degree_features(graph, request.requester);
    fv.node_in_degree = deg.in;
    fv.node_out_degree = deg.out;
    fv.node_total_degree = deg.total;
    fv.modified_by_script = deg.modified_by_script;
    fv.parent_in_degree = deg.parent_in;
    fv.parent_out_degree = deg.parent_out;
    fv.parent_total_degree = deg.parent_total;
    fv.parent_modified_by_script = deg.parent_modified_by_script;
    fv.avg_degree_connectivity = deg.avg_degree_connectivity;
    return fv;
}

std::vector<LabeledExample> parse_examples_jsonl(std::string_view text) {
    std::vector<LabeledExample> out;
    std::size_t pos = 0;
    std::size_t line_number = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_number;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            auto j = nlohmann::json::parse(line);
            LabeledExample ex;
            std::map<std::string, double> values;
            for (auto& [k, v] : j.at("features").items()) {
                values[k] = v.is_boolean() ? (v.get<bool>() ? 1.0 : 0.0) : v.get<double>();
            }
            ex.features = feature_vector_from_values(values);
            if (!values.count("perceptual_ad_probability")) ex.features.perceptual_missing = true;
            std::string label = j.at("label").get<std::string>();
            if (label != "ad" && label != "not_ad") throw Error("label must be \"ad\" or \"not_ad\"");
            ex.is_ad = label == "ad";
            ex.source_page = j.value("source_page", "");
            out.push_back(std::move(ex));
        } catch (const std::exception& e) {
            throw TrainingError("training data line " + std::to_string(line_number) + ": " + e.what());
        }
    }
    return out;
}

std::string example_to_json_line(const LabeledExample& example) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json features;
    for (const auto& name : feature_names()) features[name] = *feature_value(example.features, name);
    j["features"] = std::move(features);
    j["label"] = example.is_ad ? "ad" : "not_ad";
    j["source_page"] = example.source_page;
    return j.dump();
}

}  // namespace chainblock
