#include "chainblock/synth_corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <random>
#include <set>

#include "chainblock/error.hpp"
#include <nlohmann/json.hpp>

namespace chainblock {

namespace fs = std::filesystem;

namespace {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    bool chance(double p) { return uniform() < p; }
    std::size_t below(std::size_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % static_cast<std::uint64_t>(n);
        while (true) {
            std::uint64_t x = engine_();
            if (x < limit) return static_cast<std::size_t>(x % n);
        }
    }
    std::size_t weighted(const std::vector<double>& weights) {
        double total = 0;
        for (double w : weights) total += w;
        double x = uniform() * total;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (x < weights[i]) return i;
            x -= weights[i];
        }
        return weights.size() - 1;
    }

private:
    std::mt19937_64 engine_;
};

const std::vector<std::pair<int, int>>& ad_sizes() {
    static const std::vector<std::pair<int, int>> sizes{{300, 250}, {728, 90},  {160, 600}, {320, 50},
                                                        {300, 600}, {970, 250}, {336, 280}, {468, 60}};
    return sizes;
}

const std::vector<std::string>& ad_networks() {
    static const std::vector<std::string> nets{"adnet0.com",  "adnet1.com",       "adnet2.com",
                                               "adnet3.com",  "adnet4.net",       "promoserve.io",
                                               "banners0.co.uk", "banners1.co.uk"};
    return nets;
}

constexpr std::size_t kKnownNetworks = 3;
const char* kFrameworkUrl = "https://cdn.jsframework.org/fw-3.2.min.js";

std::string site_suffix(const std::string& region) {
    if (region.size() == 2 && std::all_of(region.begin(), region.end(), [](char c) { return c >= 'a' && c <= 'z'; })) {
        return region;
    }
    return "com";
}

std::string page_id_for(std::size_t index) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "page-%04zu", index + 1);
    return buf;
}

struct PageOutput {
    std::optional<SynthPage> page;
    std::vector<PlantedAd> ads;
    std::vector<BenignResource> benign;
    std::vector<PlantedScript> scripts;
};

class PageWriter {
public:
    PageWriter(std::string page_url, Rng& rng) : builder_(page_url), rng_(rng) {
        parser_ = builder_.add_node(NodeKind::parser, std::nullopt, std::nullopt, {}, "parser");
        document_ = element("#document", parser_, std::nullopt);
        html_ = element("html", parser_, document_);
        head_ = element("head", parser_, html_);
        body_ = element("body", parser_, html_);
        for (const char* name : {"header", "nav", "content", "sidebar", "footer"}) {
            regions_.push_back(element("div", parser_, body_, {{"id", name}}));
        }
    }

    NodeId content() const { return regions_[2]; }
    NodeId head() const { return head_; }
    const std::vector<NodeId>& regions() const { return regions_; }

    NodeId element(const std::string& tag, NodeId actor, std::optional<NodeId> parent, AttributeMap attrs = {},
                   NodeKind kind = NodeKind::html_element) {
        NodeId id = builder_.add_node(kind, tag, std::nullopt, std::move(attrs), key("n"));
        builder_.add_edge(EdgeKind::create_node, actor, id, tick(), {}, std::nullopt, key("e"));
        if (parent) builder_.add_edge(EdgeKind::insert_node, actor, id, tick(), {}, *parent, key("e"));
        if (tag == "div") {
            for (std::size_t i = rng_.below(3); i > 0; --i) {
                builder_.add_edge(EdgeKind::set_attribute, actor, id, tick(), {{"attr name", "class"}}, std::nullopt,
                                  key("e"));
            }
        }
        return id;
    }

    void request(NodeId requester, const std::string& url, ResourceType type) {
        NodeId res = builder_.add_node(NodeKind::resource, std::nullopt, url, {}, key("r"));
        std::string rid = std::to_string(++request_id_);
        builder_.add_edge(EdgeKind::request_start, requester, res, tick(),
                          {{"resource type", std::string(to_string(type))}, {"request id", rid}}, std::nullopt,
                          key("e"));
        builder_.add_edge(EdgeKind::request_complete, res, requester, tick(), {{"request id", rid}}, std::nullopt,
                          key("e"));
    }

    // Script element inserted by `actor` under `parent`, fetched and run.
    NodeId script(const std::string& url, NodeId actor, NodeId parent) {
        NodeId el = element("script", actor, parent, {{"src", url}});
        request(el, url, ResourceType::script);
        NodeId s = builder_.add_node(NodeKind::script, std::nullopt, url, {}, key("s"));
        builder_.add_edge(EdgeKind::execute, el, s, tick(), {}, std::nullopt, key("e"));
        return s;
    }

    NodeId media(ResourceType type, NodeId actor, NodeId parent, const std::string& url, int w, int h) {
        bool frame = type == ResourceType::subdocument;
        NodeId el = element(frame ? "iframe" : "img", actor, parent,
                            {{"src", url}, {"width", std::to_string(w)}, {"height", std::to_string(h)}},
                            frame ? NodeKind::frame_owner : NodeKind::html_element);
        request(el, url, type);
        // lazy-loading and layout tweaks
        for (std::size_t i = rng_.below(3); i > 0; --i) {
            builder_.add_edge(EdgeKind::set_attribute, actor, el, tick(),
                              {{"attr name", i == 1 ? "style" : "class"}}, std::nullopt, key("e"));
        }
        return el;
    }

    PageGraph finish() && { return std::move(builder_).finish(); }

private:
    std::string key(const char* prefix) { return prefix + std::to_string(counter_++); }
    double tick() {
        time_ += 1.0 + static_cast<double>(rng_.below(20));
        return time_;
    }

    GraphBuilder builder_;
    Rng& rng_;
    NodeId parser_;
    NodeId document_;
    NodeId html_;
    NodeId head_;
    NodeId body_;
    std::vector<NodeId> regions_;
    std::size_t counter_ = 0;
    std::size_t request_id_ = 0;
    double time_ = 0.0;
};

std::pair<int, int> benign_size(Rng& rng, const AdSizeTable& table) {
    while (true) {
        int w = 40 + static_cast<int>(rng.below(1100));
        int h = 40 + static_cast<int>(rng.below(800));
        if (!table.contains(static_cast<std::size_t>(w), static_cast<std::size_t>(h))) return {w, h};
    }
}

PageOutput build_page(const SynthConfig& config, std::size_t index, const std::string& region,
                      const std::string& page_id, std::size_t planted, Rng& rng) {
    const AdSizeTable& table = AdSizeTable::standard();
    const std::string site = "site" + std::to_string(index + 1) + "." + site_suffix(region);
    const std::string page_url = "https://www." + site + "/";
    const std::string tag = region + "/" + page_id;

    PageOutput out;
    PageWriter w(page_url, rng);
    NodeId parser{0};
    PerceptualMap perceptual;
    auto perceive = [&](const std::string& url, bool ad) {
        if (rng.chance(config.perceptual_missing_rate)) return;
        perceptual[url] = ad ? 0.65 + 0.34 * rng.uniform() : 0.35 * rng.uniform();
    };
    auto note_script = [&](const std::string& url, std::size_t count, bool own_unsafe, bool safe) {
        out.scripts.push_back({tag, url, count, own_unsafe, safe});
    };

    // Site furniture: a first-party script and a shared framework that
    // rewrites most of the page.
    std::string first_party_js = "https://www." + site + "/static/app.js";
    NodeId app = w.script(first_party_js, parser, w.head());
    w.element("div", app, w.content(), {{"class", "related"}});
    note_script(first_party_js, 1, false, true);

    NodeId fw = w.script(kFrameworkUrl, parser, w.head());
    for (NodeId r : {w.regions()[0], w.regions()[1], w.regions()[3], w.regions()[4]}) {
        w.element("div", fw, r, {{"class", "widget"}});
    }
    note_script(kFrameworkUrl, 4, true, false);
    std::string tile = "https://tiles.mapwidget.net/t/" + page_id + "/7.png";
    {
        auto [tw, th] = benign_size(rng, table);
        w.media(ResourceType::image, fw, w.regions()[3], tile, tw, th);
        out.benign.push_back({tag, tile, ResourceType::image});
        perceive(tile, false);
    }

    for (std::size_t j = 0; j < config.benign_images_per_page; ++j) {
        std::string host = rng.chance(0.5) ? site : "www." + site;
        std::string url = "https://" + host + "/img/photo-" + std::to_string(j) + ".jpg";
        if (rng.chance(0.2)) url += "?v=" + std::to_string(rng.below(50)) + ";w=" + std::to_string(rng.below(900));
        auto [bw, bh] = benign_size(rng, table);
        w.media(ResourceType::image, parser, w.content(), url, bw, bh);
        out.benign.push_back({tag, url, ResourceType::image});
        perceive(url, false);
    }
    if (index % 3 == 0) {
        std::string url = "https://cdn.knownad0.com/consent/banner-" + std::to_string(index % 5) + ".png";
        auto [bw, bh] = benign_size(rng, table);
        w.media(ResourceType::image, parser, w.regions()[4], url, bw, bh);
        out.benign.push_back({tag, url, ResourceType::image});
        perceive(url, false);
    }

    for (std::size_t j = 0; j < config.listed_ads_per_page; ++j) {
        std::string net = "knownad" + std::to_string(rng.below(kKnownNetworks)) + ".com";
        std::string url = "https://ads." + net + "/banner/" + page_id + "/" + std::to_string(j) + ".gif";
        auto [aw, ah] = ad_sizes()[rng.below(ad_sizes().size())];
        NodeId slot = w.element("div", parser, w.content(), {{"class", "ad-slot"}});
        w.media(ResourceType::image, parser, slot, url, aw, ah);
        out.ads.push_back({tag, url, ResourceType::image, true, {}});
        perceive(url, true);
    }

    for (std::size_t a = 0; a < planted; ++a) {
        const std::string& net = ad_networks()[rng.below(ad_networks().size())];
        std::size_t depth = rng.weighted(config.chain_depth_distribution);
        ResourceType type = rng.chance(config.iframe_rate) ? ResourceType::subdocument : ResourceType::image;
        NodeId slot = w.element("div", parser, w.regions()[rng.chance(0.5) ? 2 : 3], {{"class", "ad-slot"}});

        std::vector<bool> own_unsafe(depth);
        for (std::size_t k = 0; k < depth; ++k) own_unsafe[k] = rng.chance(config.unsafe_script_rate);

        // Scripts top-down: level 0 is parser-inserted, the last one inserts the ad.
        NodeId actor = parser;
        std::vector<PlantedScript> chain;
        for (std::size_t k = 0; k < depth; ++k) {
            std::string url = "https://cdn." + net + "/tag/" + page_id + "/" + std::to_string(a) + "/" +
                              std::to_string(k) + ".js";
            if (k == 0) url += "?site=" + std::to_string(index + 1);
            NodeId s = w.script(url, actor, slot);
            std::size_t count = 1;
            if (own_unsafe[k]) {
                for (NodeId r : {w.regions()[0], w.regions()[1], w.regions()[4]}) w.element("div", s, r);
                count = 4;
            } else if (rng.chance(0.3)) {
                w.element("div", s, w.regions()[4], {{"class", "beacon"}});
                count = 2;
            }
            bool safe = std::none_of(own_unsafe.begin() + static_cast<std::ptrdiff_t>(k), own_unsafe.end(),
                                     [](bool u) { return u; });
            chain.push_back({tag, url, count, own_unsafe[k], safe});
            actor = s;
        }
        auto [aw, ah] = ad_sizes()[rng.below(ad_sizes().size())];
        std::string url = type == ResourceType::subdocument
                              ? "https://ads." + net + "/frame/" + page_id + "/" + std::to_string(a) + ".html"
                              : "https://img." + net + "/creative/" + page_id + "/" + std::to_string(a) + ".gif";
        if (rng.chance(0.3)) {
            url += "?sz=" + std::to_string(aw) + "x" + std::to_string(ah) + ";ord=" + std::to_string(rng.below(100000));
        } else if (rng.chance(0.5)) {
            url += "?cb=" + std::to_string(rng.below(100000));
        }
        w.media(type, actor, slot, url, aw, ah);
        perceive(url, true);

        for (const auto& s : chain) out.scripts.push_back(s);
        std::reverse(chain.begin(), chain.end());
        out.ads.push_back({tag, url, type, false, std::move(chain)});
    }

    out.page.emplace(SynthPage{region, page_id, page_url, std::move(w).finish(), std::move(perceptual)});
    return out;
}

std::vector<std::size_t> spread_ads(const SynthConfig& config) {
    std::vector<std::size_t> per_page(config.pages, config.ads_per_page);
    if (config.total_ads != 0 && config.pages != 0) {
        for (std::size_t i = 0; i < config.pages; ++i) {
            per_page[i] = config.total_ads / config.pages + (i < config.total_ads % config.pages ? 1 : 0);
        }
    }
    return per_page;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

nlohmann::ordered_json script_json(const PlantedScript& s) {
    return {{"page", s.page},
            {"url", s.url},
            {"subtree_count", s.subtree_count},
            {"own_unsafe", s.own_unsafe},
            {"safe", s.safe}};
}

PlantedScript script_from_json(const nlohmann::json& j) {
    return {j.at("page").get<std::string>(), j.at("url").get<std::string>(),
            j.at("subtree_count").get<std::size_t>(), j.at("own_unsafe").get<bool>(), j.at("safe").get<bool>()};
}

}  // namespace

SynthConfig SynthConfig::from_json(std::string_view text) {
    SynthConfig c;
    try {
        auto j = nlohmann::json::parse(text);
        if (!j.is_object()) throw Error("synth config must be a JSON object");
        for (auto& [key, value] : j.items()) {
            if (key == "pages") c.pages = value.get<std::size_t>();
            else if (key == "ads_per_page") c.ads_per_page = value.get<std::size_t>();
            else if (key == "total_ads") c.total_ads = value.get<std::size_t>();
            else if (key == "chain_depth_distribution") c.chain_depth_distribution = value.get<std::vector<double>>();
            else if (key == "unsafe_script_rate") c.unsafe_script_rate = value.get<double>();
            else if (key == "seed") c.seed = value.get<std::uint64_t>();
            else if (key == "regions") c.regions = value.get<std::vector<std::string>>();
            else if (key == "listed_ads_per_page") c.listed_ads_per_page = value.get<std::size_t>();
            else if (key == "benign_images_per_page") c.benign_images_per_page = value.get<std::size_t>();
            else if (key == "iframe_rate") c.iframe_rate = value.get<double>();
            else if (key == "perceptual_missing_rate") c.perceptual_missing_rate = value.get<double>();
            else if (key == "training_pages") c.training_pages = value.get<std::size_t>();
            else throw Error("unknown synth config key '" + key + "'");
        }
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(std::string("bad synth config: ") + e.what());
    }
    if (c.regions.empty()) throw Error("synth config needs at least one region");
    if (c.chain_depth_distribution.empty()) throw Error("chain_depth_distribution must not be empty");
    double total = 0;
    for (double w : c.chain_depth_distribution) {
        if (w < 0) throw Error("chain_depth_distribution weights must be non-negative");
        total += w;
    }
    if (total <= 0) throw Error("chain_depth_distribution needs a positive weight");
    for (double r : {c.unsafe_script_rate, c.iframe_rate, c.perceptual_missing_rate}) {
        if (!(r >= 0.0 && r <= 1.0)) throw Error("rates must lie in [0,1]");
    }
    return c;
}

std::string GroundTruth::to_json() const {
    nlohmann::ordered_json j;
    nlohmann::ordered_json ads_json = nlohmann::ordered_json::array();
    for (const auto& ad : ads) {
        nlohmann::ordered_json chain = nlohmann::ordered_json::array();
        for (const auto& s : ad.chain) chain.push_back(script_json(s));
        ads_json.push_back({{"page", ad.page},
                            {"url", ad.url},
                            {"type", std::string(to_string(ad.type))},
                            {"listed", ad.listed},
                            {"chain", std::move(chain)}});
    }
    j["ads"] = std::move(ads_json);
    nlohmann::ordered_json benign_json = nlohmann::ordered_json::array();
    for (const auto& b : benign) {
        benign_json.push_back({{"page", b.page}, {"url", b.url}, {"type", std::string(to_string(b.type))}});
    }
    j["benign"] = std::move(benign_json);
    nlohmann::ordered_json scripts_json = nlohmann::ordered_json::array();
    for (const auto& s : scripts) scripts_json.push_back(script_json(s));
    j["scripts"] = std::move(scripts_json);
    return j.dump(2) + "\n";
}

GroundTruth GroundTruth::from_json(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        GroundTruth truth;
        for (const auto& a : j.at("ads")) {
            PlantedAd ad;
            ad.page = a.at("page").get<std::string>();
            ad.url = a.at("url").get<std::string>();
            ad.type = resource_type_from_string(a.at("type").get<std::string>());
            ad.listed = a.at("listed").get<bool>();
            for (const auto& s : a.at("chain")) ad.chain.push_back(script_from_json(s));
            truth.ads.push_back(std::move(ad));
        }
        for (const auto& b : j.at("benign")) {
            truth.benign.push_back({b.at("page").get<std::string>(), b.at("url").get<std::string>(),
                                    resource_type_from_string(b.at("type").get<std::string>())});
        }
        for (const auto& s : j.at("scripts")) truth.scripts.push_back(script_from_json(s));
        return truth;
    } catch (const std::exception& e) {
        throw Error(std::string("bad ground truth file: ") + e.what());
    }
}

SynthCorpus generate_synth_corpus(const SynthConfig& config) {
    SynthCorpus corpus;
    Rng rng(config.seed);
    std::vector<std::size_t> per_page = spread_ads(config);
    for (std::size_t i = 0; i < config.pages; ++i) {
        const std::string& region = config.regions[i % config.regions.size()];
        PageOutput page = build_page(config, i, region, page_id_for(i), per_page[i], rng);
        for (auto& a : page.ads) corpus.truth.ads.push_back(std::move(a));
        for (auto& b : page.benign) corpus.truth.benign.push_back(std::move(b));
        for (auto& s : page.scripts) corpus.truth.scripts.push_back(std::move(s));
        corpus.pages.push_back(std::move(*page.page));
    }

    // Training pages come from their own stream and never enter the crawl.
    Rng train_rng(config.seed ^ 0x5EEDF00Dull);
    const PublicSuffixTable& psl = PublicSuffixTable::bundled();
    const std::size_t train_ads = std::max<std::size_t>(1, config.ads_per_page);
    for (std::size_t i = 0; i < config.training_pages; ++i) {
        const std::string& region = config.regions[i % config.regions.size()];
        std::size_t index = config.pages + 1000 + i;
        PageOutput page = build_page(config, index, region, "train-" + std::to_string(i), train_ads, train_rng);
        std::set<std::string> ad_urls;
        for (const auto& a : page.ads) ad_urls.insert(a.url);
        const PageGraph& graph = page.page->graph;
        for (const auto& r : ad_candidates(graph)) {
            std::optional<double> p;
            if (auto it = page.page->perceptual.find(r.resource_url); it != page.page->perceptual.end()) p = it->second;
            LabeledExample ex;
            ex.features = extract_features(graph, r, p, psl);
            ex.is_ad = ad_urls.count(r.resource_url) > 0;
            ex.source_page = graph.page_url();
            corpus.training.push_back(std::move(ex));
        }
    }

    corpus.existing_list = "[Adblock Plus 2.0]\n! Title: synthetic existing list\n";
    for (std::size_t k = 0; k < kKnownNetworks; ++k) corpus.existing_list += "||knownad" + std::to_string(k) + ".com^\n";
    corpus.existing_list += "@@||knownad0.com/consent/\n";
    return corpus;
}

void write_synth_corpus(const SynthCorpus& corpus, const fs::path& out) {
    fs::create_directories(out / "lists");
    for (const auto& page : corpus.pages) {
        fs::path dir = out / page.region / page.page_id;
        fs::create_directories(dir);
        write_text(dir / "page.graphml", write_graphml(page.graph));
        nlohmann::ordered_json meta;
        meta["final_url"] = page.url;
        meta["region"] = page.region;
        meta["status"] = "ok";
        write_text(dir / "metadata.json", meta.dump(2) + "\n");
        // Sorted so the bytes do not depend on hash order.
        std::map<std::string, double> sorted(page.perceptual.begin(), page.perceptual.end());
        nlohmann::ordered_json perceptual = nlohmann::ordered_json::object();
        for (const auto& [url, p] : sorted) perceptual[url] = p;
        write_text(dir / "perceptual.json", perceptual.dump(2) + "\n");
    }
    write_text(out / "ground_truth.json", corpus.truth.to_json());
    std::string training;
    for (const auto& ex : corpus.training) training += example_to_json_line(ex) + "\n";
    write_text(out / "training.jsonl", training);
    write_text(out / "lists" / "existing.txt", corpus.existing_list);
}

}  // namespace chainblock
