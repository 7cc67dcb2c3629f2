#include "generators.hpp"

namespace gen {

using namespace chainblock;

namespace {

const std::vector<std::string> kHosts{"ads.example.com", "example.com",   "cdn.example.com", "tracker.net",
                                      "a.b.tracker.net", "shop.co.uk",    "img.shop.co.uk",  "news.al",
                                      "www.news.al",     "gov.com.al",    "adexample.com",   "static.adnet.org"};
const std::vector<std::string> kPaths{"/ad.html", "/ads/banner.gif", "/img/ad_300.png", "/js/show.js",
                                      "/a/b/c",   "/banner",          "/x-ad.php",       "/ad%20x.gif",
                                      "/Ads/Top.GIF", "/path_to/ad.js", "/"};
const std::vector<std::string> kQueries{"", "?id=3", "?a=1;b=2", "?ad=1&x=y", "?q=ads.example.com"};
const std::vector<std::string> kLiterals{"ad",  "ads", "banner", "example", "com", "/", ".", "js",
                                         "img", "x",   "_",      "-",       "%20", "tracker", "shop", "Ad"};

}  // namespace

std::string random_url(Rng& rng) {
    std::string url = rng.chance(0.8) ? "https://" : "http://";
    url += rng.pick(kHosts);
    if (rng.chance(0.05)) url += ":8080";
    url += rng.pick(kPaths);
    url += rng.pick(kQueries);
    return url;
}

RulePair random_rule_pair(Rng& rng) {
    RulePair out;
    out.request.url = random_url(rng);
    out.request.page_host = rng.pick(kHosts);
    out.request.type = static_cast<ResourceType>(rng.below(4));

    std::string rule;
    if (rng.chance(0.25)) rule += "@@";
    std::size_t anchor = rng.below(3);
    if (anchor == 1) rule += "||";
    if (anchor == 2) rule += "|";

    // Half the time start from a slice of the request URL so matches occur.
    if (rng.chance(0.5)) {
        std::string src = out.request.url;
        if (anchor == 1) {
            src = src.substr(src.find("://") + 3);
            // Start at a label boundary of the host.
            std::size_t host_end = src.find_first_of("/:?");
            std::vector<std::size_t> starts{0};
            for (std::size_t i = 0; i < host_end; ++i) {
                if (src[i] == '.') starts.push_back(i + 1);
            }
            src = src.substr(starts[rng.below(starts.size())]);
        } else if (anchor == 0) {
            src = src.substr(rng.below(src.size()));
        }
        std::size_t len = 1 + rng.below(std::min<std::size_t>(src.size(), 24));
        std::string slice = src.substr(0, len);
        for (char& c : slice) {
            if (rng.chance(0.08)) c = '*';
            else if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-' && c != '.' && c != '%' &&
                     rng.chance(0.5)) {
                c = '^';
            }
        }
        // Option separator and anchor characters would change the rule's meaning.
        for (char& c : slice) {
            if (c == '$' || c == '|') c = '*';
        }
        rule += slice;
    } else {
        std::size_t parts = 1 + rng.below(4);
        for (std::size_t i = 0; i < parts; ++i) {
            std::size_t k = rng.below(10);
            if (k == 0) rule += "*";
            else if (k == 1) rule += "^";
            else rule += rng.pick(kLiterals);
        }
        if (anchor == 1 && !std::isalnum(static_cast<unsigned char>(rule.back())) && rule.size() == 2) rule += "ad";
    }
    if (rule.size() >= 2 && rule.compare(rule.size() - 2, 2, "||") == 0) rule += "ads";
    if (rule == "@@" || rule.empty() || rule == "|" || rule == "@@|") rule += "ad";
    {
        // "/.../" would read as a regular-expression rule
        std::string_view body(rule);
        if (body.substr(0, 2) == "@@") body.remove_prefix(2);
        if (body.size() >= 2 && body.front() == '/' && body.back() == '/') rule += "*";
    }
    if (rng.chance(0.15)) rule += "|";

    std::vector<std::string> opts;
    if (rng.chance(0.2)) opts.push_back(rng.pick(std::vector<std::string>{"third-party", "~third-party", "3p", "1p"}));
    if (rng.chance(0.2)) {
        opts.push_back(rng.pick(std::vector<std::string>{"image", "script", "subdocument", "~image", "~script",
                                                         "other", "image,subdocument"}));
    }
    if (rng.chance(0.15)) {
        opts.push_back(rng.pick(std::vector<std::string>{"domain=example.com", "domain=~ads.example.com",
                                                         "domain=example.com|~cdn.example.com", "domain=news.al",
                                                         "domain=~shop.co.uk|tracker.net"}));
    }
    if (rng.chance(0.1)) opts.push_back("match-case");
    if (!opts.empty()) {
        rule += "$";
        for (std::size_t i = 0; i < opts.size(); ++i) rule += (i ? "," : "") + opts[i];
    }
    out.rule = rule;
    return out;
}

PageGraph random_graph(Rng& rng, std::size_t max_nodes) {
    GraphBuilder b("https://www.example.com/");
    double t = 0;
    auto tick = [&] { return t += 1.0; };
    NodeId parser = b.add_node(NodeKind::parser, std::nullopt, std::nullopt, {}, "parser");
    std::vector<NodeId> elements;
    std::vector<NodeId> scripts;
    std::vector<NodeId> orphans;  // elements without a create edge
    std::size_t count = 1;

    NodeId root = b.add_node(NodeKind::html_element, "html", std::nullopt, {}, "root");
    ++count;
    b.add_edge(EdgeKind::create_node, parser, root, tick());
    elements.push_back(root);

    const std::size_t target = 4 + rng.below(max_nodes - 4);
    while (count + 3 <= target) {
        std::size_t action = rng.below(10);
        auto actor = [&]() -> NodeId {
            if (scripts.empty() || rng.chance(0.3)) return parser;
            return rng.pick(scripts);
        };
        if (action < 3) {
            NodeId a = actor();
            NodeId el = b.add_node(NodeKind::html_element, "div", std::nullopt, {});
            ++count;
            b.add_edge(EdgeKind::create_node, a, el, tick());
            if (rng.chance(0.9)) b.add_edge(EdgeKind::insert_node, a, el, tick(), {}, rng.pick(elements));
            elements.push_back(el);
        } else if (action < 6) {
            NodeId a = actor();
            NodeId el = b.add_node(NodeKind::html_element, "script", std::nullopt, {});
            std::optional<std::string> url;
            if (rng.chance(0.8)) url = "https://cdn" + std::to_string(rng.below(5)) + ".example.net/s.js";
            NodeId s = b.add_node(NodeKind::script, std::nullopt, url, {});
            count += 2;
            bool orphan = rng.chance(0.08);
            if (!orphan) b.add_edge(EdgeKind::create_node, a, el, tick());
            if (!orphan || rng.chance(0.5)) b.add_edge(EdgeKind::insert_node, a, el, tick(), {}, rng.pick(elements));
            if (orphan) orphans.push_back(el);
            if (rng.chance(0.95)) b.add_edge(EdgeKind::execute, el, s, tick());
            elements.push_back(el);
            scripts.push_back(s);
        } else if (action < 8) {
            NodeId a = actor();
            NodeId el = b.add_node(NodeKind::html_element, "img", std::nullopt, {});
            NodeId res = b.add_node(NodeKind::resource, std::nullopt,
                                    "https://img.example.org/" + std::to_string(count) + ".gif", {});
            count += 2;
            b.add_edge(EdgeKind::create_node, a, el, tick());
            b.add_edge(EdgeKind::insert_node, a, el, tick(), {}, rng.pick(elements));
            b.add_edge(EdgeKind::request_start, el, res, tick(), {{"resource type", "image"}});
            elements.push_back(el);
        } else if (action == 8 && !scripts.empty()) {
            // Re-insertion by a later script; the creator keeps attribution.
            NodeId el = rng.pick(elements);
            b.add_edge(EdgeKind::insert_node, rng.pick(scripts), el, tick(), {}, rng.pick(elements));
            if (!orphans.empty() && rng.chance(0.5)) {
                b.add_edge(EdgeKind::insert_node, rng.pick(scripts), rng.pick(orphans), tick(), {},
                           rng.pick(elements));
            }
        } else if (!scripts.empty() && rng.chance(0.05)) {
            b.add_edge(EdgeKind::create_node, rng.pick(scripts), rng.pick(elements), tick());
        } else if (!scripts.empty()) {
            // A script fetching something itself.
            NodeId res = b.add_node(NodeKind::resource, std::nullopt,
                                    "https://api.example.org/" + std::to_string(count), {});
            ++count;
            b.add_edge(EdgeKind::request_start, rng.pick(scripts), res, tick(), {{"resource type", "image"}});
        }
    }
    return std::move(b).finish();
}

SafetyCase safety_case(std::size_t own_regions, std::size_t child_regions) {
    GraphBuilder b("https://www.example.com/");
    double t = 0;
    auto tick = [&] { return t += 1.0; };
    NodeId parser = b.add_node(NodeKind::parser);
    NodeId body = b.add_node(NodeKind::html_element, "body");
    b.add_edge(EdgeKind::create_node, parser, body, tick());
    std::vector<NodeId> regions;
    for (int i = 0; i < 6; ++i) {
        NodeId r = b.add_node(NodeKind::html_element, "div");
        b.add_edge(EdgeKind::create_node, parser, r, tick());
        b.add_edge(EdgeKind::insert_node, parser, r, tick(), {}, body);
        regions.push_back(r);
    }
    NodeId el = b.add_node(NodeKind::html_element, "script");
    NodeId parent = b.add_node(NodeKind::script, std::nullopt, "https://cdn.example.net/parent.js");
    b.add_edge(EdgeKind::create_node, parser, el, tick());
    b.add_edge(EdgeKind::insert_node, parser, el, tick(), {}, body);
    b.add_edge(EdgeKind::execute, el, parent, tick());

    auto fill = [&](NodeId script, std::size_t n, std::size_t first) {
        for (std::size_t i = 0; i < n; ++i) {
            NodeId d = b.add_node(NodeKind::html_element, "div");
            b.add_edge(EdgeKind::create_node, script, d, tick());
            b.add_edge(EdgeKind::insert_node, script, d, tick(), {}, regions[first + i]);
            // A nested insert under a script-built node stays in the same region.
            NodeId inner = b.add_node(NodeKind::html_element, "span");
            b.add_edge(EdgeKind::create_node, script, inner, tick());
            b.add_edge(EdgeKind::insert_node, script, inner, tick(), {}, d);
        }
    };

    std::optional<NodeId> child;
    if (child_regions > 0) {
        // The child's element goes into region 0, which the parent's own
        // insertions also cover, so the parent's count is unchanged.
        NodeId cel = b.add_node(NodeKind::html_element, "script");
        NodeId c = b.add_node(NodeKind::script, std::nullopt, "https://cdn.example.net/child.js");
        b.add_edge(EdgeKind::create_node, parent, cel, tick());
        b.add_edge(EdgeKind::insert_node, parent, cel, tick(), {}, regions[0]);
        b.add_edge(EdgeKind::execute, cel, c, tick());
        child = c;
        fill(parent, own_regions, 0);
        fill(c, child_regions, 1);
    } else {
        fill(parent, own_regions, 0);
    }
    // Attribute writes do not count as modifications.
    b.add_edge(EdgeKind::set_attribute, parent, regions[5], tick(), {{"attr name", "class"}});
    return SafetyCase{std::move(b).finish(), parent, child};
}

}  // namespace gen
