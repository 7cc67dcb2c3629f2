#include "chainblock/page_graph.hpp"

#include <algorithm>
#include <array>
#include <limits>
#include <set>

#include "chainblock/error.hpp"
#include "chainblock/url.hpp"

namespace chainblock {

namespace {

// Names follow the PageGraph instrumentation's vocabulary.
constexpr std::array<std::pair<NodeKind, std::string_view>, 6> kNodeNames{{
    {NodeKind::parser, "parser"},
    {NodeKind::html_element, "HTML element"},
    {NodeKind::script, "script"},
    {NodeKind::resource, "resource"},
    {NodeKind::frame_owner, "frame owner"},
    {NodeKind::extension_point, "extensions"},
}};

constexpr std::array<std::pair<EdgeKind, std::string_view>, 9> kEdgeNames{{
    {EdgeKind::create_node, "create node"},
    {EdgeKind::insert_node, "insert node"},
    {EdgeKind::remove_node, "remove node"},
    {EdgeKind::set_attribute, "set attribute"},
    {EdgeKind::execute, "execute"},
    {EdgeKind::request_start, "request start"},
    {EdgeKind::request_complete, "request complete"},
    {EdgeKind::request_error, "request error"},
    {EdgeKind::structure, "structure"},
}};

bool in(NodeKind kind, std::initializer_list<NodeKind> allowed) {
    return std::find(allowed.begin(), allowed.end(), kind) != allowed.end();
}

void check_endpoints(const GraphEdge& e, const GraphNode& from, const GraphNode& to) {
    using K = NodeKind;
    bool ok = true;
    switch (e.kind) {
        case EdgeKind::create_node:
        case EdgeKind::insert_node:
        case EdgeKind::remove_node:
        case EdgeKind::set_attribute:
            ok = in(from.kind, {K::parser, K::script, K::extension_point}) &&
                 in(to.kind, {K::html_element, K::frame_owner});
            break;
        case EdgeKind::execute:
            ok = in(from.kind, {K::html_element, K::frame_owner}) && to.kind == K::script;
            break;
        case EdgeKind::request_start:
            ok = in(from.kind, {K::html_element, K::frame_owner, K::script, K::parser}) && to.kind == K::resource;
            break;
        case EdgeKind::request_complete:
        case EdgeKind::request_error:
            ok = from.kind == K::resource;
            break;
        case EdgeKind::structure:
            break;
    }
    if (!ok) {
        throw GraphInvariantError("edge '" + e.key + "' (" + std::string(to_string(e.kind)) + ") cannot connect " +
                                  std::string(to_string(from.kind)) + " node '" + from.key + "' to " +
                                  std::string(to_string(to.kind)) + " node '" + to.key + "'");
    }
}

}  // namespace

std::string_view to_string(NodeKind kind) {
    for (auto [k, name] : kNodeNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::string_view to_string(EdgeKind kind) {
    for (auto [k, name] : kEdgeNames) {
        if (k == kind) return name;
    }
    return "unknown";
}

std::optional<NodeKind> node_kind_from_string(std::string_view name) {
    std::string lower = to_lower_ascii(name);
    for (auto [k, n] : kNodeNames) {
        if (to_lower_ascii(n) == lower) return k;
    }
    // Document and text nodes behave like elements for attribution.
    if (lower == "dom root" || lower == "text node") return NodeKind::html_element;
    if (lower == "extension point" || lower == "extension") return NodeKind::extension_point;
    return std::nullopt;
}

std::optional<EdgeKind> edge_kind_from_string(std::string_view name) {
    std::string lower = to_lower_ascii(name);
    for (auto [k, n] : kEdgeNames) {
        if (n == lower) return k;
    }
    return std::nullopt;
}

std::string_view GraphNode::frame() const {
    auto it = attributes.find("frame id");
    return it == attributes.end() ? kMainFrame : std::string_view(it->second);
}

PageGraph::PageGraph(std::string page_url, std::vector<GraphNode> nodes, std::vector<GraphEdge> edges)
    : page_url_(std::move(page_url)), nodes_(std::move(nodes)), edges_(std::move(edges)) {
    const std::size_t n = nodes_.size();
    in_.resize(n);
    out_.resize(n);
    first_create_.resize(n);
    first_insert_.resize(n);
    conflicting_create_.assign(n, false);
    script_element_.resize(n);
    dom_parent_.resize(n);

    std::set<std::string> frames;
    for (std::size_t i = 0; i < n; ++i) {
        GraphNode& node = nodes_[i];
        node.id = NodeId{static_cast<std::uint32_t>(i)};
        if (!by_key_.emplace(node.key, node.id).second) {
            throw GraphInvariantError("duplicate node id '" + node.key + "'");
        }
        if (node.kind == NodeKind::resource && (!node.url || node.url->empty())) {
            throw GraphInvariantError("resource node '" + node.key + "' has no url");
        }
        if (node.kind == NodeKind::html_element && (!node.tag_name || node.tag_name->empty())) {
            throw GraphInvariantError("HTML element node '" + node.key + "' has no tag name");
        }
        std::string frame(node.frame());
        frames.insert(frame);
        if (node.kind == NodeKind::parser) {
            if (!parsers_.emplace(frame, node.id).second) {
                throw GraphInvariantError("frame '" + frame + "' has more than one parser node (second: '" +
                                          node.key + "')");
            }
        }
        if (node.kind == NodeKind::frame_owner) {
            if (auto it = node.attributes.find("child frame id"); it != node.attributes.end()) {
                frame_tree_[it->second] = frame;
                frames.insert(it->second);
            }
        }
    }
    for (const auto& frame : frames) {
        if (!parsers_.count(frame)) throw GraphInvariantError("frame '" + frame + "' has no parser node");
    }

    double last_time = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < edges_.size(); ++i) {
        GraphEdge& e = edges_[i];
        e.index = static_cast<std::uint32_t>(i);
        if (e.from.value >= n || e.to.value >= n) {
            throw GraphInvariantError("edge '" + e.key + "' references a missing node");
        }
        if (e.timestamp < last_time) {
            throw GraphInvariantError("edge '" + e.key + "' timestamp goes backwards");
        }
        last_time = e.timestamp;
        check_endpoints(e, nodes_[e.from.value], nodes_[e.to.value]);

        if (!e.parent) {
            if (auto it = e.attributes.find("parent"); it != e.attributes.end()) {
                auto found = by_key_.find(it->second);
                if (found == by_key_.end()) {
                    throw GraphInvariantError("edge '" + e.key + "' names missing parent node '" + it->second + "'");
                }
                e.parent = found->second;
            }
        } else if (e.parent->value >= n) {
            throw GraphInvariantError("edge '" + e.key + "' names a missing parent node");
        }

        out_[e.from.value].push_back(e.index);
        in_[e.to.value].push_back(e.index);

        const std::uint32_t target = e.to.value;
        switch (e.kind) {
            case EdgeKind::create_node:
                if (!first_create_[target]) {
                    first_create_[target] = e.index;
                } else if (edges_[*first_create_[target]].from != e.from) {
                    conflicting_create_[target] = true;
                }
                break;
            case EdgeKind::insert_node:
                if (!first_insert_[target]) first_insert_[target] = e.index;
                if (e.parent && !dom_parent_[target]) dom_parent_[target] = e.parent;
                break;
            case EdgeKind::execute:
                if (!script_element_[target]) script_element_[target] = e.from;
                break;
            default:
                break;
        }
    }
}

std::optional<NodeId> PageGraph::find_node(std::string_view key) const {
    auto it = by_key_.find(key);
    if (it == by_key_.end()) return std::nullopt;
    return it->second;
}

std::optional<NodeId> PageGraph::parser_of_frame(std::string_view frame) const {
    auto it = parsers_.find(frame);
    if (it == parsers_.end()) return std::nullopt;
    return it->second;
}

std::optional<std::uint32_t> PageGraph::creation_edge(NodeId id) const {
    if (first_create_[id.value]) return first_create_[id.value];
    return first_insert_[id.value];
}

NodeId GraphBuilder::add_node(NodeKind kind, std::optional<std::string> tag_name, std::optional<std::string> url,
                              AttributeMap attributes, std::string key) {
    GraphNode node;
    node.id = NodeId{static_cast<std::uint32_t>(nodes_.size())};
    node.key = key.empty() ? "n" + std::to_string(nodes_.size()) : std::move(key);
    node.kind = kind;
    node.tag_name = std::move(tag_name);
    node.url = std::move(url);
    node.attributes = std::move(attributes);
    nodes_.push_back(std::move(node));
    return nodes_.back().id;
}

std::uint32_t GraphBuilder::add_edge(EdgeKind kind, NodeId from, NodeId to, double timestamp, AttributeMap attributes,
                                     std::optional<NodeId> parent, std::string key) {
    GraphEdge edge;
    edge.index = static_cast<std::uint32_t>(edges_.size());
    edge.key = key.empty() ? "e" + std::to_string(edges_.size()) : std::move(key);
    edge.kind = kind;
    edge.from = from;
    edge.to = to;
    edge.timestamp = timestamp;
    edge.attributes = std::move(attributes);
    edge.parent = parent;
    edges_.push_back(std::move(edge));
    return edges_.back().index;
}

PageGraph GraphBuilder::finish() && {
    return PageGraph(std::move(page_url_), std::move(nodes_), std::move(edges_));
}

// ---- queries ---------------------------------------------------------------

Inserter inserter_of(const PageGraph& graph, NodeId node) {
    const GraphNode& n = graph.node(node);
    if (graph.has_conflicting_creators(node)) {
        throw GraphInvariantError("node '" + n.key + "' has conflicting create edges");
    }
    auto edge_index = graph.creation_edge(node);
    if (!edge_index) return {Inserter::Kind::unknown, {}, "no insertion edge for node '" + n.key + "'"};
    const GraphNode& actor = graph.node(graph.edge(*edge_index).from);
    switch (actor.kind) {
        case NodeKind::parser: return {Inserter::Kind::parser, {}, {}};
        case NodeKind::script: return {Inserter::Kind::script, actor.id, {}};
        default:
            return {Inserter::Kind::unknown, {},
                    "node '" + n.key + "' was inserted by " + std::string(to_string(actor.kind)) + " node '" +
                        actor.key + "'"};
    }
}

namespace {

bool parser_created(const PageGraph& graph, NodeId id) {
    auto edge = graph.creation_edge(id);
    return edge && graph.node(graph.edge(*edge).from).kind == NodeKind::parser;
}

NodeId region_anchor(const PageGraph& graph, NodeId start) {
    NodeId current = start;
    std::set<std::uint32_t> visited;
    while (!parser_created(graph, current)) {
        visited.insert(current.value);
        auto parent = graph.dom_parent(current);
        if (!parent || visited.count(parent->value)) break;
        current = *parent;
    }
    return current;
}

}  // namespace

std::size_t modified_subtree_count(const PageGraph& graph, NodeId script) {
    std::set<std::uint32_t> regions;
    for (std::uint32_t e : graph.out_edges(script)) {
        const GraphEdge& edge = graph.edge(e);
        if (edge.kind != EdgeKind::insert_node) continue;
        NodeId point = edge.parent.value_or(edge.to);
        regions.insert(region_anchor(graph, point).value);
    }
    return regions.size();
}

std::vector<NodeId> scripts_inserted_by(const PageGraph& graph, NodeId script) {
    std::vector<NodeId> out;
    for (const auto& node : graph.nodes()) {
        if (node.kind != NodeKind::script) continue;
        auto element = graph.element_of_script(node.id);
        if (!element) continue;
        Inserter ins = inserter_of(graph, *element);
        if (ins.kind == Inserter::Kind::script && ins.script == script) out.push_back(node.id);
    }
    return out;
}

std::vector<ResourceRequestRecord> resource_requests(const PageGraph& graph) {
    std::vector<ResourceRequestRecord> records;
    for (const auto& edge : graph.edges()) {
        if (edge.kind != EdgeKind::request_start) continue;
        ResourceRequestRecord rec;
        rec.edge_index = edge.index;
        rec.requester = edge.from;
        rec.resource = edge.to;
        rec.resource_url = *graph.node(edge.to).url;
        rec.start_time = edge.timestamp;
        if (auto it = edge.attributes.find("resource type"); it != edge.attributes.end()) {
            rec.resource_type = resource_type_from_string(it->second);
        }

        auto request_id = edge.attributes.find("request id");
        bool complete = false;
        bool failed = false;
        for (std::uint32_t e : graph.out_edges(edge.to)) {
            const GraphEdge& reply = graph.edge(e);
            if (reply.kind != EdgeKind::request_complete && reply.kind != EdgeKind::request_error) continue;
            if (reply.index < edge.index) continue;
            if (request_id != edge.attributes.end()) {
                auto rid = reply.attributes.find("request id");
                if (rid == reply.attributes.end() || rid->second != request_id->second) continue;
            } else if (reply.to != edge.from) {
                continue;
            }
            if (reply.kind == EdgeKind::request_error) {
                failed = true;
            } else {
                complete = true;
                if (auto ru = reply.attributes.find("response url");
                    ru != reply.attributes.end() && !ru->second.empty() && ru->second != rec.resource_url) {
                    rec.requested_url = rec.resource_url;
                    rec.resource_url = ru->second;
                }
            }
            break;
        }
        rec.completed = complete && !failed;
        records.push_back(std::move(rec));
    }
    std::stable_sort(records.begin(), records.end(), [](const auto& a, const auto& b) {
        if (a.start_time != b.start_time) return a.start_time < b.start_time;
        return a.edge_index < b.edge_index;
    });
    return records;
}

namespace {

bool modified_by_script(const PageGraph& graph, NodeId node) {
    for (std::uint32_t e : graph.in_edges(node)) {
        const GraphEdge& edge = graph.edge(e);
        if (edge.kind != EdgeKind::set_attribute && edge.kind != EdgeKind::insert_node &&
            edge.kind != EdgeKind::remove_node) {
            continue;
        }
        if (graph.node(edge.from).kind == NodeKind::script) return true;
    }
    return false;
}

}  // namespace

DegreeFeatures node_degree_features(const PageGraph& graph, NodeId node) {
    DegreeFeatures f;
    f.in = graph.in_edges(node).size();
    f.out = graph.out_edges(node).size();
    f.total = f.in + f.out;
    f.modified_by_script = modified_by_script(graph, node);

    std::set<std::uint32_t> neighbors;
    for (std::uint32_t e : graph.in_edges(node)) neighbors.insert(graph.edge(e).from.value);
    for (std::uint32_t e : graph.out_edges(node)) neighbors.insert(graph.edge(e).to.value);
    neighbors.erase(node.value);
    if (!neighbors.empty()) {
        double sum = 0.0;
        for (std::uint32_t v : neighbors) {
            NodeId id{v};
            sum += static_cast<double>(graph.in_edges(id).size() + graph.out_edges(id).size());
        }
        f.avg_degree_connectivity = sum / static_cast<double>(neighbors.size());
    }

    if (auto parent = graph.dom_parent(node)) {
        f.parent_in = graph.in_edges(*parent).size();
        f.parent_out = graph.out_edges(*parent).size();
        f.parent_total = f.parent_in + f.parent_out;
        f.parent_modified_by_script = modified_by_script(graph, *parent);
    }
    return f;
}

}  // namespace chainblock
