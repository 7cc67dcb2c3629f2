#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "chainblock/resource_type.hpp"

namespace chainblock {

struct NodeId {
    std::uint32_t value = 0;
    auto operator<=>(const NodeId&) const = default;
};

enum class NodeKind : std::uint8_t { parser, html_element, script, resource, frame_owner, extension_point };
enum class EdgeKind : std::uint8_t {
    create_node,
    insert_node,
    remove_node,
    set_attribute,
    execute,
    request_start,
    request_complete,
    request_error,
    structure,
};

std::string_view to_string(NodeKind kind);
std::string_view to_string(EdgeKind kind);
std::optional<NodeKind> node_kind_from_string(std::string_view name);
std::optional<EdgeKind> edge_kind_from_string(std::string_view name);

using AttributeMap = std::map<std::string, std::string>;

inline constexpr std::string_view kMainFrame = "main";

struct GraphNode {
    NodeId id;
    std::string key;  // graphml id
    NodeKind kind = NodeKind::html_element;
    std::optional<std::string> tag_name;
    std::optional<std::string> url;
    AttributeMap attributes;  // every other data key, e.g. "frame id", "width"

    std::string_view frame() const;
};

struct GraphEdge {
    std::uint32_t index = 0;  // position in document order
    std::string key;
    EdgeKind kind = EdgeKind::structure;
    NodeId from;
    NodeId to;
    double timestamp = 0.0;  // ms since navigation start
    AttributeMap attributes;  // "attr name", "resource type", "request id", ...
    // insert_node: the element the node was inserted under.
    std::optional<NodeId> parent;
};

// One page's execution graph. Immutable; the constructor validates every
// structural invariant and builds the adjacency indexes the queries use.
class PageGraph {
public:
    // Throws GraphInvariantError naming the first offending node or edge.
    PageGraph(std::string page_url, std::vector<GraphNode> nodes, std::vector<GraphEdge> edges);

    const std::string& page_url() const { return page_url_; }
    const std::vector<GraphNode>& nodes() const { return nodes_; }
    const std::vector<GraphEdge>& edges() const { return edges_; }
    const GraphNode& node(NodeId id) const { return nodes_[id.value]; }
    const GraphEdge& edge(std::uint32_t index) const { return edges_[index]; }
    // child frame id -> parent frame id
    const std::map<std::string, std::string>& frame_tree() const { return frame_tree_; }

    std::optional<NodeId> find_node(std::string_view key) const;
    std::optional<NodeId> parser_of_frame(std::string_view frame) const;
    std::span<const std::uint32_t> in_edges(NodeId id) const { return in_[id.value]; }
    std::span<const std::uint32_t> out_edges(NodeId id) const { return out_[id.value]; }

    // First create_node edge into `id`, else first insert_node edge.
    std::optional<std::uint32_t> creation_edge(NodeId id) const;
    bool has_conflicting_creators(NodeId id) const { return conflicting_create_[id.value]; }
    // The element whose execute edge ran `script`.
    std::optional<NodeId> element_of_script(NodeId script) const { return script_element_[script.value]; }
    // Parent recorded on the first insertion of `id` that named one.
    std::optional<NodeId> dom_parent(NodeId id) const { return dom_parent_[id.value]; }

private:
    std::string page_url_;
    std::vector<GraphNode> nodes_;
    std::vector<GraphEdge> edges_;
    std::map<std::string, std::string> frame_tree_;
    std::map<std::string, NodeId, std::less<>> by_key_;
    std::map<std::string, NodeId, std::less<>> parsers_;
    std::vector<std::vector<std::uint32_t>> in_;
    std::vector<std::vector<std::uint32_t>> out_;
    std::vector<std::optional<std::uint32_t>> first_create_;
    std::vector<std::optional<std::uint32_t>> first_insert_;
    std::vector<bool> conflicting_create_;
    std::vector<std::optional<NodeId>> script_element_;
    std::vector<std::optional<NodeId>> dom_parent_;
};

// Incremental construction for fixtures and generated corpora.
class GraphBuilder {
public:
    explicit GraphBuilder(std::string page_url = {}) : page_url_(std::move(page_url)) {}

    NodeId add_node(NodeKind kind, std::optional<std::string> tag_name = std::nullopt,
                    std::optional<std::string> url = std::nullopt, AttributeMap attributes = {},
                    std::string key = {});
    std::uint32_t add_edge(EdgeKind kind, NodeId from, NodeId to, double timestamp, AttributeMap attributes = {},
                           std::optional<NodeId> parent = std::nullopt, std::string key = {});

    PageGraph finish() &&;

private:
    std::string page_url_;
    std::vector<GraphNode> nodes_;
    std::vector<GraphEdge> edges_;
};

// ---- graphml -------------------------------------------------------------

// Throws GraphmlParseError (malformed XML), SchemaError (missing keys or
// data, dangling endpoints) or GraphInvariantError.
PageGraph load_graphml(std::string_view bytes);
PageGraph load_graphml_file(const std::filesystem::path& path);
std::string write_graphml(const PageGraph& graph);

// ---- attribution queries -------------------------------------------------

struct Inserter {
    enum class Kind : std::uint8_t { parser, script, unknown };
    Kind kind = Kind::unknown;
    NodeId script;           // valid when kind == script
    std::string diagnostic;  // set when kind == unknown

    bool operator==(const Inserter& other) const {
        return kind == other.kind && (kind != Kind::script || script == other.script);
    }
};

// Who put `node` into the document. The creating actor wins over later
// re-insertions. Throws GraphInvariantError when different actors created
// the node.
Inserter inserter_of(const PageGraph& graph, NodeId node);

// Number of distinct document regions `script` inserted nodes into. A region
// is the nearest parser-created ancestor of the insertion point, so nested
// script-built wrappers collapse into the region they hang off.
std::size_t modified_subtree_count(const PageGraph& graph, NodeId script);

// Scripts whose element `script` inserted directly, in node order.
std::vector<NodeId> scripts_inserted_by(const PageGraph& graph, NodeId script);

struct ResourceRequestRecord {
    std::uint32_t edge_index = 0;  // the request_start edge; identity of the record
    NodeId requester;
    NodeId resource;
    std::string resource_url;  // final URL after redirects
    ResourceType resource_type = ResourceType::other;
    double start_time = 0.0;
    bool completed = false;
    std::optional<std::string> requested_url;  // set when a redirect changed the URL

    bool operator==(const ResourceRequestRecord& other) const { return edge_index == other.edge_index; }
};

// One record per request_start edge, ordered by (timestamp, edge order).
std::vector<ResourceRequestRecord> resource_requests(const PageGraph& graph);

struct DegreeFeatures {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t total = 0;
    std::size_t parent_in = 0;
    std::size_t parent_out = 0;
    std::size_t parent_total = 0;
    double avg_degree_connectivity = 0.0;
    bool modified_by_script = false;
    bool parent_modified_by_script = false;
};

DegreeFeatures node_degree_features(const PageGraph& graph, NodeId node);

}  // namespace chainblock
