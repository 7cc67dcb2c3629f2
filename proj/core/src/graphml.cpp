#include <expat.h>

#include <charconv>
#include <fstream>
#include <memory>
#include <set>
#include <sstream>
#include <unordered_map>

#include "chainblock/error.hpp"
#include "chainblock/page_graph.hpp"

namespace chainblock {

namespace {

constexpr std::string_view kNodeType = "node type";
constexpr std::string_view kTagName = "tag name";
constexpr std::string_view kUrl = "url";
constexpr std::string_view kEdgeType = "edge type";
constexpr std::string_view kTimestamp = "timestamp";
constexpr std::string_view kPageUrl = "page url";

struct KeyDecl {
    std::string domain;  // node | edge | graph | all
    std::string name;
};

struct RawNode {
    std::string id;
    std::map<std::string, std::string> data;  // by attribute name
};

struct RawEdge {
    std::string id;
    std::string source;
    std::string target;
    std::map<std::string, std::string> data;
};

class GraphmlReader {
public:
    GraphmlReader() : parser_(XML_ParserCreate("UTF-8"), &XML_ParserFree) {
        XML_SetUserData(parser_.get(), this);
        XML_SetElementHandler(parser_.get(), &GraphmlReader::on_start, &GraphmlReader::on_end);
        XML_SetCharacterDataHandler(parser_.get(), &GraphmlReader::on_text);
    }

    PageGraph read(std::string_view bytes) {
        if (XML_Parse(parser_.get(), bytes.data(), static_cast<int>(bytes.size()), XML_TRUE) == XML_STATUS_ERROR) {
            if (pending_) std::rethrow_exception(pending_);
            throw GraphmlParseError(XML_ErrorString(XML_GetErrorCode(parser_.get())),
                                    static_cast<long>(XML_GetCurrentLineNumber(parser_.get())),
                                    static_cast<long>(XML_GetCurrentColumnNumber(parser_.get())) + 1);
        }
        if (pending_) std::rethrow_exception(pending_);
        if (!saw_graph_) throw SchemaError("document has no <graph> element");
        return assemble();
    }

private:
    static void on_start(void* self, const XML_Char* name, const XML_Char** atts) {
        static_cast<GraphmlReader*>(self)->guard([&](GraphmlReader& r) { r.start(name, atts); });
    }
    static void on_end(void* self, const XML_Char* name) {
        static_cast<GraphmlReader*>(self)->guard([&](GraphmlReader& r) { r.end(name); });
    }
    static void on_text(void* self, const XML_Char* text, int len) {
        auto* r = static_cast<GraphmlReader*>(self);
        if (r->in_data_) r->text_.append(text, static_cast<std::size_t>(len));
    }

    template <class F>
    void guard(F&& f) {
        if (pending_) return;
        try {
            f(*this);
        } catch (...) {
            pending_ = std::current_exception();
            XML_StopParser(parser_.get(), XML_FALSE);
        }
    }

    std::string where() const {
        return " (line " + std::to_string(XML_GetCurrentLineNumber(parser_.get())) + ")";
    }

    static std::string local_name(const XML_Char* name) {
        std::string_view n(name);
        if (auto colon = n.rfind(':'); colon != std::string_view::npos) n.remove_prefix(colon + 1);
        return std::string(n);
    }

    static std::map<std::string, std::string> attributes(const XML_Char** atts) {
        std::map<std::string, std::string> out;
        for (int i = 0; atts[i]; i += 2) out[atts[i]] = atts[i + 1];
        return out;
    }

    void start(const XML_Char* raw_name, const XML_Char** atts) {
        std::string name = local_name(raw_name);
        auto a = attributes(atts);
        if (name == "key") {
            auto id = a.find("id");
            auto attr_name = a.find("attr.name");
            if (id == a.end()) throw SchemaError("<key> without id" + where());
            KeyDecl decl;
            decl.domain = a.count("for") ? a["for"] : "all";
            decl.name = attr_name == a.end() ? id->second : attr_name->second;
            keys_[id->second] = decl;
        } else if (name == "graph") {
            if (saw_graph_) throw SchemaError("nested or repeated <graph> elements are not supported" + where());
            saw_graph_ = true;
            in_graph_ = true;
        } else if (name == "node") {
            if (!in_graph_) throw SchemaError("<node> outside <graph>" + where());
            auto id = a.find("id");
            if (id == a.end()) throw SchemaError("<node> without id" + where());
            nodes_.push_back({id->second, {}});
            current_ = Scope::node;
        } else if (name == "edge") {
            if (!in_graph_) throw SchemaError("<edge> outside <graph>" + where());
            RawEdge edge;
            edge.id = a.count("id") ? a["id"] : "e" + std::to_string(edges_.size());
            auto s = a.find("source");
            auto t = a.find("target");
            if (s == a.end() || t == a.end()) throw SchemaError("edge '" + edge.id + "' lacks source/target" + where());
            edge.source = s->second;
            edge.target = t->second;
            edges_.push_back(std::move(edge));
            current_ = Scope::edge;
        } else if (name == "data") {
            auto key = a.find("key");
            if (key == a.end()) throw SchemaError("<data> without key" + where());
            auto decl = keys_.find(key->second);
            if (decl == keys_.end()) throw SchemaError("<data> references undeclared key '" + key->second + "'" + where());
            data_name_ = decl->second.name;
            text_.clear();
            in_data_ = true;
        }
    }

    void end(const XML_Char* raw_name) {
        std::string name = local_name(raw_name);
        if (name == "data") {
            in_data_ = false;
            switch (current_) {
                case Scope::node: nodes_.back().data[data_name_] = text_; break;
                case Scope::edge: edges_.back().data[data_name_] = text_; break;
                case Scope::graph:
                    if (in_graph_) graph_data_[data_name_] = text_;
                    break;
            }
        } else if (name == "node" || name == "edge") {
            current_ = Scope::graph;
        } else if (name == "graph") {
            in_graph_ = false;
        }
    }

    void require_key(std::string_view domain, std::string_view attr) const {
        for (const auto& [id, decl] : keys_) {
            if (decl.name == attr && (decl.domain == domain || decl.domain == "all")) return;
        }
        throw SchemaError("missing required " + std::string(domain) + " key '" + std::string(attr) + "'");
    }

    PageGraph assemble() {
        require_key("node", kNodeType);
        require_key("edge", kEdgeType);
        require_key("edge", kTimestamp);

        std::vector<GraphNode> nodes;
        std::unordered_map<std::string, std::uint32_t> index;
        nodes.reserve(nodes_.size());
        for (auto& raw : nodes_) {
            GraphNode node;
            node.key = raw.id;
            auto type = raw.data.find(std::string(kNodeType));
            if (type == raw.data.end()) {
                throw SchemaError("node '" + raw.id + "' is missing required key '" + std::string(kNodeType) + "'");
            }
            auto kind = node_kind_from_string(type->second);
            if (!kind) throw SchemaError("node '" + raw.id + "' has unknown node type '" + type->second + "'");
            node.kind = *kind;
            if (type->second == "DOM root" && !raw.data.count(std::string(kTagName))) node.tag_name = "#document";
            if (type->second == "text node" && !raw.data.count(std::string(kTagName))) node.tag_name = "#text";
            for (auto& [k, v] : raw.data) {
                if (k == kNodeType) continue;
                if (k == kTagName) {
                    node.tag_name = v;
                } else if (k == kUrl) {
                    node.url = v;
                } else {
                    node.attributes[k] = v;
                }
            }
            if (!index.emplace(raw.id, static_cast<std::uint32_t>(nodes.size())).second) {
                throw SchemaError("duplicate node id '" + raw.id + "'");
            }
            nodes.push_back(std::move(node));
        }

        std::vector<GraphEdge> edges;
        edges.reserve(edges_.size());
        for (auto& raw : edges_) {
            GraphEdge edge;
            edge.key = raw.id;
            auto s = index.find(raw.source);
            auto t = index.find(raw.target);
            if (s == index.end() || t == index.end()) {
                throw SchemaError("edge '" + raw.id + "' references missing node '" +
                                  (s == index.end() ? raw.source : raw.target) + "'");
            }
            edge.from = NodeId{s->second};
            edge.to = NodeId{t->second};

            auto type = raw.data.find(std::string(kEdgeType));
            if (type == raw.data.end()) {
                throw SchemaError("edge '" + raw.id + "' is missing required key '" + std::string(kEdgeType) + "'");
            }
            auto kind = edge_kind_from_string(type->second);
            if (!kind) throw SchemaError("edge '" + raw.id + "' has unknown edge type '" + type->second + "'");
            edge.kind = *kind;

            auto ts = raw.data.find(std::string(kTimestamp));
            if (ts == raw.data.end()) {
                throw SchemaError("edge '" + raw.id + "' is missing required key '" + std::string(kTimestamp) + "'");
            }
            const std::string& tv = ts->second;
            auto [ptr, ec] = std::from_chars(tv.data(), tv.data() + tv.size(), edge.timestamp);
            if (ec != std::errc{} || ptr != tv.data() + tv.size()) {
                throw SchemaError("edge '" + raw.id + "' has non-numeric timestamp '" + tv + "'");
            }
            for (auto& [k, v] : raw.data) {
                if (k == kEdgeType || k == kTimestamp) continue;
                edge.attributes[k] = v;
            }
            if (auto p = edge.attributes.find("parent"); p != edge.attributes.end()) {
                auto pi = index.find(p->second);
                if (pi == index.end()) {
                    throw SchemaError("edge '" + raw.id + "' names missing parent node '" + p->second + "'");
                }
                edge.parent = NodeId{pi->second};
            }
            edges.push_back(std::move(edge));
        }

        std::string page_url;
        if (auto it = graph_data_.find(std::string(kPageUrl)); it != graph_data_.end()) page_url = it->second;
        return PageGraph(std::move(page_url), std::move(nodes), std::move(edges));
    }

    enum class Scope { graph, node, edge };

    std::unique_ptr<XML_ParserStruct, decltype(&XML_ParserFree)> parser_;
    std::exception_ptr pending_;
    std::map<std::string, KeyDecl> keys_;
    std::vector<RawNode> nodes_;
    std::vector<RawEdge> edges_;
    std::map<std::string, std::string> graph_data_;
    Scope current_ = Scope::graph;
    bool saw_graph_ = false;
    bool in_graph_ = false;
    bool in_data_ = false;
    std::string data_name_;
    std::string text_;
};

void append_escaped(std::string& out, std::string_view text) {
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
}

std::string format_timestamp(double value) {
    char buffer[64];
    auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, ptr);
}

}  // namespace

PageGraph load_graphml(std::string_view bytes) {
    GraphmlReader reader;
    return reader.read(bytes);
}

PageGraph load_graphml_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("cannot read '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return load_graphml(buffer.str());
}

std::string write_graphml(const PageGraph& graph) {
    // Stable key ids: fixed schema keys first, then extra attribute names
    // in sorted order.
    std::vector<std::string> node_keys{std::string(kNodeType), std::string(kTagName), std::string(kUrl)};
    std::vector<std::string> edge_keys{std::string(kEdgeType), std::string(kTimestamp)};
    std::set<std::string> node_extra;
    std::set<std::string> edge_extra;
    for (const auto& n : graph.nodes()) {
        for (const auto& [k, v] : n.attributes) node_extra.insert(k);
    }
    for (const auto& e : graph.edges()) {
        for (const auto& [k, v] : e.attributes) edge_extra.insert(k);
        if (e.parent) edge_extra.insert("parent");
    }
    node_keys.insert(node_keys.end(), node_extra.begin(), node_extra.end());
    edge_keys.insert(edge_keys.end(), edge_extra.begin(), edge_extra.end());

    std::map<std::string, std::string> node_id;
    std::map<std::string, std::string> edge_id;
    std::string out = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    out += "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\">\n";
    int next = 0;
    auto declare = [&](const std::string& domain, const std::string& name, std::map<std::string, std::string>& ids) {
        std::string id = "d" + std::to_string(next++);
        ids[name] = id;
        out += "  <key id=\"" + id + "\" for=\"" + domain + "\" attr.name=\"";
        append_escaped(out, name);
        out += "\" attr.type=\"" + std::string(name == kTimestamp ? "double" : "string") + "\"/>\n";
    };
    for (const auto& k : node_keys) declare("node", k, node_id);
    for (const auto& k : edge_keys) declare("edge", k, edge_id);
    std::map<std::string, std::string> graph_id;
    declare("graph", std::string(kPageUrl), graph_id);

    auto data = [&](const std::string& id, std::string_view value) {
        out += "      <data key=\"" + id + "\">";
        append_escaped(out, value);
        out += "</data>\n";
    };

    out += "  <graph id=\"G\" edgedefault=\"directed\">\n";
    if (!graph.page_url().empty()) {
        out += "    <data key=\"" + graph_id[std::string(kPageUrl)] + "\">";
        append_escaped(out, graph.page_url());
        out += "</data>\n";
    }
    for (const auto& n : graph.nodes()) {
        out += "    <node id=\"";
        append_escaped(out, n.key);
        out += "\">\n";
        data(node_id[std::string(kNodeType)], to_string(n.kind));
        if (n.tag_name) data(node_id[std::string(kTagName)], *n.tag_name);
        if (n.url) data(node_id[std::string(kUrl)], *n.url);
        for (const auto& [k, v] : n.attributes) data(node_id[k], v);
        out += "    </node>\n";
    }
    for (const auto& e : graph.edges()) {
        out += "    <edge id=\"";
        append_escaped(out, e.key);
        out += "\" source=\"";
        append_escaped(out, graph.node(e.from).key);
        out += "\" target=\"";
        append_escaped(out, graph.node(e.to).key);
        out += "\">\n";
        data(edge_id[std::string(kEdgeType)], to_string(e.kind));
        data(edge_id[std::string(kTimestamp)], format_timestamp(e.timestamp));
        for (const auto& [k, v] : e.attributes) {
            if (k == "parent" && e.parent) continue;
            data(edge_id[k], v);
        }
        if (e.parent) data(edge_id["parent"], graph.node(*e.parent).key);
        out += "    </edge>\n";
    }
    out += "  </graph>\n</graphml>\n";
    return out;
}

}  // namespace chainblock
