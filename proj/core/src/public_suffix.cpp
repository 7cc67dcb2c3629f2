#include "chainblock/public_suffix.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "chainblock/error.hpp"
#include "chainblock/url.hpp"

namespace chainblock {

namespace detail {
std::string_view bundled_public_suffix_list();
}

namespace {

std::vector<std::string_view> split_labels(std::string_view host) {
    std::vector<std::string_view> labels;
    std::size_t pos = 0;
    while (true) {
        std::size_t dot = host.find('.', pos);
        labels.push_back(host.substr(pos, dot == std::string_view::npos ? std::string_view::npos : dot - pos));
        if (dot == std::string_view::npos) break;
        pos = dot + 1;
    }
    return labels;
}

// Byte offset where label `index` starts.
std::size_t label_offset(const std::vector<std::string_view>& labels, std::string_view host, std::size_t index) {
    if (index >= labels.size()) return host.size();
    return static_cast<std::size_t>(labels[index].data() - host.data());
}

}  // namespace

PublicSuffixTable PublicSuffixTable::parse(std::string_view dat_text) {
    PublicSuffixTable table;
    std::size_t pos = 0;
    while (pos < dat_text.size()) {
        std::size_t eol = dat_text.find('\n', pos);
        if (eol == std::string_view::npos) eol = dat_text.size();
        std::string_view line = dat_text.substr(pos, eol - pos);
        pos = eol + 1;

        // A rule is the first whitespace-delimited token on the line.
        std::size_t start = line.find_first_not_of(" \t\r");
        if (start == std::string_view::npos) continue;
        line.remove_prefix(start);
        line = line.substr(0, line.find_first_of(" \t\r"));
        if (line.empty() || line.substr(0, 2) == "//") continue;

        std::string rule = to_lower_ascii(line);
        if (rule.front() == '!') {
            table.exception_.insert(rule.substr(1));
        } else if (rule.rfind("*.", 0) == 0) {
            table.wildcard_.insert(rule.substr(2));
        } else {
            table.exact_.insert(std::move(rule));
        }
    }
    return table;
}

PublicSuffixTable PublicSuffixTable::load_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot read public suffix list '" + path.string() + "'");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    PublicSuffixTable table = parse(buffer.str());
    if (table.rule_count() == 0) throw Error("public suffix list '" + path.string() + "' has no rules");
    return table;
}

const PublicSuffixTable& PublicSuffixTable::bundled() {
    static const PublicSuffixTable table = parse(detail::bundled_public_suffix_list());
    return table;
}

std::string PublicSuffixTable::public_suffix(std::string_view host) const {
    if (host.empty()) return {};
    auto labels = split_labels(host);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        std::string candidate(host.substr(label_offset(labels, host, i)));
        if (exception_.count(candidate)) {
            return std::string(host.substr(label_offset(labels, host, i + 1)));
        }
        if (exact_.count(candidate)) return candidate;
        if (i + 1 < labels.size()) {
            std::string parent(host.substr(label_offset(labels, host, i + 1)));
            if (wildcard_.count(parent)) return candidate;
        }
    }
    return std::string(labels.back());
}

std::optional<std::string> PublicSuffixTable::registrable_domain(std::string_view host) const {
    if (host.empty() || is_ip_literal(host)) return std::nullopt;
    auto labels = split_labels(host);
    for (auto label : labels) {
        if (label.empty()) return std::nullopt;
    }
    std::string suffix = public_suffix(host);
    if (suffix.size() >= host.size()) return std::nullopt;
    // One more label to the left of the suffix.
    std::string_view head = host.substr(0, host.size() - suffix.size() - 1);
    std::size_t dot = head.rfind('.');
    std::size_t start = dot == std::string_view::npos ? 0 : dot + 1;
    return std::string(host.substr(start));
}

}  // namespace chainblock
