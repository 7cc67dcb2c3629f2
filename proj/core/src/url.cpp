#include "chainblock/url.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

#include "chainblock/error.hpp"

namespace chainblock {

namespace {

bool is_scheme_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.';
}

std::optional<std::uint16_t> default_port(std::string_view scheme) {
    if (scheme == "http" || scheme == "ws") return 80;
    if (scheme == "https" || scheme == "wss") return 443;
    if (scheme == "ftp") return 21;
    return std::nullopt;
}

bool is_ipv4(std::string_view host) {
    int parts = 0;
    std::size_t pos = 0;
    while (pos <= host.size()) {
        std::size_t dot = host.find('.', pos);
        if (dot == std::string_view::npos) dot = host.size();
        std::string_view part = host.substr(pos, dot - pos);
        if (part.empty() || part.size() > 3) return false;
        if (!std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; })) return false;
        int value = 0;
        std::from_chars(part.data(), part.data() + part.size(), value);
        if (value > 255) return false;
        ++parts;
        pos = dot + 1;
        if (dot == host.size()) break;
    }
    return parts == 4;
}

}  // namespace

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool is_ip_literal(std::string_view host) {
    if (host.find(':') != std::string_view::npos) return true;  // IPv6
    return is_ipv4(host);
}

bool Url::host_is_ip() const { return is_ip_literal(host); }

std::string Url::authority() const {
    std::string out;
    if (host.find(':') != std::string::npos) {
        out = "[" + host + "]";
    } else {
        out = host;
    }
    if (port) out += ":" + std::to_string(*port);
    return out;
}

std::string Url::request_string() const {
    std::string out = scheme + ":";
    if (has_authority) out += "//" + authority();
    out += path;
    if (query) out += "?" + *query;
    return out;
}

std::string Url::to_string() const {
    std::string out = request_string();
    if (fragment) out += "#" + *fragment;
    return out;
}

std::optional<Url> parse_url(std::string_view text) {
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.front()))) text.remove_prefix(1);
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) text.remove_suffix(1);

    std::size_t colon = text.find(':');
    if (colon == 0 || colon == std::string_view::npos) return std::nullopt;
    if (!std::isalpha(static_cast<unsigned char>(text[0]))) return std::nullopt;
    if (!std::all_of(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(colon), is_scheme_char)) {
        return std::nullopt;
    }

    Url url;
    url.scheme = to_lower_ascii(text.substr(0, colon));
    std::string_view rest = text.substr(colon + 1);

    if (rest.substr(0, 2) == "//") {
        url.has_authority = true;
        rest.remove_prefix(2);
        std::size_t end = rest.find_first_of("/?#");
        std::string_view authority = rest.substr(0, end);
        rest = end == std::string_view::npos ? std::string_view{} : rest.substr(end);

        if (auto at = authority.rfind('@'); at != std::string_view::npos) authority.remove_prefix(at + 1);

        std::string_view host = authority;
        std::string_view port;
        if (!authority.empty() && authority.front() == '[') {
            std::size_t close = authority.find(']');
            if (close == std::string_view::npos) return std::nullopt;
            host = authority.substr(1, close - 1);
            std::string_view after = authority.substr(close + 1);
            if (!after.empty()) {
                if (after.front() != ':') return std::nullopt;
                port = after.substr(1);
            }
        } else if (auto pc = authority.rfind(':'); pc != std::string_view::npos) {
            host = authority.substr(0, pc);
            port = authority.substr(pc + 1);
        }
        url.host = to_lower_ascii(host);
        while (!url.host.empty() && url.host.back() == '.') url.host.pop_back();

        if (!port.empty()) {
            unsigned value = 0;
            auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
            if (ec != std::errc{} || ptr != port.data() + port.size() || value > 65535) return std::nullopt;
            if (default_port(url.scheme) != static_cast<std::uint16_t>(value)) {
                url.port = static_cast<std::uint16_t>(value);
            }
        }
    }

    std::size_t hash = rest.find('#');
    if (hash != std::string_view::npos) {
        url.fragment = std::string(rest.substr(hash + 1));
        rest = rest.substr(0, hash);
    }
    std::size_t question = rest.find('?');
    if (question != std::string_view::npos) {
        url.query = std::string(rest.substr(question + 1));
        rest = rest.substr(0, question);
    }
    url.path = std::string(rest);
    if (url.has_authority && url.path.empty()) url.path = "/";
    return url;
}

Url parse_absolute_url(std::string_view text) {
    auto url = parse_url(text);
    if (!url) throw UrlError("not an absolute URL: '" + std::string(text) + "'");
    if (!url->has_authority || url->host.empty()) {
        throw UrlError("URL has no host: '" + std::string(text) + "'");
    }
    return *std::move(url);
}

}  // namespace chainblock
