#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace chainblock {

// A parsed absolute URL. Scheme and host are lowercased, default ports are
// dropped and userinfo is discarded, so two URLs that a browser would treat
// as the same request compare equal after to_string().
struct Url {
    std::string scheme;
    bool has_authority = false;
    std::string host;  // IPv6 literals without brackets
    std::optional<std::uint16_t> port;
    std::string path;
    std::optional<std::string> query;
    std::optional<std::string> fragment;

    bool host_is_ip() const;
    std::string authority() const;
    // scheme://authority/path?query, i.e. what goes on the wire.
    std::string request_string() const;
    std::string to_string() const;
};

// Returns nullopt when `text` has no scheme. URLs without an authority
// (data:, about:, javascript:) parse with has_authority == false.
std::optional<Url> parse_url(std::string_view text);

// Throws UrlError unless `text` is an absolute URL with a non-empty host.
Url parse_absolute_url(std::string_view text);

bool is_ip_literal(std::string_view host);

std::string to_lower_ascii(std::string_view s);

}  // namespace chainblock
