#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>

namespace chainblock {

// Public Suffix List lookup table (public_suffix_list.dat format: one rule
// per line, `//` comments, `*.` wildcards and `!` exceptions). Hosts are
// expected lowercased and in ASCII/punycode form.
class PublicSuffixTable {
public:
    static PublicSuffixTable parse(std::string_view dat_text);
    static PublicSuffixTable load_file(const std::filesystem::path& path);
    // Snapshot compiled into the library.
    static const PublicSuffixTable& bundled();

    // The effective TLD of `host`. Falls back to the last label (the
    // implicit "*" rule) when no listed rule matches.
    std::string public_suffix(std::string_view host) const;

    // eTLD+1, or nullopt when `host` is itself a public suffix, an IP
    // literal, or malformed.
    std::optional<std::string> registrable_domain(std::string_view host) const;

    std::size_t rule_count() const { return exact_.size() + wildcard_.size() + exception_.size(); }

private:
    std::unordered_set<std::string> exact_;
    std::unordered_set<std::string> wildcard_;   // "ck" for "*.ck"
    std::unordered_set<std::string> exception_;  // "www.ck" for "!www.ck"
};

}  // namespace chainblock
