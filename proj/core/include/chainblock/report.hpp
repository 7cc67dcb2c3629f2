#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace chainblock {

inline constexpr int kReportSchemaVersion = 1;

struct RegionCounts {
    std::string region;
    std::size_t pages = 0;
    std::size_t pages_skipped = 0;
    std::size_t ads_by_lists = 0;            // distinct URLs the existing lists block
    std::size_t ads_by_classifier_only = 0;  // distinct classifier hits the lists miss
    std::size_t chain_new_urls = 0;          // distinct newly covered URLs, terminals and scripts
    std::size_t rules_emitted = 0;

    // chain_new_urls / ads_by_lists * 100; nullopt when there are no list hits.
    std::optional<double> delta_percent() const;
};

struct RuleProvenance {
    std::string rule;
    std::string region;
    std::string page_id;
    std::string url;
    std::string role;  // "terminal" or "script"
};

struct PageDiagnostic {
    std::string region;
    std::string page_id;
    std::string message;
};

struct RunReport {
    int schema_version = kReportSchemaVersion;
    std::map<std::string, std::string> config;
    std::vector<RegionCounts> regions;  // sorted by name
    RegionCounts totals;                // region "Total"
    std::vector<RuleProvenance> provenance;
    std::vector<PageDiagnostic> skipped_pages;
    std::vector<PageDiagnostic> diagnostics;
    std::size_t rules_dropped_by_guards = 0;
};

// Sums every region into `totals`, except rules_emitted which is left to
// the caller (rules are deduplicated across regions).
void sum_totals(RunReport& report);

enum class ReportFormat { json, table };

// One decimal with a percent sign, or an em dash when undefined.
std::string format_delta(std::optional<double> delta);

std::string emit_report(const RunReport& report, ReportFormat format);

// Parses emit_report(json) output. Throws Error on schema mismatch.
RunReport report_from_json(std::string_view text);

}  // namespace chainblock
