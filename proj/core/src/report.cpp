#include "chainblock/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "chainblock/error.hpp"
#include <nlohmann/json.hpp>

namespace chainblock {

std::optional<double> RegionCounts::delta_percent() const {
    if (ads_by_lists == 0) return std::nullopt;
    return static_cast<double>(chain_new_urls) / static_cast<double>(ads_by_lists) * 100.0;
}

void sum_totals(RunReport& report) {
    RegionCounts t;
    t.region = "Total";
    for (const auto& r : report.regions) {
        t.pages += r.pages;
        t.pages_skipped += r.pages_skipped;
        t.ads_by_lists += r.ads_by_lists;
        t.ads_by_classifier_only += r.ads_by_classifier_only;
        t.chain_new_urls += r.chain_new_urls;
        t.rules_emitted += r.rules_emitted;
    }
    report.totals = t;
}

std::string format_delta(std::optional<double> delta) {
    if (!delta) return "—";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f%%", *delta);
    return buf;
}

namespace {

nlohmann::ordered_json counts_json(const RegionCounts& r) {
    nlohmann::ordered_json j;
    j["region"] = r.region;
    j["pages"] = r.pages;
    j["pages_skipped"] = r.pages_skipped;
    j["ads_by_lists"] = r.ads_by_lists;
    j["ads_by_classifier_only"] = r.ads_by_classifier_only;
    j["chain_new_urls"] = r.chain_new_urls;
    auto d = r.delta_percent();
    j["delta_percent"] = d ? nlohmann::ordered_json(*d) : nlohmann::ordered_json(nullptr);
    j["rules_emitted"] = r.rules_emitted;
    return j;
}

RegionCounts counts_from_json(const nlohmann::json& j) {
    RegionCounts r;
    r.region = j.at("region").get<std::string>();
    r.pages = j.at("pages").get<std::size_t>();
    r.pages_skipped = j.at("pages_skipped").get<std::size_t>();
    r.ads_by_lists = j.at("ads_by_lists").get<std::size_t>();
    r.ads_by_classifier_only = j.at("ads_by_classifier_only").get<std::size_t>();
    r.chain_new_urls = j.at("chain_new_urls").get<std::size_t>();
    r.rules_emitted = j.at("rules_emitted").get<std::size_t>();
    return r;
}

nlohmann::ordered_json diagnostics_json(const std::vector<PageDiagnostic>& items) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& d : items) arr.push_back({{"region", d.region}, {"page", d.page_id}, {"message", d.message}});
    return arr;
}

std::vector<PageDiagnostic> diagnostics_from_json(const nlohmann::json& arr) {
    std::vector<PageDiagnostic> out;
    for (const auto& d : arr) {
        out.push_back({d.at("region").get<std::string>(), d.at("page").get<std::string>(),
                       d.at("message").get<std::string>()});
    }
    return out;
}

// Display width of a UTF-8 string, counting code points.
std::size_t width(const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xC0) != 0x80; }));
}

std::string pad_left(const std::string& s, std::size_t w) {
    std::size_t n = width(s);
    return n >= w ? s : std::string(w - n, ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t w) {
    std::size_t n = width(s);
    return n >= w ? s : s + std::string(w - n, ' ');
}

std::string emit_table(const RunReport& report) {
    const std::vector<std::string> header{"Region", "Current lists", "Classifier", "∪ Chains", "Δ", "Rules"};
    std::vector<std::vector<std::string>> rows;
    auto row = [](const RegionCounts& r) {
        return std::vector<std::string>{r.region,
                                        std::to_string(r.ads_by_lists),
                                        std::to_string(r.ads_by_classifier_only),
                                        std::to_string(r.chain_new_urls),
                                        format_delta(r.delta_percent()),
                                        std::to_string(r.rules_emitted)};
    };
    for (const auto& r : report.regions) rows.push_back(row(r));
    rows.push_back(row(report.totals));

    std::vector<std::size_t> widths(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) {
        widths[c] = width(header[c]);
        for (const auto& r : rows) widths[c] = std::max(widths[c], width(r[c]));
    }
    auto line = [&](const std::vector<std::string>& cells) {
        std::string out = pad_right(cells[0], widths[0]);
        for (std::size_t c = 1; c < cells.size(); ++c) out += "  " + pad_left(cells[c], widths[c]);
        return out + "\n";
    };
    std::string out = line(header);
    std::size_t total_width = widths[0];
    for (std::size_t c = 1; c < widths.size(); ++c) total_width += 2 + widths[c];
    std::string rule(total_width, '-');
    out += rule + "\n";
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) out += line(rows[i]);
    out += rule + "\n";
    out += line(rows.back());
    if (!report.skipped_pages.empty()) {
        out += "\n" + std::to_string(report.skipped_pages.size()) + " page(s) skipped\n";
    }
    return out;
}

}  // namespace

std::string emit_report(const RunReport& report, ReportFormat format) {
    if (format == ReportFormat::table) return emit_table(report);
    nlohmann::ordered_json j;
    j["schema"] = "chainblock-report";
    j["schema_version"] = report.schema_version;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.config) config[k] = v;
    j["config"] = std::move(config);
    nlohmann::ordered_json regions = nlohmann::ordered_json::array();
    for (const auto& r : report.regions) regions.push_back(counts_json(r));
    j["regions"] = std::move(regions);
    j["totals"] = counts_json(report.totals);
    j["rules_dropped_by_guards"] = report.rules_dropped_by_guards;
    nlohmann::ordered_json prov = nlohmann::ordered_json::array();
    for (const auto& p : report.provenance) {
        prov.push_back(
            {{"rule", p.rule}, {"region", p.region}, {"page", p.page_id}, {"url", p.url}, {"role", p.role}});
    }
    j["rules"] = std::move(prov);
    j["skipped_pages"] = diagnostics_json(report.skipped_pages);
    j["diagnostics"] = diagnostics_json(report.diagnostics);
    return j.dump(2) + "\n";
}

RunReport report_from_json(std::string_view text) {
    try {
        auto j = nlohmann::json::parse(text);
        if (j.at("schema").get<std::string>() != "chainblock-report") throw Error("not a chainblock report");
        RunReport report;
        report.schema_version = j.at("schema_version").get<int>();
        if (report.schema_version != kReportSchemaVersion) {
            throw Error("unsupported report schema version " + std::to_string(report.schema_version));
        }
        for (auto& [k, v] : j.at("config").items()) report.config[k] = v.get<std::string>();
        for (const auto& r : j.at("regions")) report.regions.push_back(counts_from_json(r));
        report.totals = counts_from_json(j.at("totals"));
        report.rules_dropped_by_guards = j.value("rules_dropped_by_guards", std::size_t{0});
        for (const auto& p : j.at("rules")) {
            report.provenance.push_back({p.at("rule").get<std::string>(), p.at("region").get<std::string>(),
                                         p.at("page").get<std::string>(), p.at("url").get<std::string>(),
                                         p.at("role").get<std::string>()});
        }
        report.skipped_pages = diagnostics_from_json(j.at("skipped_pages"));
        report.diagnostics = diagnostics_from_json(j.at("diagnostics"));
        return report;
    } catch (const Error&) {
        throw;
    } catch (const std::exception& e) {
        throw Error(std::string("malformed report: ") + e.what());
    }
}

}  // namespace chainblock
