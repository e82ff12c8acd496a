#pragma once

#include "attrib/core.hpp"
#include "attrib/data_model.hpp"
#include "attrib/inference.hpp"
#include "attrib/ingestion.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace attrib {

inline constexpr const char* holdings_file = "holdings.csv";
inline constexpr const char* benchmark_file = "benchmark.csv";
inline constexpr const char* prices_file = "prices.csv";
inline constexpr const char* industries_file = "industries.csv";
inline constexpr const char* factors_file = "factors.csv";
inline constexpr const char* nav_file = "nav.csv";
inline constexpr const char* index_file = "index.csv";
inline constexpr const char* funds_file = "funds.csv";
inline constexpr const char* config_file = "workspace.toml";

/// Run settings read from workspace.toml and overridable from the command line.
struct Config {
    int gap_limit = 2;
    DfConvention df = DfConvention::paper;
    bool two_sided = false; ///< positivity tests judged two-sided instead of one-sided
    double level = 0.10;
    double level_strict = 0.05;
    Direction direction = Direction::before;
    bool allow_gaps = false;
    std::size_t min_obs = 24;
    std::optional<int> end_year;
    int span_years = 5;
};

/// Plain-text config: one `key = value` per line, `#` starts a comment,
/// values may be double-quoted.
inline Config parse_config(std::string_view text, ValidationReport& rep) {
    Config c;
    std::istringstream in{std::string(text)};
    std::string line;
    int no = 0;
    while (std::getline(in, line)) {
        ++no;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        std::string s = csv::trim(line);
        if (s.empty()) continue;
        if (s.front() == '[') continue; // section headers carry no meaning here
        auto eq = s.find('=');
        if (eq == std::string::npos) {
            rep.error("CONFIG_VALUE", "expected key = value", no);
            continue;
        }
        std::string key(csv::trim(s.substr(0, eq)));
        std::string value(csv::trim(s.substr(eq + 1)));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        auto bad = [&] { rep.error("CONFIG_VALUE", "bad value '" + value + "' for " + key, no); };
        auto boolean = [&](bool& out) {
            if (value == "true") out = true;
            else if (value == "false") out = false;
            else bad();
        };
        auto level = [&](double& out) {
            auto v = parse_double(value);
            if (v && *v > 0.0 && *v < 1.0) out = *v;
            else bad();
        };
        if (key == "gap_limit") {
            auto v = detail::parse_int(value);
            if (v && *v >= 0) c.gap_limit = *v;
            else bad();
        } else if (key == "df_convention") {
            if (value == "paper" || value == "n-2") c.df = DfConvention::paper;
            else if (value == "classical" || value == "n-1") c.df = DfConvention::classical;
            else bad();
        } else if (key == "two_sided") {
            boolean(c.two_sided);
        } else if (key == "level") {
            level(c.level);
        } else if (key == "level_strict") {
            level(c.level_strict);
        } else if (key == "direction") {
            if (auto d = parse_direction(value)) c.direction = *d;
            else bad();
        } else if (key == "allow_gaps") {
            boolean(c.allow_gaps);
        } else if (key == "min_obs") {
            auto v = detail::parse_int(value);
            if (v && *v >= 3) c.min_obs = static_cast<std::size_t>(*v);
            else bad();
        } else if (key == "end_year") {
            auto v = detail::parse_int(value);
            if (v) c.end_year = *v;
            else bad();
        } else if (key == "span") {
            auto v = detail::parse_int(value);
            if (v && *v >= 1) c.span_years = *v;
            else bad();
        } else {
            rep.warn("CONFIG_KEY", "unknown key " + key + " ignored", no);
        }
    }
    return c;
}

inline std::string write_config(const Config& c) {
    std::string s;
    s += "gap_limit = " + std::to_string(c.gap_limit) + "\n";
    s += std::string("df_convention = \"") + (c.df == DfConvention::paper ? "paper" : "classical") + "\"\n";
    s += std::string("two_sided = ") + (c.two_sided ? "true" : "false") + "\n";
    s += "level = " + format_double(c.level) + "\n";
    s += "level_strict = " + format_double(c.level_strict) + "\n";
    s += "direction = \"" + std::string(to_string(c.direction)) + "\"\n";
    s += std::string("allow_gaps = ") + (c.allow_gaps ? "true" : "false") + "\n";
    s += "min_obs = " + std::to_string(c.min_obs) + "\n";
    if (c.end_year) s += "end_year = " + std::to_string(*c.end_year) + "\n";
    s += "span = " + std::to_string(c.span_years) + "\n";
    return s;
}

struct Workspace {
    Config config;
    std::vector<HoldingsSnapshot> holdings;
    std::vector<BenchmarkDefinition> benchmarks;
    std::map<std::string, std::string> fund_benchmark;
    MarketPanel panel;
    ValidationReport report;
};

/// Parses a workspace from file contents keyed by file name. workspace.toml
/// is optional; every other file is required.
inline Workspace workspace_from_files(const std::map<std::string, std::string>& files) {
    Workspace ws;
    ws.report.subject_id = "workspace";
    auto get = [&](const char* name) -> std::optional<std::string> {
        auto it = files.find(name);
        if (it == files.end()) {
            ws.report.error(std::string(code_name(Errc::io_read)), std::string("missing ") + name);
            return std::nullopt;
        }
        return it->second;
    };
    if (auto it = files.find(config_file); it != files.end()) ws.config = parse_config(it->second, ws.report);

    if (auto text = get(holdings_file)) {
        std::istringstream in(*text);
        auto p = parse_holdings_csv(in);
        ws.report.merge(p.report);
        ws.holdings = std::move(p.value);
    }
    if (auto text = get(benchmark_file)) {
        std::istringstream in(*text);
        auto p = parse_benchmark_csv(in);
        ws.report.merge(p.report);
        ws.benchmarks = std::move(p.value);
    }
    if (auto text = get(funds_file)) {
        std::istringstream in(*text);
        auto p = parse_fund_map(in);
        ws.report.merge(p.report);
        ws.fund_benchmark = std::move(p.value);
    }
    auto prices = get(prices_file), industries = get(industries_file), factors = get(factors_file),
         nav = get(nav_file), index = get(index_file);
    if (prices && industries && factors && nav && index) {
        std::istringstream a(*prices), b(*industries), c(*factors), d(*nav), e(*index);
        auto p = parse_market_panel(a, b, c, d, e, PanelOptions{ws.config.gap_limit});
        ws.report.merge(p.report);
        ws.panel = std::move(p.value);
    }
    return ws;
}

inline std::optional<std::string> slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

inline Workspace load_workspace(const std::filesystem::path& dir) {
    std::map<std::string, std::string> files;
    for (const char* name : {holdings_file, benchmark_file, prices_file, industries_file, factors_file, nav_file,
                             index_file, funds_file, config_file})
        if (auto text = slurp(dir / name)) files.emplace(name, std::move(*text));
    auto ws = workspace_from_files(files);
    ws.report.subject_id = dir.string();
    return ws;
}

} // namespace attrib
