#pragma once

#include "attrib/csv.hpp"
#include "attrib/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace attrib {

/// Index ids in index.csv that carry the stock-market and bond-market
/// series instead of a fund benchmark.
inline constexpr std::string_view stock_market_id = "MKT_STOCK";
inline constexpr std::string_view bond_market_id = "MKT_BOND";

template <typename T>
struct Parsed {
    T value;
    ValidationReport report;
};

namespace detail {

inline bool read_sleeves(const csv::Row& row, std::size_t c_stock, std::size_t c_bond,
                         std::optional<AssetWeights>& out, ValidationReport& rep) {
    const auto& s = row.fields[c_stock];
    const auto& b = row.fields[c_bond];
    if (s.empty() && b.empty()) {
        out.reset();
        return true;
    }
    auto sv = parse_double(s);
    auto bv = parse_double(b);
    if (!sv || !bv) {
        rep.error("CSV_SYNTAX", "unparseable sleeve weight", row.line);
        return false;
    }
    if (!in_unit_interval(*sv) || !in_unit_interval(*bv)) {
        rep.error(codes::weight_range, "sleeve weight outside [0, 1]", row.line);
        return false;
    }
    out = AssetWeights::from_sleeves(*sv, *bv);
    return true;
}

inline bool same_sleeves(const std::optional<AssetWeights>& a, const std::optional<AssetWeights>& b) {
    return a == b;
}

} // namespace detail

/// Parses holdings.csv:
/// fund_id,report_date,report_kind,stock_id,weight,stock_sleeve,bond_sleeve[,value]
///
/// Rows are grouped into one snapshot per (fund_id, report_date). Any error
/// in a group excludes that snapshot; the remaining file is still parsed.
/// Output is sorted by fund_id, then report_date.
inline Parsed<std::vector<HoldingsSnapshot>> parse_holdings_csv(std::istream& in) {
    auto t = csv::read(in, "holdings.csv");
    Parsed<std::vector<HoldingsSnapshot>> out;
    bool columns_ok = csv::require_columns(t, {"fund_id", "report_date", "report_kind", "stock_id", "weight", "stock_sleeve",
                                  "bond_sleeve"});
    out.report = std::move(t.report);
    if (!columns_ok) return out;
    const auto c_fund = *t.column("fund_id");
    const auto c_date = *t.column("report_date");
    const auto c_kind = *t.column("report_kind");
    const auto c_stock = *t.column("stock_id");
    const auto c_weight = *t.column("weight");
    const auto c_ss = *t.column("stock_sleeve");
    const auto c_bs = *t.column("bond_sleeve");
    const auto c_value = t.column("value");

    struct Group {
        HoldingsSnapshot snap;
        int first_line = 0;
        bool bad = false;
        bool have_sleeves = false;
        std::set<std::string> stocks;
        double value_sum = 0.0;
        bool value_complete = true;
    };
    std::map<std::pair<std::string, Date>, Group> groups;
    auto& rep = out.report;

    for (const auto& row : t.rows) {
        const auto& f = row.fields;
        auto date = Date::parse(f[c_date]);
        if (f[c_fund].empty() || !date) {
            rep.error("CSV_SYNTAX", "missing fund_id or invalid report_date", row.line);
            continue;
        }
        auto& g = groups[{f[c_fund], *date}];
        if (g.first_line == 0) {
            g.first_line = row.line;
            g.snap.fund_id = f[c_fund];
            g.snap.report_date = *date;
        }
        ReportKind kind;
        if (f[c_kind] == "semiannual") kind = ReportKind::semiannual;
        else if (f[c_kind] == "quarterly") kind = ReportKind::quarterly;
        else {
            rep.error("CSV_SYNTAX", "report_kind must be semiannual or quarterly", row.line);
            g.bad = true;
            continue;
        }
        if (g.first_line == row.line) g.snap.kind = kind;
        else if (g.snap.kind != kind) {
            rep.error("KIND_CONFLICT", "report_kind differs within one snapshot", row.line);
            g.bad = true;
        }

        std::optional<AssetWeights> sleeves;
        if (!detail::read_sleeves(row, c_ss, c_bs, sleeves, rep)) {
            g.bad = true;
        } else if (!g.have_sleeves) {
            g.snap.asset_weights = sleeves;
            g.have_sleeves = true;
        } else if (!detail::same_sleeves(g.snap.asset_weights, sleeves)) {
            rep.error("SLEEVE_CONFLICT", "sleeve weights differ within one snapshot", row.line);
            g.bad = true;
        }

        const auto& stock = f[c_stock];
        if (stock.empty()) {
            if (!f[c_weight].empty()) {
                rep.error("CSV_SYNTAX", "weight given without stock_id", row.line);
                g.bad = true;
            }
            continue;
        }
        auto w = parse_double(f[c_weight]);
        if (!w) {
            rep.error("CSV_SYNTAX", "unparseable weight", row.line);
            g.bad = true;
            continue;
        }
        if (!in_unit_interval(*w)) {
            rep.error(codes::weight_range, "weight of " + stock + " outside [0, 1]", row.line);
            g.bad = true;
        }
        if (!g.stocks.insert(stock).second) {
            rep.error(codes::dup_stock, "stock " + stock + " listed more than once", row.line);
            g.bad = true;
        }
        if (c_value) {
            auto v = parse_double(f[*c_value]);
            if (v && std::isfinite(*v)) g.value_sum += *v;
            else g.value_complete = false;
        }
        g.snap.positions.push_back({stock, *w});
    }

    for (auto& [key, g] : groups) {
        // Range and duplicate checks were made per row above, with line numbers.
        for (const auto& issue : validate_snapshot(g.snap).issues) {
            if (issue.code == codes::sleeve_sum || issue.code == codes::empty_positions) {
                rep.issues.push_back(issue);
                rep.issues.back().line = g.first_line;
                if (issue.is_error()) g.bad = true;
            }
        }
        if (g.bad) continue;
        if (c_value && g.value_complete && !g.snap.positions.empty()) g.snap.stock_value = g.value_sum;
        out.value.push_back(std::move(g.snap));
    }
    return out;
}

/// Parses benchmark.csv: benchmark_id,as_of,stock_id,weight,stock_sleeve,bond_sleeve.
/// Constituent weights are rescaled to sum to one; a deviation of the raw
/// sum from one by more than 1e-4 is reported as RENORM.
inline Parsed<std::vector<BenchmarkDefinition>> parse_benchmark_csv(std::istream& in) {
    auto t = csv::read(in, "benchmark.csv");
    Parsed<std::vector<BenchmarkDefinition>> out;
    bool columns_ok = csv::require_columns(t, {"benchmark_id", "as_of", "stock_id", "weight", "stock_sleeve", "bond_sleeve"});
    out.report = std::move(t.report);
    if (!columns_ok) return out;
    const auto c_id = *t.column("benchmark_id");
    const auto c_date = *t.column("as_of");
    const auto c_stock = *t.column("stock_id");
    const auto c_weight = *t.column("weight");
    const auto c_ss = *t.column("stock_sleeve");
    const auto c_bs = *t.column("bond_sleeve");

    struct Group {
        BenchmarkDefinition def;
        int first_line = 0;
        bool bad = false;
        bool have_sleeves = false;
        std::set<std::string> stocks;
    };
    std::map<std::pair<std::string, Date>, Group> groups;
    auto& rep = out.report;

    for (const auto& row : t.rows) {
        const auto& f = row.fields;
        auto date = Date::parse(f[c_date]);
        if (f[c_id].empty() || !date) {
            rep.error("CSV_SYNTAX", "missing benchmark_id or invalid as_of", row.line);
            continue;
        }
        auto& g = groups[{f[c_id], *date}];
        if (g.first_line == 0) {
            g.first_line = row.line;
            g.def.benchmark_id = f[c_id];
            g.def.as_of = *date;
        }
        std::optional<AssetWeights> sleeves;
        if (!detail::read_sleeves(row, c_ss, c_bs, sleeves, rep)) {
            g.bad = true;
        } else if (!g.have_sleeves) {
            g.def.asset_weights = sleeves;
            g.have_sleeves = true;
        } else if (!detail::same_sleeves(g.def.asset_weights, sleeves)) {
            rep.error("SLEEVE_CONFLICT", "sleeve weights differ within one definition", row.line);
            g.bad = true;
        }
        const auto& stock = f[c_stock];
        if (stock.empty()) continue;
        auto w = parse_double(f[c_weight]);
        if (!w) {
            rep.error("CSV_SYNTAX", "unparseable weight", row.line);
            g.bad = true;
            continue;
        }
        if (!in_unit_interval(*w)) {
            rep.error(codes::weight_range, "weight of " + stock + " outside [0, 1]", row.line);
            g.bad = true;
        }
        if (!g.stocks.insert(stock).second) {
            rep.error(codes::dup_stock, "stock " + stock + " listed more than once", row.line);
            g.bad = true;
        }
        g.def.constituents.push_back({stock, *w});
    }

    for (auto& [key, g] : groups) {
        if (g.def.asset_weights) {
            const auto& a = *g.def.asset_weights;
            if (a.stock + a.bond > 1.0 + 1e-9) {
                rep.error(codes::sleeve_sum, "asset-class weights sum above 1", g.first_line);
                g.bad = true;
            }
        }
        if (g.bad) continue;
        double sum = 0.0;
        for (const auto& c : g.def.constituents) sum += c.weight;
        if (g.def.constituents.empty() || !(sum > 0.0)) {
            rep.warn("EMPTY_CONSTITUENTS", "benchmark " + g.def.benchmark_id + " has no stock constituents",
                     g.first_line);
        } else {
            if (std::abs(sum - 1.0) > 1e-4)
                rep.warn("RENORM", "constituent weights of " + g.def.benchmark_id + " summed to " +
                                       format_double(sum) + "; rescaled to 1",
                         g.first_line);
            // Sums off by rounding only are left alone, as in normalize_stock_sleeve.
            const double slack = 4.0 * static_cast<double>(g.def.constituents.size()) *
                                 std::numeric_limits<double>::epsilon();
            if (std::abs(sum - 1.0) > slack)
                for (auto& c : g.def.constituents) c.weight /= sum;
        }
        out.value.push_back(std::move(g.def));
    }
    return out;
}

/// Parses funds.csv: fund_id,benchmark_id.
inline Parsed<std::map<std::string, std::string>> parse_fund_map(std::istream& in) {
    auto t = csv::read(in, "funds.csv");
    Parsed<std::map<std::string, std::string>> out;
    bool columns_ok = csv::require_columns(t, {"fund_id", "benchmark_id"});
    out.report = std::move(t.report);
    if (!columns_ok) return out;
    const auto c_f = *t.column("fund_id");
    const auto c_b = *t.column("benchmark_id");
    for (const auto& row : t.rows) {
        const auto& fid = row.fields[c_f];
        const auto& bid = row.fields[c_b];
        if (fid.empty() || bid.empty()) {
            out.report.error("CSV_SYNTAX", "empty fund_id or benchmark_id", row.line);
            continue;
        }
        auto [it, inserted] = out.value.emplace(fid, bid);
        if (!inserted && it->second != bid)
            out.report.error("DUP_FUND", "fund " + fid + " mapped to two benchmarks", row.line);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Market panel

struct PriceObs {
    std::string stock_id;
    YearMonth month;
    double close = 0.0;
    int line = 0;
};

struct SeriesObs {
    std::string id;
    YearMonth month;
    double value = 0.0;
    int line = 0;
};

struct FactorObs {
    YearMonth month;
    FactorRow row;
    int line = 0;
};

/// Raw observations in source order, before alignment on the month grid.
struct PanelInputs {
    std::vector<PriceObs> prices;
    std::vector<std::pair<std::string, std::string>> industries;
    std::vector<FactorObs> factors;
    std::vector<SeriesObs> nav;
    std::vector<SeriesObs> index;
};

struct PanelOptions {
    int gap_limit = 2; ///< months a suspended stock's last close is carried forward
};

namespace detail {

/// Removes ids whose observations are not strictly increasing in month.
template <typename Obs, typename IdOf>
std::set<std::string> nonmonotonic_ids(const std::vector<Obs>& obs, IdOf id_of, std::string_view what,
                                       ValidationReport& rep) {
    std::map<std::string, YearMonth> last;
    std::set<std::string> bad;
    for (const auto& o : obs) {
        const std::string& id = id_of(o);
        auto it = last.find(id);
        if (it != last.end() && !(it->second < o.month)) {
            if (bad.insert(id).second)
                rep.error("NONMONOTONIC_DATES", std::string(what) + " " + id + " has unordered or repeated months",
                          o.line);
        }
        last[id] = o.month;
    }
    return bad;
}

} // namespace detail

/// Aligns raw observations on a contiguous monthly grid and derives simple
/// stock returns from adjacent closes, carrying a suspended stock's last
/// close forward for up to `gap_limit` months.
inline Parsed<MarketPanel> build_market_panel(const PanelInputs& in, PanelOptions opt = {}) {
    Parsed<MarketPanel> out;
    auto& rep = out.report;
    auto& p = out.value;
    rep.subject_id = "market panel";

    auto bad_stocks = detail::nonmonotonic_ids(in.prices, [](const PriceObs& o) -> const std::string& {
        return o.stock_id;
    }, "stock", rep);
    auto bad_nav = detail::nonmonotonic_ids(in.nav, [](const SeriesObs& o) -> const std::string& { return o.id; },
                                            "fund", rep);
    auto bad_index = detail::nonmonotonic_ids(
        in.index, [](const SeriesObs& o) -> const std::string& { return o.id; }, "index", rep);
    {
        static const std::string factors_id = "factors";
        auto bad = detail::nonmonotonic_ids(
            in.factors, [](const FactorObs&) -> const std::string& { return factors_id; }, "series", rep);
        if (!bad.empty()) return out;
    }

    std::map<std::string, std::map<int, double>> closes;
    for (const auto& o : in.prices)
        if (!bad_stocks.count(o.stock_id)) closes[o.stock_id][o.month.index()] = o.close;

    // Grid covers every month that can carry a return.
    int lo = std::numeric_limits<int>::max();
    int hi = std::numeric_limits<int>::min();
    auto cover = [&](int m) {
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    };
    for (const auto& [id, c] : closes) {
        if (c.size() < 2) continue; // a lone close carries no return
        cover(c.begin()->first + 1);
        cover(c.rbegin()->first);
    }
    for (const auto& o : in.factors) cover(o.month.index());
    for (const auto& o : in.nav)
        if (!bad_nav.count(o.id)) cover(o.month.index());
    for (const auto& o : in.index)
        if (!bad_index.count(o.id)) cover(o.month.index());
    if (lo > hi) return out;

    const std::size_t n = static_cast<std::size_t>(hi - lo + 1);
    for (int m = lo; m <= hi; ++m) p.periods.push_back(YearMonth::from_index(m));

    for (const auto& [id, c] : closes) {
        std::vector<Cell> ret(n), close(n);
        Cell base;
        for (const auto& [m, v] : c) {
            if (m == lo - 1) base = v;
            else if (m >= lo) close[static_cast<std::size_t>(m - lo)] = v;
        }
        int first = c.begin()->first;
        double last = c.begin()->second;
        int gap = 0;
        bool stale = false;
        bool warned = false;
        for (int m = std::max(first + 1, lo); m <= hi; ++m) {
            auto k = static_cast<std::size_t>(m - lo);
            auto it = c.find(m);
            if (it != c.end()) {
                if (!stale) ret[k] = it->second / last - 1.0;
                last = it->second;
                gap = 0;
                stale = false;
            } else {
                ++gap;
                if (!stale && gap <= opt.gap_limit) {
                    ret[k] = 0.0;
                } else {
                    stale = true;
                    if (!warned) {
                        rep.warn("STALE_PRICE", "stock " + id + " has no close for more than " +
                                                    std::to_string(opt.gap_limit) + " months from " +
                                                    YearMonth::from_index(m).to_string());
                        warned = true;
                    }
                }
            }
        }
        p.stock_returns.emplace(id, std::move(ret));
        p.stock_close.emplace(id, std::move(close));
        if (base) p.base_close.emplace(id, base);
    }

    for (const auto& [stock, industry] : in.industries) {
        auto [it, inserted] = p.industry_of.emplace(stock, industry);
        if (!inserted && it->second != industry)
            rep.error(codes::dup_stock, "stock " + stock + " assigned to two industries");
    }

    p.factors.assign(n, std::nullopt);
    for (const auto& o : in.factors) p.factors[static_cast<std::size_t>(o.month.index() - lo)] = o.row;

    for (const auto& o : in.nav) {
        if (bad_nav.count(o.id)) continue;
        auto& v = p.fund_nav_return[o.id];
        if (v.empty()) v.assign(n, std::nullopt);
        v[static_cast<std::size_t>(o.month.index() - lo)] = o.value;
    }

    p.stock_market_return.assign(n, std::nullopt);
    p.bond_market_return.assign(n, std::nullopt);
    bool have_stock_market = false;
    for (const auto& o : in.index) {
        if (bad_index.count(o.id)) continue;
        auto k = static_cast<std::size_t>(o.month.index() - lo);
        if (o.id == stock_market_id) {
            p.stock_market_return[k] = o.value;
            have_stock_market = true;
        } else if (o.id == bond_market_id) {
            p.bond_market_return[k] = o.value;
        } else {
            auto& v = p.benchmark_return[o.id];
            if (v.empty()) v.assign(n, std::nullopt);
            v[k] = o.value;
        }
    }
    if (!have_stock_market && !in.factors.empty()) {
        rep.warn("MARKET_FROM_FACTORS", "no MKT_STOCK index; stock-market return taken as market_excess + risk_free");
        for (std::size_t k = 0; k < n; ++k)
            if (p.factors[k]) p.stock_market_return[k] = p.factors[k]->market_return();
    }
    return out;
}

namespace detail {

inline std::optional<double> finite_field(const std::string& s) {
    auto v = parse_double(s);
    if (!v || !std::isfinite(*v)) return std::nullopt;
    return v;
}

inline void read_series(std::istream& in, std::string_view subject, std::string_view id_col,
                        std::string_view value_col, std::vector<SeriesObs>& out, ValidationReport& rep) {
    auto t = csv::read(in, subject);
    rep.merge(t.report);
    t.report.issues.clear();
    if (!csv::require_columns(t, {id_col, "month", value_col})) {
        rep.merge(t.report);
        return;
    }
    auto ci = *t.column(id_col), cm = *t.column("month"), cv = *t.column(value_col);
    for (const auto& row : t.rows) {
        auto m = YearMonth::parse(row.fields[cm]);
        auto v = finite_field(row.fields[cv]);
        if (row.fields[ci].empty() || !m || !v) {
            rep.error("CSV_SYNTAX", std::string(subject) + ": bad id, month or non-finite value", row.line);
            continue;
        }
        out.push_back({row.fields[ci], *m, *v, row.line});
    }
}

} // namespace detail

/// Reads the five market-data files into raw observations.
inline Parsed<PanelInputs> read_panel_inputs(std::istream& prices, std::istream& industries, std::istream& factors,
                                             std::istream& nav, std::istream& index) {
    Parsed<PanelInputs> out;
    auto& rep = out.report;
    rep.subject_id = "market data";
    {
        auto t = csv::read(prices, "prices.csv");
        rep.merge(t.report);
        t.report.issues.clear();
        if (csv::require_columns(t, {"stock_id", "month", "close"})) {
            auto cs = *t.column("stock_id"), cm = *t.column("month"), cc = *t.column("close");
            for (const auto& row : t.rows) {
                auto m = YearMonth::parse(row.fields[cm]);
                auto v = detail::finite_field(row.fields[cc]);
                if (row.fields[cs].empty() || !m || !v || !(*v > 0.0)) {
                    rep.error("CSV_SYNTAX", "prices.csv: bad stock_id, month or close", row.line);
                    continue;
                }
                out.value.prices.push_back({row.fields[cs], *m, *v, row.line});
            }
        } else {
            rep.merge(t.report);
        }
    }
    {
        auto t = csv::read(industries, "industries.csv");
        rep.merge(t.report);
        t.report.issues.clear();
        if (csv::require_columns(t, {"stock_id", "industry_id"})) {
            auto cs = *t.column("stock_id"), ci = *t.column("industry_id");
            for (const auto& row : t.rows) {
                if (row.fields[cs].empty() || row.fields[ci].empty()) {
                    rep.error("CSV_SYNTAX", "industries.csv: empty field", row.line);
                    continue;
                }
                out.value.industries.emplace_back(row.fields[cs], row.fields[ci]);
            }
        } else {
            rep.merge(t.report);
        }
    }
    {
        auto t = csv::read(factors, "factors.csv");
        rep.merge(t.report);
        t.report.issues.clear();
        if (csv::require_columns(t, {"month", "market_excess", "smb", "hml", "risk_free"})) {
            auto cm = *t.column("month"), ce = *t.column("market_excess"), cs = *t.column("smb"),
                 ch = *t.column("hml"), cr = *t.column("risk_free");
            for (const auto& row : t.rows) {
                auto m = YearMonth::parse(row.fields[cm]);
                auto e = detail::finite_field(row.fields[ce]);
                auto s = detail::finite_field(row.fields[cs]);
                auto h = detail::finite_field(row.fields[ch]);
                auto r = detail::finite_field(row.fields[cr]);
                if (!m || !e || !s || !h || !r) {
                    rep.error("CSV_SYNTAX", "factors.csv: bad month or non-finite factor", row.line);
                    continue;
                }
                out.value.factors.push_back({*m, {*e, *s, *h, *r}, row.line});
            }
        } else {
            rep.merge(t.report);
        }
    }
    detail::read_series(nav, "nav.csv", "fund_id", "nav_return", out.value.nav, rep);
    detail::read_series(index, "index.csv", "benchmark_id", "index_return", out.value.index, rep);
    return out;
}

inline Parsed<MarketPanel> parse_market_panel(std::istream& prices, std::istream& industries, std::istream& factors,
                                              std::istream& nav, std::istream& index, PanelOptions opt = {}) {
    auto inputs = read_panel_inputs(prices, industries, factors, nav, index);
    auto built = build_market_panel(inputs.value, opt);
    inputs.report.merge(built.report);
    return {std::move(built.value), std::move(inputs.report)};
}

// ---------------------------------------------------------------------------
// Serialization back to the file grammars

inline std::string write_holdings_csv(const std::vector<HoldingsSnapshot>& snaps) {
    std::vector<std::string> header = {"fund_id", "report_date", "report_kind", "stock_id",
                                       "weight",  "stock_sleeve", "bond_sleeve"};
    csv::Writer w(header);
    for (const auto& s : snaps) {
        auto sleeve = [&](csv::Writer& row) {
            if (s.asset_weights) row.field(s.asset_weights->stock).field(s.asset_weights->bond);
            else row.field("").field("");
        };
        if (s.positions.empty()) {
            w.field(s.fund_id).field(s.report_date.to_string()).field(to_string(s.kind)).field("").field("");
            sleeve(w);
            w.end_row();
        }
        for (const auto& p : s.positions) {
            w.field(s.fund_id).field(s.report_date.to_string()).field(to_string(s.kind)).field(p.stock_id).field(
                p.weight);
            sleeve(w);
            w.end_row();
        }
    }
    return w.str();
}

inline std::string write_benchmark_csv(const std::vector<BenchmarkDefinition>& defs) {
    csv::Writer w({"benchmark_id", "as_of", "stock_id", "weight", "stock_sleeve", "bond_sleeve"});
    for (const auto& d : defs) {
        for (const auto& c : d.constituents) {
            w.field(d.benchmark_id).field(d.as_of.to_string()).field(c.stock_id).field(c.weight);
            if (d.asset_weights) w.field(d.asset_weights->stock).field(d.asset_weights->bond);
            else w.field("").field("");
            w.end_row();
        }
    }
    return w.str();
}

inline std::string write_fund_map(const std::map<std::string, std::string>& funds) {
    csv::Writer w({"fund_id", "benchmark_id"});
    for (const auto& [f, b] : funds) w.field(f).field(b).end_row();
    return w.str();
}

struct PanelFiles {
    std::string prices, industries, factors, nav, index;
};

inline std::string write_prices_csv(const PanelInputs& in) {
    csv::Writer w({"stock_id", "month", "close"});
    for (const auto& o : in.prices) w.field(o.stock_id).field(o.month.to_string()).field(o.close).end_row();
    return w.str();
}

inline PanelFiles write_panel_inputs(const PanelInputs& in) {
    PanelFiles f;
    f.prices = write_prices_csv(in);
    {
        csv::Writer w({"stock_id", "industry_id"});
        for (const auto& [s, i] : in.industries) w.field(s).field(i).end_row();
        f.industries = w.str();
    }
    {
        csv::Writer w({"month", "market_excess", "smb", "hml", "risk_free"});
        for (const auto& o : in.factors)
            w.field(o.month.to_string())
                .field(o.row.market_excess)
                .field(o.row.smb)
                .field(o.row.hml)
                .field(o.row.risk_free)
                .end_row();
        f.factors = w.str();
    }
    {
        csv::Writer w({"fund_id", "month", "nav_return"});
        for (const auto& o : in.nav) w.field(o.id).field(o.month.to_string()).field(o.value).end_row();
        f.nav = w.str();
    }
    {
        csv::Writer w({"benchmark_id", "month", "index_return"});
        for (const auto& o : in.index) w.field(o.id).field(o.month.to_string()).field(o.value).end_row();
        f.index = w.str();
    }
    return f;
}

/// Recovers raw observations from a panel (observed closes only, never the
/// carried-forward ones), in canonical order.
inline PanelInputs panel_to_inputs(const MarketPanel& p) {
    PanelInputs in;
    if (p.periods.empty()) return in;
    const YearMonth base_month = p.periods.front().plus(-1);
    for (const auto& [id, closes] : p.stock_close) {
        auto b = p.base_close.find(id);
        if (b != p.base_close.end() && b->second) in.prices.push_back({id, base_month, *b->second, 0});
        for (std::size_t k = 0; k < closes.size(); ++k)
            if (closes[k]) in.prices.push_back({id, p.periods[k], *closes[k], 0});
    }
    for (const auto& [s, i] : p.industry_of) in.industries.emplace_back(s, i);
    for (std::size_t k = 0; k < p.factors.size(); ++k)
        if (p.factors[k]) in.factors.push_back({p.periods[k], *p.factors[k], 0});
    for (const auto& [id, v] : p.fund_nav_return)
        for (std::size_t k = 0; k < v.size(); ++k)
            if (v[k]) in.nav.push_back({id, p.periods[k], *v[k], 0});
    auto push_index = [&](const std::string& id, const std::vector<Cell>& v) {
        for (std::size_t k = 0; k < v.size(); ++k)
            if (v[k]) in.index.push_back({id, p.periods[k], *v[k], 0});
    };
    for (const auto& [id, v] : p.benchmark_return) push_index(id, v);
    push_index(std::string(stock_market_id), p.stock_market_return);
    push_index(std::string(bond_market_id), p.bond_market_return);
    return in;
}

// ---------------------------------------------------------------------------
// Windows

struct WindowSpec {
    Date report_date;
    Direction direction = Direction::before;
    int horizon_months = 6;
};

/// Inclusive month range of a window: `before` ends with the report month,
/// `after` starts with the month following it.
inline std::pair<YearMonth, YearMonth> window_months(const WindowSpec& spec) {
    if (spec.horizon_months != 3 && spec.horizon_months != 6)
        throw Error(Errc::invalid_argument, "horizon must be 3 or 6 months");
    YearMonth m = spec.report_date.year_month();
    if (spec.direction == Direction::before) return {m.plus(-(spec.horizon_months - 1)), m};
    return {m.plus(1), m.plus(spec.horizon_months)};
}

/// Geometric compounding of monthly simple returns; nullopt if any cell is missing.
inline std::optional<double> compound(std::span<const Cell> cells) {
    double g = 1.0;
    for (const auto& c : cells) {
        if (!c) return std::nullopt;
        g *= 1.0 + *c;
    }
    return g - 1.0;
}

struct WindowReturns {
    YearMonth first;
    YearMonth last;
    std::map<std::string, double> per_stock;
    Cell stock_market;
    Cell bond_market;
    std::vector<std::optional<FactorRow>> factor_rows;
    std::vector<std::string> partially_missing; ///< stocks dropped for a gap inside the window
};

inline WindowReturns resolve_window(const MarketPanel& panel, const WindowSpec& spec) {
    auto [first, last] = window_months(spec);
    auto a = panel.offset(first);
    auto b = panel.offset(last);
    if (!a || !b)
        throw Error(Errc::window_out_of_range,
                    "window " + first.to_string() + ".." + last.to_string() + " outside market panel");
    WindowReturns w;
    w.first = first;
    w.last = last;
    const std::size_t len = *b - *a + 1;
    for (const auto& [id, series] : panel.stock_returns) {
        if (series.size() <= *b) continue;
        std::span<const Cell> cells(series.data() + *a, len);
        if (auto r = compound(cells)) {
            w.per_stock.emplace(id, *r);
        } else if (std::any_of(cells.begin(), cells.end(), [](const Cell& c) { return c.has_value(); })) {
            w.partially_missing.push_back(id);
        }
    }
    auto index_window = [&](const std::vector<Cell>& v) -> Cell {
        if (v.size() <= *b) return std::nullopt;
        return compound(std::span<const Cell>(v.data() + *a, len));
    };
    w.stock_market = index_window(panel.stock_market_return);
    w.bond_market = index_window(panel.bond_market_return);
    if (panel.factors.size() > *b)
        w.factor_rows.assign(panel.factors.begin() + static_cast<std::ptrdiff_t>(*a),
                             panel.factors.begin() + static_cast<std::ptrdiff_t>(*b + 1));
    return w;
}

} // namespace attrib
