#pragma once

#include "attrib/data_model.hpp"
#include "attrib/ingestion.hpp"

#include <map>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace attrib {

/// One industry of a Brinson breakdown: weights are fractions of the stock
/// sleeve, returns are cumulative over the window.
struct IndustryRow {
    double fund_weight = 0.0;
    double fund_return = 0.0;
    double bench_weight = 0.0;
    double bench_return = 0.0;
};

struct IndustryBreakdown {
    Date report_date;
    Direction direction = Direction::before;
    std::map<std::string, IndustryRow> rows;
    ValidationReport notes;

    std::size_t n_industries() const { return rows.size(); }
};

struct AttributionRecord {
    std::string fund_id;
    Date report_date;
    Direction direction = Direction::before;
    double ss = 0.0; ///< within-industry selection
    double ia = 0.0; ///< industry allocation
    double it = 0.0; ///< interaction
    double excess = 0.0;
};

struct AssetAllocationRecord {
    std::string fund_id;
    Date quarter_date;
    double aa = 0.0;
};

struct ValidityDiff {
    std::string fund_id;
    Date report_date;
    Direction direction = Direction::before;
    double assumed_return = 0.0;
    double actual_return = 0.0;
    double diff = 0.0;
};

namespace detail {

struct PricedSleeve {
    std::map<std::string, std::pair<double, double>> by_industry; // weight, weight * return
    double total_weight = 0.0;
};

/// Keeps positions with a window return and an industry, rescaled to sum
/// to one, and aggregates them per industry.
inline PricedSleeve price_sleeve(std::span<const Position> positions, const std::map<std::string, std::string>& industry_of,
                                 const WindowReturns& window, std::string_view side, ValidationReport& notes) {
    std::vector<std::tuple<const std::string*, double, double>> kept;
    double kept_weight = 0.0;
    for (const auto& p : positions) {
        auto r = window.per_stock.find(p.stock_id);
        auto ind = industry_of.find(p.stock_id);
        if (r == window.per_stock.end()) {
            notes.warn("UNPRICED_STOCK", std::string(side) + " stock " + p.stock_id + " lacks returns over the window");
            continue;
        }
        if (ind == industry_of.end()) {
            notes.warn("UNCLASSIFIED_STOCK", std::string(side) + " stock " + p.stock_id + " has no industry");
            continue;
        }
        kept.emplace_back(&ind->second, p.weight, r->second);
        kept_weight += p.weight;
    }
    PricedSleeve s;
    if (!(kept_weight > 0.0)) return s;
    for (auto [ind, w, r] : kept) {
        double wn = kept_weight == 1.0 ? w : w / kept_weight;
        auto& slot = s.by_industry[*ind];
        slot.first += wn;
        slot.second += wn * r;
        s.total_weight += wn;
    }
    return s;
}

} // namespace detail

/// Groups fund and benchmark stock sleeves by industry over one window.
///
/// Industries held on one side only get weight zero on the other side, and
/// the missing return is taken as that side's total sleeve return.
inline IndustryBreakdown build_breakdown(const HoldingsSnapshot& snapshot, const BenchmarkDefinition& benchmark,
                                         const std::map<std::string, std::string>& industry_of,
                                         const WindowReturns& window, Direction direction) {
    IndustryBreakdown b;
    b.report_date = snapshot.report_date;
    b.direction = direction;
    b.notes.subject_id = snapshot.fund_id + "@" + snapshot.report_date.to_string();

    auto fund = detail::price_sleeve(snapshot.positions, industry_of, window, "fund", b.notes);
    auto bench = detail::price_sleeve(benchmark.constituents, industry_of, window, "benchmark", b.notes);

    bool overlap = false;
    for (const auto& [ind, v] : fund.by_industry)
        if (v.first > 0.0 && bench.by_industry.count(ind) && bench.by_industry.at(ind).first > 0.0) overlap = true;
    if (!overlap)
        throw Error(Errc::no_overlap, "fund " + snapshot.fund_id + " and benchmark " + benchmark.benchmark_id +
                                          " share no priced industry at " + snapshot.report_date.to_string());

    double fund_total = 0.0, bench_total = 0.0;
    for (const auto& [ind, v] : fund.by_industry) fund_total += v.second;
    for (const auto& [ind, v] : bench.by_industry) bench_total += v.second;

    for (const auto& [ind, v] : fund.by_industry) {
        auto& row = b.rows[ind];
        row.fund_weight = v.first;
        row.fund_return = v.first > 0.0 ? v.second / v.first : fund_total;
        row.bench_return = bench_total;
    }
    for (const auto& [ind, v] : bench.by_industry) {
        auto [it, fresh] = b.rows.try_emplace(ind);
        auto& row = it->second;
        if (fresh) row.fund_return = fund_total;
        row.bench_weight = v.first;
        row.bench_return = v.first > 0.0 ? v.second / v.first : bench_total;
    }
    return b;
}

/// Σ (r_fund − r_bench) · w_bench
inline double within_industry_selection(const IndustryBreakdown& b) {
    double s = 0.0;
    for (const auto& [ind, r] : b.rows) s += (r.fund_return - r.bench_return) * r.bench_weight;
    return s;
}

/// Σ r_bench · (w_fund − w_bench)
inline double industry_allocation(const IndustryBreakdown& b) {
    double s = 0.0;
    for (const auto& [ind, r] : b.rows) s += r.bench_return * (r.fund_weight - r.bench_weight);
    return s;
}

/// Σ (r_fund − r_bench) · (w_fund − w_bench)
inline double interaction_term(const IndustryBreakdown& b) {
    double s = 0.0;
    for (const auto& [ind, r] : b.rows) s += (r.fund_return - r.bench_return) * (r.fund_weight - r.bench_weight);
    return s;
}

/// Fund sleeve return minus benchmark constituent return over the window.
inline double sleeve_excess(const IndustryBreakdown& b) {
    double f = 0.0, m = 0.0;
    for (const auto& [ind, r] : b.rows) {
        f += r.fund_weight * r.fund_return;
        m += r.bench_weight * r.bench_return;
    }
    return f - m;
}

inline AttributionRecord attribute(const std::string& fund_id, const IndustryBreakdown& b) {
    return {fund_id,
            b.report_date,
            b.direction,
            within_industry_selection(b),
            industry_allocation(b),
            interaction_term(b),
            sleeve_excess(b)};
}

/// Brinson decomposition of one snapshot against its benchmark over the
/// six-month window on the given side of the report date.
inline AttributionRecord attribute(const HoldingsSnapshot& snapshot, const BenchmarkDefinition& benchmark,
                                   const MarketPanel& panel, Direction direction) {
    auto window = resolve_window(panel, {snapshot.report_date, direction, 6});
    auto b = build_breakdown(normalize_stock_sleeve(snapshot), benchmark, panel.industry_of, window, direction);
    return attribute(snapshot.fund_id, b);
}

/// r_s·(w_fs − w_bs) + r_b·(w_fb − w_bb) over a window (three months after
/// a quarterly report).
inline AssetAllocationRecord asset_allocation(const HoldingsSnapshot& snapshot, const BenchmarkDefinition& benchmark,
                                              const WindowReturns& window) {
    if (!snapshot.asset_weights)
        throw Error(Errc::missing_sleeve, "fund " + snapshot.fund_id + " reports no asset-class weights");
    if (!benchmark.asset_weights)
        throw Error(Errc::missing_sleeve, "benchmark " + benchmark.benchmark_id + " has no asset-class weights");
    if (!window.stock_market || !window.bond_market)
        throw Error(Errc::missing_market, "stock or bond market return missing over " + window.first.to_string() +
                                              ".." + window.last.to_string());
    const auto& f = *snapshot.asset_weights;
    const auto& m = *benchmark.asset_weights;
    double aa = *window.stock_market * (f.stock - m.stock) + *window.bond_market * (f.bond - m.bond);
    return {snapshot.fund_id, snapshot.report_date, aa};
}

/// ∏(1 + x) − 1, accumulated as g + x + g·x so small returns keep their
/// low-order bits.
inline double accumulate_geometric(std::span<const double> series) {
    double g = 0.0;
    for (double x : series) {
        if (!(x > -1.0)) throw Error(Errc::degenerate, "period return " + format_double(x) + " at or below -100%");
        g = g + x + g * x;
    }
    return g;
}

/// Buy-and-hold return of the reported stock sleeve versus the compounded
/// NAV return over the same window.
inline ValidityDiff holding_validity_diff(const std::string& fund_id, const HoldingsSnapshot& snapshot,
                                          const MarketPanel& panel, const WindowReturns& window, Direction direction) {
    double kept = 0.0, acc = 0.0;
    for (const auto& p : snapshot.positions) {
        auto r = window.per_stock.find(p.stock_id);
        if (r == window.per_stock.end()) continue;
        kept += p.weight;
        acc += p.weight * r->second;
    }
    if (!(kept > 0.0)) throw Error(Errc::empty_sleeve, "fund " + fund_id + " holds no priced stock over the window");
    double assumed = kept == 1.0 ? acc : acc / kept;

    auto nav = panel.fund_nav_return.find(fund_id);
    auto a = panel.offset(window.first);
    auto b = panel.offset(window.last);
    if (nav == panel.fund_nav_return.end() || !a || !b || nav->second.size() <= *b)
        throw Error(Errc::missing_nav, "no NAV returns for fund " + fund_id);
    auto actual = compound(std::span<const Cell>(nav->second.data() + *a, *b - *a + 1));
    if (!actual)
        throw Error(Errc::missing_nav, "NAV returns of fund " + fund_id + " incomplete over " +
                                           window.first.to_string() + ".." + window.last.to_string());
    return {fund_id, snapshot.report_date, direction, assumed, *actual, assumed - *actual};
}

inline ValidityDiff holding_validity_diff(const std::string& fund_id, const HoldingsSnapshot& snapshot,
                                          const MarketPanel& panel, Direction direction) {
    auto window = resolve_window(panel, {snapshot.report_date, direction, 6});
    return holding_validity_diff(fund_id, normalize_stock_sleeve(snapshot), panel, window, direction);
}

} // namespace attrib
