#pragma once

#include "attrib/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace attrib {

enum class ReportKind { semiannual, quarterly };

inline std::string_view to_string(ReportKind k) {
    return k == ReportKind::semiannual ? "semiannual" : "quarterly";
}

enum class Direction { before, after };

inline std::string_view to_string(Direction d) { return d == Direction::before ? "before" : "after"; }

inline std::optional<Direction> parse_direction(std::string_view s) {
    if (s == "before") return Direction::before;
    if (s == "after") return Direction::after;
    return std::nullopt;
}

struct Position {
    std::string stock_id;
    double weight = 0.0; ///< fraction of fund net assets (or of the stock sleeve once normalized)

    bool operator==(const Position&) const = default;
};

/// Asset-class split of a fund or benchmark. `other` is the cash/residual
/// share and never enters asset allocation.
struct AssetWeights {
    double stock = 0.0;
    double bond = 0.0;
    double other = 0.0;

    static AssetWeights from_sleeves(double stock, double bond) {
        double rest = 1.0 - stock - bond;
        return {stock, bond, rest > 0.0 ? rest : 0.0};
    }
    bool operator==(const AssetWeights&) const = default;
};

struct HoldingsSnapshot {
    std::string fund_id;
    Date report_date;
    ReportKind kind = ReportKind::semiannual;
    std::vector<Position> positions;
    std::optional<AssetWeights> asset_weights;
    /// Total stock-sleeve capital, present only when the source supplied
    /// position values.
    std::optional<double> stock_value;

    bool operator==(const HoldingsSnapshot&) const = default;
};

struct BenchmarkDefinition {
    std::string benchmark_id;
    Date as_of;
    std::vector<Position> constituents;
    std::optional<AssetWeights> asset_weights;

    bool operator==(const BenchmarkDefinition&) const = default;
};

struct FactorRow {
    double market_excess = 0.0;
    double smb = 0.0;
    double hml = 0.0;
    double risk_free = 0.0;

    double market_return() const { return market_excess + risk_free; }
    bool operator==(const FactorRow&) const = default;
};

/// Monthly market data on a contiguous grid. Every per-period vector has
/// `periods.size()` entries; absent observations are empty cells.
struct MarketPanel {
    std::vector<YearMonth> periods;
    std::map<std::string, std::vector<Cell>> stock_returns;
    /// Observed closes on the same grid, kept so the panel can be written
    /// back out without re-deriving prices from returns.
    std::map<std::string, std::vector<Cell>> stock_close;
    /// Month preceding `periods.front()`, holding each stock's base close.
    std::map<std::string, Cell> base_close;
    std::map<std::string, std::string> industry_of;
    std::vector<Cell> stock_market_return;
    std::vector<Cell> bond_market_return;
    std::vector<std::optional<FactorRow>> factors;
    std::map<std::string, std::vector<Cell>> fund_nav_return;
    std::map<std::string, std::vector<Cell>> benchmark_return;

    bool operator==(const MarketPanel&) const = default;

    bool empty() const { return periods.empty(); }

    /// Grid offset of `ym`, or nullopt outside the covered span.
    std::optional<std::size_t> offset(YearMonth ym) const {
        if (periods.empty()) return std::nullopt;
        int d = ym.index() - periods.front().index();
        if (d < 0 || d >= static_cast<int>(periods.size())) return std::nullopt;
        return static_cast<std::size_t>(d);
    }
};

// ---------------------------------------------------------------------------
// Validation

namespace codes {
inline constexpr const char* dup_stock = "DUP_STOCK";
inline constexpr const char* weight_range = "WEIGHT_RANGE";
inline constexpr const char* sleeve_sum = "SLEEVE_SUM";
inline constexpr const char* empty_positions = "EMPTY_POSITIONS";
} // namespace codes

inline bool in_unit_interval(double w) { return std::isfinite(w) && w >= 0.0 && w <= 1.0; }

/// Checks every HoldingsSnapshot invariant and returns all violations.
inline ValidationReport validate_snapshot(const HoldingsSnapshot& s) {
    ValidationReport r;
    r.subject_id = s.fund_id + "@" + s.report_date.to_string();

    std::set<std::string> seen;
    for (const auto& p : s.positions) {
        if (!seen.insert(p.stock_id).second)
            r.error(codes::dup_stock, "stock " + p.stock_id + " listed more than once");
        if (!in_unit_interval(p.weight))
            r.error(codes::weight_range, "weight of " + p.stock_id + " outside [0, 1]");
    }

    if (s.asset_weights) {
        const auto& a = *s.asset_weights;
        bool ranged = true;
        for (double w : {a.stock, a.bond, a.other}) {
            if (!in_unit_interval(w)) {
                r.error(codes::weight_range, "asset-class weight outside [0, 1]");
                ranged = false;
                break;
            }
        }
        if (ranged && a.stock + a.bond + a.other > 1.0 + 1e-9)
            r.error(codes::sleeve_sum, "asset-class weights sum above 1");
    }

    if (s.positions.empty() && s.kind == ReportKind::semiannual)
        r.error(codes::empty_positions, "semiannual snapshot without positions");
    return r;
}

/// Rescales position weights to within-stock-sleeve fractions summing to 1.
inline HoldingsSnapshot normalize_stock_sleeve(HoldingsSnapshot s) {
    double total = 0.0;
    for (const auto& p : s.positions) total += p.weight;
    if (!(total > 0.0))
        throw Error(Errc::empty_sleeve, "fund " + s.fund_id + " has no positive stock weight");
    // A sleeve that already sums to one up to accumulated rounding is left
    // untouched, so normalizing twice gives bit-identical weights.
    const double slack = 4.0 * static_cast<double>(s.positions.size()) * std::numeric_limits<double>::epsilon();
    if (std::abs(total - 1.0) <= slack) return s;
    for (auto& p : s.positions) p.weight /= total;
    return s;
}

} // namespace attrib
