#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

namespace attrib {

/// Failure categories raised by library operations. The printable name of
/// each value is the short code used in reports and CLI diagnostics.
enum class Errc {
    io_read,
    csv_syntax,
    nonmonotonic_dates,
    empty_sleeve,
    missing_sleeve,
    missing_market,
    missing_benchmark,
    missing_nav,
    window_out_of_range,
    no_overlap,
    degenerate,
    rank_deficient,
    too_few_obs,
    alignment_gap,
    zero_variance,
    unknown_coef,
    length_mismatch,
    empty_universe,
    unknown_fund,
    invalid_argument,
};

constexpr std::string_view code_name(Errc e) {
    switch (e) {
    case Errc::io_read: return "IO_READ";
    case Errc::csv_syntax: return "CSV_SYNTAX";
    case Errc::nonmonotonic_dates: return "NONMONOTONIC_DATES";
    case Errc::empty_sleeve: return "EMPTY_SLEEVE";
    case Errc::missing_sleeve: return "MISSING_SLEEVE";
    case Errc::missing_market: return "MISSING_MARKET";
    case Errc::missing_benchmark: return "MISSING_BENCHMARK";
    case Errc::missing_nav: return "MISSING_NAV";
    case Errc::window_out_of_range: return "WINDOW_OUT_OF_RANGE";
    case Errc::no_overlap: return "NO_OVERLAP";
    case Errc::degenerate: return "DEGENERATE";
    case Errc::rank_deficient: return "RANK_DEFICIENT";
    case Errc::too_few_obs: return "TOO_FEW_OBS";
    case Errc::alignment_gap: return "ALIGNMENT_GAP";
    case Errc::zero_variance: return "ZERO_VARIANCE";
    case Errc::unknown_coef: return "UNKNOWN_COEF";
    case Errc::length_mismatch: return "LENGTH_MISMATCH";
    case Errc::empty_universe: return "EMPTY_UNIVERSE";
    case Errc::unknown_fund: return "UNKNOWN_FUND";
    case Errc::invalid_argument: return "INVALID_ARGUMENT";
    }
    return "UNKNOWN";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(code_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

/// One observation on the monthly grid; empty when missing.
using Cell = std::optional<double>;

// ---------------------------------------------------------------------------
// Calendar

/// A month on the monthly grid. `index()` is a dense ordinal so that
/// consecutive months differ by exactly one.
struct YearMonth {
    int year = 1970;
    int month = 1;

    constexpr int index() const { return year * 12 + (month - 1); }
    static constexpr YearMonth from_index(int idx) {
        int y = idx >= 0 ? idx / 12 : -((-idx + 11) / 12);
        return {y, idx - y * 12 + 1};
    }
    constexpr YearMonth plus(int months) const { return from_index(index() + months); }

    constexpr auto operator<=>(const YearMonth&) const = default;

    std::string to_string() const;
    static std::optional<YearMonth> parse(std::string_view s);
};

constexpr int days_in_month(int year, int month) {
    constexpr int table[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    if (month == 2 && ((year % 4 == 0 && year % 100 != 0) || year % 400 == 0)) return 29;
    return table[month - 1];
}

struct Date {
    int year = 1970;
    int month = 1;
    int day = 1;

    constexpr YearMonth year_month() const { return {year, month}; }
    constexpr auto operator<=>(const Date&) const = default;

    static constexpr Date month_end(YearMonth ym) {
        return {ym.year, ym.month, days_in_month(ym.year, ym.month)};
    }

    std::string to_string() const;
    /// Accepts YYYY-MM-DD only.
    static std::optional<Date> parse(std::string_view s);
};

namespace detail {

inline std::optional<int> parse_int(std::string_view s) {
    int v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

inline void append_padded(std::string& out, int v, int width) {
    std::string digits = std::to_string(v);
    for (int i = static_cast<int>(digits.size()); i < width; ++i) out.push_back('0');
    out += digits;
}

} // namespace detail

inline std::string YearMonth::to_string() const {
    std::string s;
    detail::append_padded(s, year, 4);
    s.push_back('-');
    detail::append_padded(s, month, 2);
    return s;
}

inline std::optional<YearMonth> YearMonth::parse(std::string_view s) {
    // YYYY-MM or YYYY-MM-DD; the day, when present, must be valid but is dropped.
    if (s.size() != 7 && s.size() != 10) return std::nullopt;
    if (s[4] != '-') return std::nullopt;
    auto y = detail::parse_int(s.substr(0, 4));
    auto m = detail::parse_int(s.substr(5, 2));
    if (!y || !m || *m < 1 || *m > 12) return std::nullopt;
    if (s.size() == 10) {
        if (!Date::parse(s)) return std::nullopt;
    }
    return YearMonth{*y, *m};
}

inline std::string Date::to_string() const {
    std::string s;
    detail::append_padded(s, year, 4);
    s.push_back('-');
    detail::append_padded(s, month, 2);
    s.push_back('-');
    detail::append_padded(s, day, 2);
    return s;
}

inline std::optional<Date> Date::parse(std::string_view s) {
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') return std::nullopt;
    auto y = detail::parse_int(s.substr(0, 4));
    auto m = detail::parse_int(s.substr(5, 2));
    auto d = detail::parse_int(s.substr(8, 2));
    if (!y || !m || !d || *m < 1 || *m > 12) return std::nullopt;
    if (*d < 1 || *d > days_in_month(*y, *m)) return std::nullopt;
    return Date{*y, *m, *d};
}

// ---------------------------------------------------------------------------
// Diagnostics

enum class Severity { error, warning };

struct Issue {
    Severity severity = Severity::error;
    std::string code;
    std::string message;
    int line = 0; ///< 1-based source line, 0 when not tied to a line

    bool is_error() const { return severity == Severity::error; }
};

struct ValidationReport {
    std::string subject_id;
    std::vector<Issue> issues;

    bool has_errors() const {
        for (const auto& i : issues)
            if (i.is_error()) return true;
        return false;
    }
    std::size_t count(std::string_view code) const {
        std::size_t n = 0;
        for (const auto& i : issues)
            if (i.code == code) ++n;
        return n;
    }
    void error(std::string code, std::string message, int line = 0) {
        issues.push_back({Severity::error, std::move(code), std::move(message), line});
    }
    void warn(std::string code, std::string message, int line = 0) {
        issues.push_back({Severity::warning, std::move(code), std::move(message), line});
    }
    void merge(const ValidationReport& other) {
        issues.insert(issues.end(), other.issues.begin(), other.issues.end());
    }
};

/// Shortest round-trip decimal representation; used for every number written
/// to disk so that reparsing reproduces the same double.
inline std::string format_double(double v) {
    char buf[64];
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
}

inline std::optional<double> parse_double(std::string_view s) {
    while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) return std::nullopt;
    return v;
}

} // namespace attrib
