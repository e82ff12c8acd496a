#pragma once

#include "attrib/core.hpp"
#include "attrib/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

namespace attrib {

namespace special {

/// Continued fraction for the incomplete beta function, modified Lentz.
inline double beta_continued_fraction(double a, double b, double x) {
    constexpr int max_iter = 20000;
    constexpr double eps = 1e-16;
    constexpr double tiny = 1e-300;
    const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::abs(d) < tiny) d = tiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= max_iter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < tiny) d = tiny;
        c = 1.0 + aa / c;
        if (std::abs(c) < tiny) c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

/// Regularized incomplete beta I_x(a, b). `y` must equal 1 − x; passing it
/// separately avoids cancellation when x is close to one.
inline double incomplete_beta(double a, double b, double x, double y) {
    if (x <= 0.0) return 0.0;
    if (y <= 0.0) return 1.0;
    const double log_front =
        std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
    const double front = std::exp(log_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_continued_fraction(a, b, x) / a;
    return 1.0 - front * beta_continued_fraction(b, a, y) / b;
}

inline double incomplete_beta(double a, double b, double x) { return incomplete_beta(a, b, x, 1.0 - x); }

} // namespace special

/// Student t cumulative distribution function with `df` degrees of freedom.
inline double t_cdf(double t, double df) {
    if (!(df > 0.0)) throw Error(Errc::invalid_argument, "degrees of freedom must be positive");
    if (std::isnan(t)) return t;
    if (t == 0.0) return 0.5;
    if (std::isinf(t)) return t > 0.0 ? 1.0 : 0.0;
    const double t2 = t * t;
    double x, y;
    if (t2 > 1e300) {
        x = 0.0;
        y = 1.0;
    } else {
        x = df / (df + t2);
        y = t2 / (df + t2);
    }
    const double tail = 0.5 * special::incomplete_beta(0.5 * df, 0.5, x, y);
    return t > 0.0 ? 1.0 - tail : tail;
}

/// Standard normal CDF.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// ---------------------------------------------------------------------------
// Tests

enum class Alternative { two_sided, greater, less };

inline std::string_view to_string(Alternative a) {
    switch (a) {
    case Alternative::two_sided: return "two_sided";
    case Alternative::greater: return "greater";
    case Alternative::less: return "less";
    }
    return "two_sided";
}

/// Degrees of freedom for the one-sample positivity test: n − 2 (the
/// convention this toolkit reproduces by default) or the textbook n − 1.
enum class DfConvention { paper, classical };

inline std::string_view to_string(DfConvention c) { return c == DfConvention::paper ? "n-2" : "n-1"; }

struct TestResult {
    double statistic = 0.0;
    double df = 0.0;
    double p_value = 1.0;
    Alternative alternative = Alternative::two_sided;

    bool reject_at(double level) const { return p_value < level; }
};

inline double p_value_for(double statistic, double df, Alternative alt) {
    if (std::isnan(statistic)) return 1.0;
    const double lower = t_cdf(statistic, df);
    const double upper = t_cdf(-statistic, df);
    switch (alt) {
    case Alternative::greater: return upper;
    case Alternative::less: return lower;
    case Alternative::two_sided: return std::min(1.0, 2.0 * std::min(lower, upper));
    }
    return 1.0;
}

struct SampleMoments {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0; ///< sample standard deviation, divisor n − 1
    bool constant = false;
};

inline SampleMoments moments(std::span<const double> x) {
    SampleMoments m;
    m.n = x.size();
    if (x.empty()) return m;
    m.mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
    double ss = 0.0;
    for (double v : x) ss += (v - m.mean) * (v - m.mean);
    m.sd = x.size() > 1 ? std::sqrt(ss / static_cast<double>(x.size() - 1)) : 0.0;
    auto [lo, hi] = std::minmax_element(x.begin(), x.end());
    m.constant = *lo == *hi;
    return m;
}

/// One-sample test of a positive mean: statistic √n·x̄/s against a t law
/// with n − 2 (or n − 1) degrees of freedom.
inline TestResult mean_positive_test(std::span<const double> series, DfConvention conv = DfConvention::paper,
                                     Alternative alt = Alternative::greater) {
    if (series.size() < 3) throw Error(Errc::too_few_obs, "positivity test needs at least 3 values");
    auto m = moments(series);
    if (m.constant || !(m.sd > 0.0)) throw Error(Errc::zero_variance, "series has zero sample variance");
    TestResult r;
    r.statistic = std::sqrt(static_cast<double>(m.n)) * m.mean / m.sd;
    r.df = static_cast<double>(m.n) - (conv == DfConvention::paper ? 2.0 : 1.0);
    r.alternative = alt;
    r.p_value = p_value_for(r.statistic, r.df, alt);
    return r;
}

/// t test of one regression coefficient against `null_value`.
inline TestResult coef_test(const RegressionFit& fit, std::string_view coef_name, double null_value,
                            Alternative alt) {
    const auto i = fit.index_of(coef_name);
    const double est = fit.coef[i];
    const double se = fit.stderr_[i];
    TestResult r;
    r.df = static_cast<double>(fit.df_resid);
    r.alternative = alt;
    if (se > 0.0) r.statistic = (est - null_value) / se;
    else if (est == null_value) r.statistic = 0.0;
    else r.statistic = est > null_value ? std::numeric_limits<double>::infinity()
                                        : -std::numeric_limits<double>::infinity();
    r.p_value = p_value_for(r.statistic, r.df, alt);
    return r;
}

struct CorrelationResult {
    double r = 0.0;
    std::size_t n = 0;
    double t_stat = 0.0;
    double p_value = 1.0; ///< two-sided
};

/// Two-sided significance of a sample correlation `r` over `n` pairs.
inline CorrelationResult correlation_significance(double r, std::size_t n) {
    if (n < 3) throw Error(Errc::too_few_obs, "correlation test needs at least 3 pairs");
    CorrelationResult c;
    c.r = std::clamp(r, -1.0, 1.0);
    c.n = n;
    if (1.0 - std::abs(c.r) <= 4.0 * std::numeric_limits<double>::epsilon()) {
        c.r = c.r > 0 ? 1.0 : -1.0;
        c.t_stat = c.r > 0 ? std::numeric_limits<double>::infinity() : -std::numeric_limits<double>::infinity();
        c.p_value = 0.0;
        return c;
    }
    const double df = static_cast<double>(n) - 2.0;
    c.t_stat = c.r * std::sqrt(df) / std::sqrt(1.0 - c.r * c.r);
    c.p_value = p_value_for(c.t_stat, df, Alternative::two_sided);
    return c;
}

inline CorrelationResult pearson_test(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw Error(Errc::length_mismatch, "pearson_test inputs differ in length");
    if (x.size() < 3) throw Error(Errc::too_few_obs, "correlation test needs at least 3 pairs");
    auto mx = moments(x);
    auto my = moments(y);
    if (mx.constant || my.constant) throw Error(Errc::zero_variance, "constant input to pearson_test");
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx.mean, dy = y[i] - my.mean;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return correlation_significance(sxy / std::sqrt(sxx * syy), x.size());
}

/// Significance stars used in the association tables.
inline std::string_view stars(double p) {
    if (p < 0.01) return "***";
    if (p < 0.05) return "**";
    if (p < 0.1) return "*";
    return "";
}

// ---------------------------------------------------------------------------
// Quantiles

/// Linear interpolation between order statistics at 1-based position
/// q(n − 1) + 1.
inline double quantile_sorted(std::span<const double> sorted, double q) {
    if (sorted.empty()) throw Error(Errc::invalid_argument, "quantile of an empty sample");
    const double h = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    if (lo + 1 >= sorted.size()) return sorted.back();
    const double a = sorted[lo], b = sorted[lo + 1];
    return std::clamp(a + (h - static_cast<double>(lo)) * (b - a), a, b);
}

struct BoxStats {
    std::size_t n = 0;
    double p2_5 = 0.0;
    double p25 = 0.0;
    double p50 = 0.0;
    double p75 = 0.0;
    double p97_5 = 0.0;

    /// The central 95% band contains zero.
    bool covers_zero() const { return p2_5 <= 0.0 && 0.0 <= p97_5; }
};

inline BoxStats box_stats(std::span<const double> sample) {
    std::vector<double> s(sample.begin(), sample.end());
    std::sort(s.begin(), s.end());
    return {s.size(),
            quantile_sorted(s, 0.025),
            quantile_sorted(s, 0.25),
            quantile_sorted(s, 0.5),
            quantile_sorted(s, 0.75),
            quantile_sorted(s, 0.975)};
}

// ---------------------------------------------------------------------------
// Cross-section

struct SummaryOptions {
    DfConvention df = DfConvention::paper;
    bool two_sided = false; ///< judge significance with a two-sided p and a positive mean
    double level = 0.10;
};

struct SummaryRow {
    std::string measure_tag;
    std::size_t n_funds = 0;
    double positive_proportion = 0.0;
    double significantly_positive_proportion = 0.0;
};

/// Share of funds whose series mean is positive, and share whose positivity
/// test rejects at `opt.level`. Series shorter than three values are not
/// counted; zero-variance series count in the denominator only.
inline SummaryRow cross_section_summary(const std::map<std::string, std::vector<double>>& per_fund,
                                        std::string measure_tag, const SummaryOptions& opt = {}) {
    SummaryRow row;
    row.measure_tag = std::move(measure_tag);
    std::size_t positive = 0, significant = 0;
    for (const auto& [fund, series] : per_fund) {
        if (series.size() < 3) continue;
        ++row.n_funds;
        auto m = moments(series);
        if (m.mean > 0.0) ++positive;
        try {
            auto t = mean_positive_test(series, opt.df, opt.two_sided ? Alternative::two_sided : Alternative::greater);
            if (t.reject_at(opt.level) && m.mean > 0.0) ++significant;
        } catch (const Error& e) {
            if (e.code() != Errc::zero_variance) throw;
        }
    }
    if (row.n_funds == 0) throw Error(Errc::empty_universe, "no fund with a usable " + row.measure_tag + " series");
    row.positive_proportion = static_cast<double>(positive) / static_cast<double>(row.n_funds);
    row.significantly_positive_proportion = static_cast<double>(significant) / static_cast<double>(row.n_funds);
    return row;
}

} // namespace attrib
