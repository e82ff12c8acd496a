#pragma once

#include "attrib/core.hpp"
#include "attrib/data_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

namespace attrib {

enum class ModelTag { generic, ff3, tm, bench_simple, bench_ff, excess_ff, persistence };

inline std::string_view to_string(ModelTag t) {
    switch (t) {
    case ModelTag::generic: return "generic";
    case ModelTag::ff3: return "ff3";
    case ModelTag::tm: return "tm";
    case ModelTag::bench_simple: return "bench_simple";
    case ModelTag::bench_ff: return "bench_ff";
    case ModelTag::excess_ff: return "excess_ff";
    case ModelTag::persistence: return "persistence";
    }
    return "generic";
}

struct RegressionFit {
    ModelTag model = ModelTag::generic;
    std::vector<std::string> names;
    std::vector<double> coef;
    std::vector<double> stderr_;
    std::vector<double> residuals;
    double residual_variance = 0.0;
    std::size_t n_obs = 0;
    std::size_t df_resid = 0;
    /// Fewer observations than the preferred five years of monthly data.
    bool short_sample = false;

    std::size_t index_of(std::string_view name) const {
        for (std::size_t i = 0; i < names.size(); ++i)
            if (names[i] == name) return i;
        throw Error(Errc::unknown_coef, "no coefficient named " + std::string(name));
    }
    bool has(std::string_view name) const { return std::find(names.begin(), names.end(), name) != names.end(); }
    double estimate(std::string_view name) const { return coef[index_of(name)]; }
    double standard_error(std::string_view name) const { return stderr_[index_of(name)]; }
    double t_stat(std::string_view name) const {
        auto i = index_of(name);
        return coef[i] / stderr_[i];
    }
};

/// Least squares via a thin SVD of the design.
///
/// The design must have more rows than columns and full column rank, judged
/// by the ratio of smallest to largest singular value (> 1e-10). Standard
/// errors are the homoskedastic ones, sqrt(diag(s² (XᵀX)⁻¹)) with
/// s² = RSS / (n − k).
inline RegressionFit ols_fit(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                             std::vector<std::string> names, ModelTag model = ModelTag::generic) {
    const auto n = design.rows();
    const auto k = design.cols();
    if (response.size() != n) throw Error(Errc::length_mismatch, "response length differs from design rows");
    if (static_cast<Eigen::Index>(names.size()) != k)
        throw Error(Errc::invalid_argument, "one name per design column required");
    if (k == 0 || n <= k)
        throw Error(Errc::too_few_obs, std::to_string(n) + " observations for " + std::to_string(k) + " coefficients");
    if (!design.allFinite() || !response.allFinite()) throw Error(Errc::invalid_argument, "non-finite regression input");

    Eigen::JacobiSVD<Eigen::MatrixXd> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& s = svd.singularValues();
    const double smax = s(0);
    const double smin = s(k - 1);
    if (!(smax > 0.0) || smin / smax <= 1e-10)
        throw Error(Errc::rank_deficient, "design condition too poor (singular value ratio " +
                                              format_double(smax > 0.0 ? smin / smax : 0.0) + ")");

    Eigen::VectorXd inv_s = s.cwiseInverse();
    Eigen::VectorXd beta = svd.matrixV() * (inv_s.asDiagonal() * (svd.matrixU().transpose() * response));
    Eigen::VectorXd resid = response - design * beta;

    RegressionFit fit;
    fit.model = model;
    fit.names = std::move(names);
    fit.n_obs = static_cast<std::size_t>(n);
    fit.df_resid = static_cast<std::size_t>(n - k);
    fit.residual_variance = resid.squaredNorm() / static_cast<double>(n - k);
    Eigen::VectorXd var_diag = svd.matrixV().cwiseAbs2() * inv_s.cwiseAbs2();
    fit.coef.assign(beta.data(), beta.data() + k);
    fit.residuals.assign(resid.data(), resid.data() + n);
    fit.stderr_.resize(static_cast<std::size_t>(k));
    for (Eigen::Index j = 0; j < k; ++j)
        fit.stderr_[static_cast<std::size_t>(j)] = std::sqrt(fit.residual_variance * var_diag(j));
    return fit;
}

// ---------------------------------------------------------------------------
// Dated series and alignment

template <typename T>
struct Dated {
    std::vector<YearMonth> months;
    std::vector<T> values;

    std::size_t size() const { return months.size(); }
    void push(YearMonth m, T v) {
        months.push_back(m);
        values.push_back(std::move(v));
    }
};

using ReturnSeries = Dated<double>;
using FactorSeries = Dated<FactorRow>;

struct RegressionOptions {
    std::size_t min_obs = 24;       ///< admission floor for monthly factor regressions
    std::size_t preferred_obs = 60; ///< below this the fit is flagged short_sample
    bool allow_gaps = false;
};

namespace detail {

template <typename T>
void check_increasing(const Dated<T>& s) {
    if (s.months.size() != s.values.size()) throw Error(Errc::length_mismatch, "months and values differ in length");
    for (std::size_t i = 1; i < s.months.size(); ++i)
        if (!(s.months[i - 1] < s.months[i])) throw Error(Errc::alignment_gap, "series months not increasing");
}

/// Index of every common month in each series; a hole in the common months
/// raises ALIGNMENT_GAP unless gaps are allowed.
template <typename... S>
std::vector<YearMonth> common_months(bool allow_gaps, const S&... series) {
    (check_increasing(series), ...);
    std::vector<YearMonth> common;
    bool first = true;
    auto intersect = [&](const auto& s) {
        if (first) {
            common = s.months;
            first = false;
            return;
        }
        std::vector<YearMonth> next;
        std::set_intersection(common.begin(), common.end(), s.months.begin(), s.months.end(),
                              std::back_inserter(next));
        common = std::move(next);
    };
    (intersect(series), ...);
    if (!allow_gaps)
        for (std::size_t i = 1; i < common.size(); ++i)
            if (common[i].index() != common[i - 1].index() + 1)
                throw Error(Errc::alignment_gap, "aligned series skip from " + common[i - 1].to_string() + " to " +
                                                     common[i].to_string());
    return common;
}

template <typename T>
std::vector<T> pick(const Dated<T>& s, const std::vector<YearMonth>& months) {
    std::vector<T> out;
    out.reserve(months.size());
    std::size_t j = 0;
    for (auto m : months) {
        while (s.months[j] < m) ++j;
        out.push_back(s.values[j]);
    }
    return out;
}

inline void check_min_obs(std::size_t n, const RegressionOptions& opt) {
    if (n < opt.min_obs)
        throw Error(Errc::too_few_obs,
                    std::to_string(n) + " aligned months, at least " + std::to_string(opt.min_obs) + " required");
}

inline RegressionFit finish(RegressionFit fit, const RegressionOptions& opt) {
    fit.short_sample = fit.n_obs < opt.preferred_obs;
    return fit;
}

} // namespace detail

/// r − r_f = α + β_m (r_m − r_f) + β_smb SMB + β_hml HML + ε
inline RegressionFit fit_fama_french(const ReturnSeries& fund_excess, const FactorSeries& factors,
                                     const RegressionOptions& opt = {}) {
    auto months = detail::common_months(opt.allow_gaps, fund_excess, factors);
    detail::check_min_obs(months.size(), opt);
    auto y = detail::pick(fund_excess, months);
    auto f = detail::pick(factors, months);
    const auto n = static_cast<Eigen::Index>(months.size());
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& r = f[static_cast<std::size_t>(i)];
        X.row(i) << 1.0, r.market_excess, r.smb, r.hml;
        Y(i) = y[static_cast<std::size_t>(i)];
    }
    return detail::finish(ols_fit(X, Y, {"alpha", "beta_m", "beta_smb", "beta_hml"}, ModelTag::ff3), opt);
}

/// r − r_f = α + β_m (r_m − r_f) + γ (r_m − r_f)² + ε
inline RegressionFit fit_treynor_mazuy(const ReturnSeries& fund_excess, const ReturnSeries& market_excess,
                                       const RegressionOptions& opt = {}) {
    auto months = detail::common_months(opt.allow_gaps, fund_excess, market_excess);
    detail::check_min_obs(months.size(), opt);
    auto y = detail::pick(fund_excess, months);
    auto m = detail::pick(market_excess, months);
    const auto n = static_cast<Eigen::Index>(months.size());
    Eigen::MatrixXd X(n, 3);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double x = m[static_cast<std::size_t>(i)];
        X.row(i) << 1.0, x, x * x;
        Y(i) = y[static_cast<std::size_t>(i)];
    }
    return detail::finish(ols_fit(X, Y, {"alpha", "beta_m", "gamma"}, ModelTag::tm), opt);
}

/// r = α + β_d r_d + ε
inline RegressionFit fit_benchmark_simple(const ReturnSeries& fund_return, const ReturnSeries& benchmark_return,
                                          const RegressionOptions& opt = {}) {
    auto months = detail::common_months(opt.allow_gaps, fund_return, benchmark_return);
    detail::check_min_obs(months.size(), opt);
    auto y = detail::pick(fund_return, months);
    auto d = detail::pick(benchmark_return, months);
    const auto n = static_cast<Eigen::Index>(months.size());
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X.row(i) << 1.0, d[static_cast<std::size_t>(i)];
        Y(i) = y[static_cast<std::size_t>(i)];
    }
    return detail::finish(ols_fit(X, Y, {"alpha", "beta_d"}, ModelTag::bench_simple), opt);
}

/// r = α + β_d r_d + β_smb SMB + β_hml HML + ε
inline RegressionFit fit_benchmark_ff(const ReturnSeries& fund_return, const ReturnSeries& benchmark_return,
                                      const FactorSeries& factors, const RegressionOptions& opt = {}) {
    auto months = detail::common_months(opt.allow_gaps, fund_return, benchmark_return, factors);
    detail::check_min_obs(months.size(), opt);
    auto y = detail::pick(fund_return, months);
    auto d = detail::pick(benchmark_return, months);
    auto f = detail::pick(factors, months);
    const auto n = static_cast<Eigen::Index>(months.size());
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        X.row(i) << 1.0, d[k], f[k].smb, f[k].hml;
        Y(i) = y[k];
    }
    return detail::finish(ols_fit(X, Y, {"alpha", "beta_d", "beta_smb", "beta_hml"}, ModelTag::bench_ff), opt);
}

/// r − r_d = α + β_m r_m + β_smb SMB + β_hml HML + ε, with r_m the raw
/// market return.
inline RegressionFit fit_excess_ff(const ReturnSeries& fund_return, const ReturnSeries& benchmark_return,
                                   const ReturnSeries& market_return, const FactorSeries& factors,
                                   const RegressionOptions& opt = {}) {
    auto months = detail::common_months(opt.allow_gaps, fund_return, benchmark_return, market_return, factors);
    detail::check_min_obs(months.size(), opt);
    auto y = detail::pick(fund_return, months);
    auto d = detail::pick(benchmark_return, months);
    auto m = detail::pick(market_return, months);
    auto f = detail::pick(factors, months);
    const auto n = static_cast<Eigen::Index>(months.size());
    Eigen::MatrixXd X(n, 4);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        X.row(i) << 1.0, m[k], f[k].smb, f[k].hml;
        Y(i) = y[k] - d[k];
    }
    return detail::finish(ols_fit(X, Y, {"alpha", "beta_m", "beta_smb", "beta_hml"}, ModelTag::excess_ff), opt);
}

/// value_t = α + β_1 value_{t−1} + ε over consecutive report pairs.
inline RegressionFit fit_persistence(std::span<const double> series) {
    if (series.size() < 4)
        throw Error(Errc::too_few_obs, "persistence needs at least 4 reports, got " + std::to_string(series.size()));
    const auto n = static_cast<Eigen::Index>(series.size() - 1);
    Eigen::MatrixXd X(n, 2);
    Eigen::VectorXd Y(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        X.row(i) << 1.0, series[static_cast<std::size_t>(i)];
        Y(i) = series[static_cast<std::size_t>(i) + 1];
    }
    return ols_fit(X, Y, {"alpha", "beta_1"}, ModelTag::persistence);
}

struct TrackingStats {
    double mean_diff = 0.0;
    double sd_diff = 0.0;
    double median_rel_diff = 0.0;
    std::size_t n_obs = 0;
    std::size_t n_rel_excluded = 0; ///< months with zero benchmark return left out of the median
};

namespace detail {
inline double median_of(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    auto m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}
} // namespace detail

/// Mean and sample standard deviation of r − r_d, and the median of
/// (r − r_d)/r_d.
inline TrackingStats tracking_stats(const ReturnSeries& fund_return, const ReturnSeries& benchmark_return,
                                    bool allow_gaps = false) {
    auto months = detail::common_months(allow_gaps, fund_return, benchmark_return);
    if (months.size() < 2) throw Error(Errc::too_few_obs, "tracking statistics need two aligned months");
    auto f = detail::pick(fund_return, months);
    auto d = detail::pick(benchmark_return, months);
    TrackingStats ts;
    ts.n_obs = months.size();
    double sum = 0.0;
    std::vector<double> diffs(months.size()), rel;
    for (std::size_t i = 0; i < months.size(); ++i) {
        diffs[i] = f[i] - d[i];
        sum += diffs[i];
        if (d[i] != 0.0) rel.push_back(diffs[i] / d[i]);
        else ++ts.n_rel_excluded;
    }
    ts.mean_diff = sum / static_cast<double>(diffs.size());
    double ss = 0.0;
    for (double x : diffs) ss += (x - ts.mean_diff) * (x - ts.mean_diff);
    ts.sd_diff = std::sqrt(ss / static_cast<double>(diffs.size() - 1));
    ts.median_rel_diff = detail::median_of(std::move(rel));
    return ts;
}

} // namespace attrib
