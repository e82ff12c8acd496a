// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include "attrib/attrib.hpp"
#include "oracles.hpp"

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>

using namespace attrib;

namespace {

// Pinned tolerances and budgets.
constexpr double pearson_runtime_s = 1.0;
constexpr double additivity_tol = 1e-12;
constexpr double additivity_runtime_s = 5.0;
constexpr int additivity_cases = 10000;
constexpr int additivity_max_industries = 30;
constexpr double ols_rel_tol = 1e-10;
constexpr double ols_orth_tol = 1e-9;
constexpr int ols_cases = 1000;
constexpr double tcdf_tol = 1e-10;
constexpr double tcdf_symmetry_tol = 1e-12;
constexpr double size_lo = 0.07;
constexpr double size_hi = 0.13;
constexpr double size_level = 0.10;
constexpr double size_runtime_s = 60.0;
constexpr double recovery_p = 0.01;
constexpr double band_zero_tol = 1e-12;
constexpr double band_shift = -1e-4;

struct Verdict {
    bool pass = true;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Verdict pearson_reproduction() {
    struct Case {
        double r;
        std::size_t n;
        double p, tol; // tol < 0 means an upper bound on p
    };
    const Case cases[] = {{0.2158, 307, 0.0001, 0.00005},
                          {-0.1809, 243, 0.0047, 0.0003},
                          {0.1153, 431, 0.0167, 0.0005},
                          {0.3010, 191, 0.0001, -1}};
    Verdict v;
    const auto t0 = std::chrono::steady_clock::now();
    for (const auto& c : cases) {
        const double p = correlation_significance(c.r, c.n).p_value;
        const bool ok = c.tol < 0 ? p < c.p : std::abs(p - c.p) <= c.tol;
        v.pass &= ok;
        v.detail += fmt("(%.4f,%zu)->%.6f ", c.r, c.n, p);
    }
    const double dt = seconds_since(t0);
    v.pass &= dt < pearson_runtime_s;
    v.detail += fmt("in %.3fs", dt);
    return v;
}

Verdict brinson_additivity() {
    std::mt19937_64 rng(101);
    std::uniform_int_distribution<int> n_ind(1, additivity_max_industries);
    std::uniform_real_distribution<double> ret(-0.4, 0.6), raw(0.0, 1.0);
    double worst = 0.0;
    const auto t0 = std::chrono::steady_clock::now();
    for (int c = 0; c < additivity_cases; ++c) {
        IndustryBreakdown b;
        const int k = n_ind(rng);
        double fs = 0, bs = 0;
        std::vector<double> fw(k), bw(k);
        for (int i = 0; i < k; ++i) {
            // Some industries held by only one side.
            fw[i] = raw(rng) < 0.15 ? 0.0 : raw(rng);
            bw[i] = raw(rng) < 0.15 ? 0.0 : raw(rng);
            fs += fw[i];
            bs += bw[i];
        }
        if (fs == 0) fw[0] = fs = 1;
        if (bs == 0) bw[0] = bs = 1;
        for (int i = 0; i < k; ++i)
            b.rows["I" + std::to_string(i)] = {fw[i] / fs, fw[i] > 0 ? ret(rng) : 0.0, bw[i] / bs, bw[i] > 0 ? ret(rng) : 0.0};
        const auto r = attribute("F", b);
        worst = std::max(worst, std::abs(r.ss + r.ia + r.it - r.excess));
    }
    const double dt = seconds_since(t0);
    return {worst < additivity_tol && dt < additivity_runtime_s,
            fmt("%d breakdowns, max |ss+ia+it-excess| %.2e, %.3fs", additivity_cases, worst, dt)};
}

Verdict ols_equivalence() {
    std::mt19937_64 rng(202);
    std::uniform_int_distribution<int> kd(1, 6);
    std::normal_distribution<double> g(0.0, 1.0);
    double worst_rel = 0.0, worst_orth = 0.0;
    for (int c = 0; c < ols_cases; ++c) {
        const int k = kd(rng);
        const int n = std::uniform_int_distribution<int>(std::max(k + 2, 12), 200)(rng);
        Eigen::MatrixXd X(n, k);
        Eigen::VectorXd y(n);
        oracle::Matrix ox(n, std::vector<double>(k));
        std::vector<double> oy(n);
        std::vector<double> scale(k), truth(k);
        for (int j = 0; j < k; ++j) {
            scale[j] = std::pow(10.0, std::uniform_real_distribution<double>(-2, 1)(rng));
            truth[j] = g(rng);
        }
        for (int i = 0; i < n; ++i) {
            double yi = 0.1 * g(rng);
            for (int j = 0; j < k; ++j) {
                X(i, j) = ox[i][j] = j == 0 ? 1.0 : scale[j] * g(rng);
                yi += truth[j] * X(i, j);
            }
            y(i) = oy[i] = yi;
        }
        std::vector<std::string> names;
        for (int j = 0; j < k; ++j) names.push_back("b" + std::to_string(j));
        const auto fit = ols_fit(X, y, names);
        const auto [b, inv] = oracle::normal_equations(ox, oy);
        for (int j = 0; j < k; ++j)
            worst_rel = std::max(worst_rel, std::abs(fit.coef[j] - b[j]) / std::max(std::abs(b[j]), 1e-300));
        Eigen::VectorXd e = Eigen::Map<const Eigen::VectorXd>(fit.residuals.data(), n);
        const double scale_xy = X.cwiseAbs().maxCoeff() * y.cwiseAbs().maxCoeff() * n;
        worst_orth = std::max(worst_orth, (X.transpose() * e).cwiseAbs().maxCoeff() / scale_xy);
    }
    return {worst_rel < ols_rel_tol && worst_orth < ols_orth_tol,
            fmt("%d fits, max rel err %.2e, max |X'e|/scale %.2e", ols_cases, worst_rel, worst_orth)};
}

Verdict t_accuracy() {
    double worst = 0.0, worst_sym = 0.0;
    for (double df : {1.0, 2.0, 4.0, 10.0, 60.0, 305.0, 1000.0}) {
        for (int i = -160; i <= 160; ++i) {
            const double t = i * 0.05;
            worst = std::max(worst, std::abs(t_cdf(t, df) - oracle::t_cdf(t, df)));
            worst_sym = std::max(worst_sym, std::abs(t_cdf(t, df) + t_cdf(-t, df) - 1.0));
        }
    }
    return {worst < tcdf_tol && worst_sym < tcdf_symmetry_tol,
            fmt("max |err| %.2e, max symmetry defect %.2e", worst, worst_sym)};
}

/// Share of funds whose p-value falls below the test level.
double rejection_share(const std::vector<double>& p) {
    std::size_t k = 0;
    for (double x : p) k += x < size_level;
    return p.empty() ? 0.0 : static_cast<double>(k) / static_cast<double>(p.size());
}

std::pair<double, double> null_shares(const AttributionRun& run) {
    const auto series = measure_series(run, "ss");
    std::vector<double> pos, per;
    for (const auto& [f, s] : series) pos.push_back(mean_positive_test(s).p_value);
    for (const auto& row : compute_persistence(series).rows) per.push_back(row.test.p_value);
    return {rejection_share(pos), rejection_share(per)};
}

Verdict test_size() {
    const auto t0 = std::chrono::steady_clock::now();
    UniverseConfig c;
    c.seed = 1;
    c.n_funds = 1000;
    c.n_months = 2880; // 480 semiannual windows
    c.start_year = 1700;
    c.quarterly_reports = false;
    c.nav_noise = 0.0;
    const auto ws = universe_workspace(generate_universe(c));
    const auto run = compute_attribution(ws, ws.config, Direction::after, default_threads(), true, false);
    const auto [pos, per] = null_shares(run);

    // Same design at the length of a typical published sample, for reference only.
    c.n_months = 72;
    c.start_year = 2012;
    const auto short_ws = universe_workspace(generate_universe(c));
    const auto short_run = compute_attribution(short_ws, short_ws.config, Direction::after, default_threads(), true, false);
    const auto [spos, sper] = null_shares(short_run);

    const double dt = seconds_since(t0);
    const bool ok = pos >= size_lo && pos <= size_hi && per >= size_lo && per <= size_hi && dt < size_runtime_s;
    return {ok, fmt("%zu funds x %zu windows: positivity %.3f, persistence %.3f; 12 windows (info): %.3f, %.3f; %.1fs",
                    run.semi.funds.size(), run.semi.dates.size(), pos, per, spos, sper, dt)};
}

Verdict skill_recovery() {
    UniverseConfig sel;
    sel.seed = 1;
    sel.n_funds = 200;
    sel.skilled_share = 0.5;
    sel.skill.selection_drift = 0.005;
    const auto sws = universe_workspace(generate_universe(sel));
    const auto s = compute_association(sws, sws.config, "ss-alpha", default_threads());

    UniverseConfig tim;
    tim.seed = 1;
    tim.n_funds = 400;
    tim.n_months = 240;
    tim.start_year = 1998;
    tim.quarterly_reports = false;
    tim.skilled_share = 0.5;
    tim.skill.timing_gamma = 3.0;
    tim.holding_alignment = Direction::before;
    const auto tws = universe_workspace(generate_universe(tim));
    Config tc = tws.config;
    tc.end_year = 2017;
    tc.span_years = 20;
    const auto t = compute_association(tws, tc, "ia-timing", default_threads());

    const bool ok = s.correlation.r > 0 && s.correlation.p_value < recovery_p && t.correlation.r > 0 &&
                    t.correlation.p_value < recovery_p;
    return {ok, fmt("ss-alpha r=%.3f p=%.2e (n=%zu); ia-timing r=%.3f p=%.2e (n=%zu)", s.correlation.r,
                    s.correlation.p_value, s.correlation.n, t.correlation.r, t.correlation.p_value, t.correlation.n)};
}

Verdict holding_validity() {
    UniverseConfig c;
    c.seed = 1;
    c.nav_noise = 0.0;
    const auto u = generate_universe(c);
    auto ws = universe_workspace(u);
    const auto clean = compute_holding_diagnostics(ws, ws.config, Direction::after, default_threads());
    double worst_clean = 0.0;
    for (const auto& [d, b] : clean.bands) worst_clean = std::max({worst_clean, std::abs(b.p2_5), std::abs(b.p97_5)});

    // Switch portfolios two months into the window after the 2014-06 report
    // in 60% of the funds.
    auto shocked = u;
    for (std::size_t i = 0; i < shocked.funds.size(); ++i)
        if (i % 5 < 3) shocked = inject_trading_gap(std::move(shocked), shocked.funds[i].fund_id, {2014, 9});
    ws = universe_workspace(shocked);
    const auto dirty = compute_holding_diagnostics(ws, ws.config, Direction::after, default_threads());
    const Date target{2014, 6, 30};
    double shift = 0.0, worst_other = 0.0;
    for (const auto& [d, b] : dirty.bands) {
        if (d == target) shift = b.p50;
        else worst_other = std::max({worst_other, std::abs(b.p2_5), std::abs(b.p97_5)});
    }
    const bool ok = !clean.bands.empty() && worst_clean < band_zero_tol && shift < band_shift && worst_other < band_zero_tol &&
                    dirty.bands.count(target);
    return {ok, fmt("clean max |band| %.2e over %zu reports; injected median %.4f, other reports max |band| %.2e",
                    worst_clean, clean.bands.size(), shift, worst_other)};
}

Verdict determinism() {
    UniverseConfig c;
    c.seed = 1;
    c.n_funds = 40;
    c.skilled_share = 0.5;
    c.skill = {0.003, 1.5, 0.4, 0.002};
    const auto files = universe_files(generate_universe(c));
    if (files != universe_files(generate_universe(c))) return {false, "synth output differs between runs"};
    const auto ws = workspace_from_files(files);
    if (ws.report.has_errors()) return {false, "synthetic workspace failed validation"};

    std::vector<std::pair<std::string, RunOptions>> runs;
    auto add = [&](const std::string& cmd, std::function<void(RunOptions&)> tweak) {
        RunOptions o;
        o.config = ws.config;
        tweak(o);
        runs.emplace_back(cmd, o);
    };
    for (const auto& cmd : command_names()) {
        add(cmd, [](RunOptions&) {});
        add(cmd, [](RunOptions& o) {
            o.config.direction = Direction::after;
            o.config.df = DfConvention::classical;
            o.config.two_sided = true;
        });
    }
    for (auto m : {"ss", "ia", "it", "aa"}) {
        add("attribute", [m](RunOptions& o) { o.measure = m; });
        add("persistence", [m](RunOptions& o) { o.measure = m; });
    }
    add("validate-benchmark", [](RunOptions& o) { o.model = "ff"; });
    add("associate", [](RunOptions& o) { o.pair = "ss-alpha"; });

    std::size_t files_checked = 0;
    for (auto& [cmd, o] : runs) {
        o.threads = 1;
        const auto ref = run_command(cmd, ws, o);
        for (unsigned t : {1u, 3u, 8u}) {
            o.threads = t;
            if (run_command(cmd, ws, o).files != ref.files) return {false, cmd + " differs at " + std::to_string(t) + " threads"};
        }
        files_checked += ref.files.size();
    }
    return {true, fmt("%zu runs, %zu output files identical at 1/3/8 workers and on rerun", runs.size(), files_checked)};
}

} // namespace

int main() {
    const std::pair<const char*, Verdict (*)()> criteria[] = {
        {"1 pearson p-value reproduction", pearson_reproduction},
        {"2 brinson additivity", brinson_additivity},
        {"3 ols oracle equivalence", ols_equivalence},
        {"4 t-distribution accuracy", t_accuracy},
        {"5 size of test", test_size},
        {"6 skill recovery", skill_recovery},
        {"7 holding-validity diagnostic", holding_validity},
        {"8 determinism", determinism},
    };
    int failed = 0;
    for (const auto& [name, fn] : criteria) {
        Verdict v;
        try {
            v = fn();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        std::printf("%s %s: %s\n", v.pass ? "PASS" : "FAIL", name, v.detail.c_str());
        std::fflush(stdout);
        failed += !v.pass;
    }
    return failed ? 1 : 0;
}
