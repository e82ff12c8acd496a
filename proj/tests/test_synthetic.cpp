#include <gtest/gtest.h>

#include "attrib/pipeline.hpp"
#include "attrib/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

using namespace attrib;

namespace {

UniverseConfig small(std::uint64_t seed = 3) {
    UniverseConfig c;
    c.n_funds = 12;
    c.n_stocks = 24;
    c.n_industries = 4;
    c.n_months = 36;
    c.seed = seed;
    return c;
}

std::vector<double> ranks(const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
        for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<double>(i + j) + 1.0;
        i = j + 1;
    }
    return r;
}

double plain_correlation(const std::vector<double>& x, const std::vector<double>& y) {
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n, my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    return sxy / std::sqrt(sxx * syy);
}

double max_abs_diff(const Workspace& ws, Direction d) {
    auto run = compute_holding_diagnostics(ws, ws.config, d, 1);
    double m = 0.0;
    for (const auto& v : run.diffs) m = std::max(m, std::abs(v.diff));
    return m;
}

} // namespace

TEST(GenerateUniverse, SameSeedGivesIdenticalFiles) {
    auto a = universe_files(generate_universe(small()));
    auto b = universe_files(generate_universe(small()));
    EXPECT_EQ(a, b);
    EXPECT_EQ(a.size(), 9u);
    auto c = universe_files(generate_universe(small(4)));
    EXPECT_NE(a.at(prices_file), c.at(prices_file));
}

TEST(GenerateUniverse, AddingFundsLeavesExistingFundsUntouched) {
    auto c = small();
    auto a = generate_universe(c);
    c.n_funds = 20;
    auto b = generate_universe(c);
    for (std::size_t i = 0; i < a.funds.size(); ++i) {
        EXPECT_EQ(a.funds[i].fund_id, b.funds[i].fund_id);
        EXPECT_EQ(a.funds[i].semiannual, b.funds[i].semiannual);
        EXPECT_EQ(a.funds[i].nav_return, b.funds[i].nav_return);
    }
    EXPECT_EQ(a.close, b.close);
}

TEST(GenerateUniverse, CountsMatchConfig) {
    auto c = small();
    auto u = generate_universe(c);
    EXPECT_EQ(u.stock_ids.size(), 24u);
    EXPECT_EQ(u.industry_ids.size(), 4u);
    EXPECT_EQ(u.funds.size(), 12u);
    for (const auto& f : u.funds) {
        EXPECT_EQ(f.semiannual.size(), 6u);
        EXPECT_EQ(f.quarterly.size(), 6u);
        EXPECT_EQ(f.nav_return.size(), 36u);
        for (const auto& s : f.semiannual) {
            EXPECT_FALSE(validate_snapshot(s).has_errors());
            double w = 0;
            for (const auto& p : s.positions) w += p.weight;
            EXPECT_NEAR(w, 1.0, 1e-12);
        }
    }
    // One benchmark definition per June and December, from the month before the grid.
    EXPECT_EQ(u.benchmarks.size(), 7u);
    EXPECT_EQ(u.benchmarks.front().as_of, (Date{2011, 12, 31}));
}

TEST(GenerateUniverse, WorkspaceFromFilesMatchesInMemoryWorkspace) {
    auto u = generate_universe(small());
    auto direct = universe_workspace(u);
    auto parsed = workspace_from_files(universe_files(u));
    EXPECT_FALSE(parsed.report.has_errors());
    EXPECT_EQ(parsed.panel, direct.panel);
    EXPECT_EQ(parsed.holdings, direct.holdings);
    EXPECT_EQ(parsed.benchmarks, direct.benchmarks);
    EXPECT_EQ(parsed.fund_benchmark, direct.fund_benchmark);
    EXPECT_EQ(parsed.config.direction, Direction::after);
}

TEST(GenerateUniverse, BenchmarkIsValueWeightedUniverse) {
    auto u = generate_universe(small());
    auto ws = universe_workspace(u);
    // The benchmark index is the cap-weighted return, which equals the return
    // of the benchmark portfolio formed on the previous month's caps.
    const auto& def = u.benchmarks[1]; // 2012-06-30
    auto w = resolve_window(ws.panel, {def.as_of, Direction::after, 3});
    double bh = 0;
    for (const auto& c : def.constituents) bh += c.weight * w.per_stock.at(c.stock_id);
    double idx = 1;
    for (int t = 6; t < 9; ++t) idx *= 1 + u.market_return[static_cast<std::size_t>(t)];
    EXPECT_NEAR(bh, idx - 1, 1e-12);
}

TEST(GenerateUniverse, ZeroNoiseNavIsBuyAndHoldOfHoldings) {
    auto c = small();
    c.nav_noise = 0;
    auto ws = universe_workspace(generate_universe(c));
    EXPECT_LT(max_abs_diff(ws, Direction::after), 1e-12);
}

TEST(GenerateUniverse, RejectsInvalidConfig) {
    auto c = small();
    c.skill.persistence_rho = 1.0;
    EXPECT_THROW(generate_universe(c), Error);
    c = small();
    c.n_months = 40;
    EXPECT_THROW(generate_universe(c), Error);
    c = small();
    c.n_stocks = 7;
    EXPECT_THROW(generate_universe(c), Error);
    c = small();
    c.n_funds = 0;
    EXPECT_THROW(generate_universe(c), Error);
}

TEST(GenerateUniverse, ZeroSkillAlphasCenterOnZero) {
    UniverseConfig c;
    c.n_funds = 300;
    c.n_months = 120;
    c.seed = 17;
    auto ws = universe_workspace(generate_universe(c));
    FactorSeries f;
    for (std::size_t k = 0; k < ws.panel.periods.size(); ++k) f.push(ws.panel.periods[k], *ws.panel.factors[k]);
    double sum_t = 0, sum_abs = 0;
    for (const auto& [id, nav] : ws.panel.fund_nav_return) {
        ReturnSeries y;
        for (std::size_t k = 0; k < nav.size(); ++k) y.push(ws.panel.periods[k], *nav[k] - f.values[k].risk_free);
        auto fit = fit_fama_french(y, f);
        sum_t += fit.t_stat("alpha");
        sum_abs += std::abs(fit.t_stat("alpha"));
    }
    const double n = 300;
    // Under the null the t statistics are roughly standard normal: mean near
    // zero and mean absolute value near sqrt(2/pi).
    EXPECT_LT(std::abs(sum_t / n), 0.35);
    EXPECT_NEAR(sum_abs / n, std::sqrt(2 / std::numbers::pi), 0.2);
}

TEST(GenerateUniverse, SelectionDriftRanksSkilledFundsFirst) {
    UniverseConfig c;
    c.n_funds = 100;
    c.seed = 5;
    c.skilled_share = 0.5;
    c.skill.selection_drift = 0.005;
    auto u = generate_universe(c);
    auto ws = universe_workspace(u);
    auto run = compute_attribution(ws, ws.config, Direction::after, 2, true, false);
    auto ss = measure_series(run, "ss");
    std::vector<double> acc, skilled;
    for (const auto& f : u.funds) {
        acc.push_back(accumulate_geometric(ss.at(f.fund_id)));
        skilled.push_back(f.skill.selection_drift > 0 ? 1.0 : 0.0);
    }
    EXPECT_EQ(std::count(skilled.begin(), skilled.end(), 1.0), 50);
    EXPECT_GT(plain_correlation(ranks(acc), ranks(skilled)), 0.5);
}

TEST(InjectTradingGap, NavFollowsTargetAfterSwitch) {
    auto c = small();
    c.nav_noise = 0;
    auto u = generate_universe(c);
    const std::string fund = u.funds[2].fund_id;
    auto v = inject_trading_gap(u, fund, YearMonth{2013, 3}, std::string("S0005"));
    const int t = 14; // 2013-03
    const auto& before = u.fund(fund).nav_return;
    const auto& after = v.fund(fund).nav_return;
    for (int m = 0; m < 36; ++m) {
        const auto k = static_cast<std::size_t>(m);
        if (m >= t && m < 18) EXPECT_NEAR(after[k], u.ret[4][k], 1e-14) << m;
        else EXPECT_EQ(after[k], before[k]) << m;
    }
    // Other funds and the reported holdings are untouched.
    EXPECT_EQ(v.fund(fund).semiannual, u.fund(fund).semiannual);
    EXPECT_EQ(v.funds[0].nav_return, u.funds[0].nav_return);
}

TEST(InjectTradingGap, SwitchIntoWinnerMakesDiffNegative) {
    auto c = small();
    c.nav_noise = 0;
    auto u = generate_universe(c);
    const std::string fund = u.funds[0].fund_id;
    auto v = inject_trading_gap(u, fund, YearMonth{2013, 2});
    auto ws = universe_workspace(v);
    auto run = compute_holding_diagnostics(ws, ws.config, Direction::after, 1);
    for (const auto& d : run.diffs) {
        if (d.fund_id == fund && d.report_date == Date{2012, 12, 31}) {
            EXPECT_LT(d.diff, -1e-4);
            EXPECT_GT(d.actual_return, d.assumed_return);
        } else {
            EXPECT_LT(std::abs(d.diff), 1e-12);
        }
    }
}

TEST(InjectTradingGap, LateSwitchMovesLessThanEarlySwitch) {
    auto c = small();
    c.nav_noise = 0;
    auto u = generate_universe(c);
    // Each fund switches into the best remaining performer either in the first
    // or in the last month of the 2013H2 window; compare the average |diff|.
    auto mean_abs_diff = [&](YearMonth m) {
        auto v = u;
        for (const auto& f : u.funds) v = inject_trading_gap(std::move(v), f.fund_id, m);
        auto ws = universe_workspace(v);
        double s = 0;
        int n = 0;
        for (const auto& d : compute_holding_diagnostics(ws, ws.config, Direction::after, 1).diffs)
            if (d.report_date == Date{2013, 6, 30}) {
                s += std::abs(d.diff);
                ++n;
            }
        EXPECT_EQ(n, 12);
        return s / n;
    };
    const double early = mean_abs_diff({2013, 7}), late = mean_abs_diff({2013, 12});
    EXPECT_GT(early, late);
    EXPECT_GT(late, 0.0);
}

TEST(InjectTradingGap, Errors) {
    auto u = generate_universe(small());
    try {
        inject_trading_gap(u, "NOPE", {2013, 1});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::unknown_fund);
    }
    EXPECT_THROW(inject_trading_gap(u, u.funds[0].fund_id, {2009, 1}), Error);
    EXPECT_THROW(inject_trading_gap(u, u.funds[0].fund_id, {2013, 1}, std::string("S9999")), Error);
}

TEST(Rng, StreamsAreKeyedAndReproducible) {
    rng::Stream a(1, "F0001", "picks", 3), b(1, "F0001", "picks", 3), c(1, "F0001", "picks", 4);
    for (int i = 0; i < 10; ++i) {
        auto x = a.next();
        EXPECT_EQ(x, b.next());
        EXPECT_NE(x, c.next());
    }
    rng::Stream s(42, "x", "normal");
    double sum = 0, sq = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        double z = s.normal();
        sum += z;
        sq += z * z;
    }
    EXPECT_NEAR(sum / n, 0.0, 0.01);
    EXPECT_NEAR(sq / n, 1.0, 0.02);
    rng::Stream u(42, "x", "uniform");
    for (int i = 0; i < 1000; ++i) {
        double v = u.uniform();
        EXPECT_GE(v, 0.0);
        EXPECT_LT(v, 1.0);
        EXPECT_LT(u.below(7), 7u);
    }
}
