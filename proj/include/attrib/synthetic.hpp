#pragma once

#include "attrib/core.hpp"
#include "attrib/data_model.hpp"
#include "attrib/ingestion.hpp"
#include "attrib/rng.hpp"
#include "attrib/workspace.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace attrib {

/// Injected ability of one synthetic fund.
struct FundSkill {
    /// Expected monthly excess of held stocks over their industry, earned by
    /// tilting picks toward stocks that are about to outperform.
    double selection_drift = 0.0;
    /// Industry tilt toward high-beta industries per unit of upcoming
    /// six-month market excess; gives a convex payoff.
    double timing_gamma = 0.0;
    /// AR(1) coefficient of the per-window selection skill.
    double persistence_rho = 0.0;
    /// Innovation sd of the AR(1) selection skill (monthly units).
    double skill_noise = 0.0;
};

struct UniverseConfig {
    int n_funds = 50;
    int n_stocks = 60;
    int n_industries = 6;
    int n_months = 72; ///< multiple of six
    int start_year = 2012;
    std::uint64_t seed = 1;

    FundSkill skill;
    /// Share of funds carrying `skill`; the rest have none. Skilled funds are
    /// spread evenly through the fund list.
    double skilled_share = 1.0;

    int draws_per_industry = 2;
    /// Which six-month window the reported weights are actually held over.
    Direction holding_alignment = Direction::after;
    bool quarterly_reports = true;

    double risk_free = 0.002;
    double market_premium = 0.006;
    double market_vol = 0.045;
    double industry_vol = 0.02;
    double idio_vol = 0.05;
    double mispricing = 0.01; ///< ± monthly drift of the two halves of each industry
    double factor_vol = 0.02;
    double bond_vol = 0.003;
    double beta_low = 0.5;
    double beta_high = 1.5;
    double industry_weight_noise = 0.25;
    double sleeve_spread = 0.1;
    double nav_noise = 0.001; ///< monthly sd of NAV returns not explained by holdings
};

/// A portfolio switch: from `month` (grid index) to the end of its window the
/// fund holds only `target`.
struct TradeInjection {
    int month = 0;
    std::size_t target = 0;
};

struct SyntheticFund {
    std::string fund_id;
    std::string benchmark_id;
    FundSkill skill;
    std::vector<HoldingsSnapshot> semiannual; ///< one per held window, in window order
    std::vector<HoldingsSnapshot> quarterly;
    std::vector<std::vector<std::pair<std::size_t, double>>> held; ///< per window: stock index, weight
    std::vector<double> nav_noise;
    std::map<int, TradeInjection> trades; ///< keyed by window
    std::vector<double> nav_return;
};

struct Universe {
    UniverseConfig config;
    std::vector<YearMonth> months;
    std::vector<std::string> stock_ids;
    std::vector<std::string> industry_ids;
    std::vector<int> industry_of;
    std::vector<double> industry_beta;
    std::vector<double> shares;
    std::vector<std::vector<double>> close; ///< [stock][t + 1], t = -1 .. n_months - 1
    std::vector<std::vector<double>> ret;   ///< [stock][t], derived from adjacent closes
    std::vector<double> market_return;      ///< value-weighted stock return
    std::vector<double> bond_return;
    std::vector<FactorRow> factors;
    std::vector<BenchmarkDefinition> benchmarks;
    std::vector<SyntheticFund> funds;

    int n_windows() const { return config.n_months / 6; }
    /// Grid index of the semiannual report whose reported weights are held
    /// over window `w`.
    int report_month(int w) const {
        return config.holding_alignment == Direction::after ? 6 * w - 1 : 6 * w + 5;
    }
    YearMonth month_at(int t) const { return YearMonth{config.start_year, 1}.plus(t); }

    const SyntheticFund& fund(const std::string& id) const {
        for (const auto& f : funds)
            if (f.fund_id == id) return f;
        throw Error(Errc::unknown_fund, "no synthetic fund " + id);
    }
};

namespace synth_detail {

inline std::string numbered(char prefix, int i, int width) {
    std::string digits = std::to_string(i);
    return std::string(1, prefix) + std::string(static_cast<std::size_t>(std::max(0, width - static_cast<int>(digits.size()))), '0') + digits;
}

inline double cap(const Universe& u, std::size_t j, int t) { return u.shares[j] * u.close[j][static_cast<std::size_t>(t + 1)]; }

/// Buy-and-hold monthly NAV returns for one window, honoring an injected switch.
inline void window_nav(const Universe& u, SyntheticFund& f, int w) {
    const int t0 = 6 * w;
    double value = 0.0;
    for (auto [j, wt] : f.held[static_cast<std::size_t>(w)]) value += wt;
    std::vector<double> growth(f.held[static_cast<std::size_t>(w)].size(), 1.0);
    auto trade = f.trades.find(w);
    double switched = 0.0;
    for (int t = t0; t < t0 + 6; ++t) {
        double next = 0.0;
        if (trade != f.trades.end() && t >= trade->second.month) {
            if (t == trade->second.month) switched = value;
            switched *= 1.0 + u.ret[trade->second.target][static_cast<std::size_t>(t)];
            next = switched;
        } else {
            const auto& held = f.held[static_cast<std::size_t>(w)];
            for (std::size_t k = 0; k < held.size(); ++k) {
                growth[k] *= 1.0 + u.ret[held[k].first][static_cast<std::size_t>(t)];
                next += held[k].second * growth[k];
            }
        }
        f.nav_return[static_cast<std::size_t>(t)] = next / value - 1.0 + f.nav_noise[static_cast<std::size_t>(t)];
        value = next;
    }
}

inline void rebuild_nav(const Universe& u, SyntheticFund& f) {
    f.nav_return.assign(static_cast<std::size_t>(u.config.n_months), 0.0);
    for (int w = 0; w < u.n_windows(); ++w) window_nav(u, f, w);
}

inline void check(const UniverseConfig& c) {
    if (c.n_funds <= 0 || c.n_stocks <= 0 || c.n_industries <= 0 || c.n_months <= 0)
        throw Error(Errc::invalid_argument, "universe counts must be positive");
    if (c.n_months % 6 != 0 || c.n_months < 12)
        throw Error(Errc::invalid_argument, "n_months must be a multiple of 6 and at least 12");
    if (c.n_stocks < 2 * c.n_industries)
        throw Error(Errc::invalid_argument, "need at least two stocks per industry");
    if (!(std::abs(c.skill.persistence_rho) < 1.0))
        throw Error(Errc::invalid_argument, "persistence_rho must lie in (-1, 1)");
    if (c.draws_per_industry <= 0) throw Error(Errc::invalid_argument, "draws_per_industry must be positive");
    if (!(c.skilled_share >= 0.0 && c.skilled_share <= 1.0))
        throw Error(Errc::invalid_argument, "skilled_share must lie in [0, 1]");
}

} // namespace synth_detail

/// Deterministic synthetic universe.
///
/// Stock returns are the risk-free rate plus an industry beta times a common
/// market shock, an industry shock, idiosyncratic noise and a per-window
/// mispricing of ±`mispricing` that splits every industry in two halves. The
/// benchmark is the value-weighted universe. Each fund draws stocks within
/// every industry in proportion to capitalization; selection skill shifts
/// the draws toward the outperforming half and timing skill tilts industry
/// weights toward high-beta industries ahead of a rising market. NAV returns
/// are the buy-and-hold return of the reported weights over the held window
/// plus optional noise.
///
/// Every random quantity comes from its own SplitMix64 stream keyed by
/// (seed, entity, purpose, index).
inline Universe generate_universe(const UniverseConfig& cfg) {
    synth_detail::check(cfg);
    Universe u;
    u.config = cfg;
    const int T = cfg.n_months;
    const auto S = static_cast<std::size_t>(cfg.n_stocks);
    const auto I = static_cast<std::size_t>(cfg.n_industries);
    const int W = T / 6;
    for (int t = 0; t < T; ++t) u.months.push_back(u.month_at(t));

    for (std::size_t i = 0; i < I; ++i) {
        u.industry_ids.push_back(synth_detail::numbered('I', static_cast<int>(i + 1), 2));
        u.industry_beta.push_back(I == 1 ? 0.5 * (cfg.beta_low + cfg.beta_high)
                                         : cfg.beta_low + (cfg.beta_high - cfg.beta_low) * static_cast<double>(i) /
                                                              static_cast<double>(I - 1));
    }
    const int stock_width = std::max(4, static_cast<int>(std::to_string(cfg.n_stocks).size()));
    for (std::size_t j = 0; j < S; ++j) {
        u.stock_ids.push_back(synth_detail::numbered('S', static_cast<int>(j + 1), stock_width));
        u.industry_of.push_back(static_cast<int>(j % I));
        rng::Stream s(cfg.seed, u.stock_ids[j], "size");
        u.shares.push_back(std::exp(0.5 * s.normal()));
    }

    // Common shocks.
    std::vector<double> market(static_cast<std::size_t>(T));
    {
        rng::Stream s(cfg.seed, "market", "shock");
        for (auto& m : market) m = s.normal(cfg.market_premium, cfg.market_vol);
    }
    std::vector<std::vector<double>> ind_shock(I, std::vector<double>(static_cast<std::size_t>(T)));
    for (std::size_t i = 0; i < I; ++i) {
        rng::Stream s(cfg.seed, u.industry_ids[i], "shock");
        for (auto& v : ind_shock[i]) v = s.normal(0.0, cfg.industry_vol);
    }
    // Mispricing: per window and industry, a random half of the members drift up.
    std::vector<std::vector<double>> drift(static_cast<std::size_t>(W), std::vector<double>(S, 0.0));
    for (int w = 0; w < W; ++w) {
        for (std::size_t i = 0; i < I; ++i) {
            std::vector<std::size_t> members;
            for (std::size_t j = i; j < S; j += I) members.push_back(j);
            rng::Stream s(cfg.seed, u.industry_ids[i], "mispricing", static_cast<std::uint64_t>(w));
            for (std::size_t k = members.size(); k > 1; --k) std::swap(members[k - 1], members[s.below(k)]);
            for (std::size_t k = 0; k < members.size(); ++k)
                drift[static_cast<std::size_t>(w)][members[k]] = k < members.size() / 2 ? cfg.mispricing : -cfg.mispricing;
        }
    }

    u.close.assign(S, std::vector<double>(static_cast<std::size_t>(T + 1)));
    u.ret.assign(S, std::vector<double>(static_cast<std::size_t>(T)));
    for (std::size_t j = 0; j < S; ++j) {
        rng::Stream s(cfg.seed, u.stock_ids[j], "returns");
        const auto i = static_cast<std::size_t>(u.industry_of[j]);
        u.close[j][0] = 10.0 * std::exp(0.3 * rng::Stream(cfg.seed, u.stock_ids[j], "price").normal());
        for (int t = 0; t < T; ++t) {
            const auto k = static_cast<std::size_t>(t);
            double r = cfg.risk_free + u.industry_beta[i] * (market[k] - cfg.risk_free) + ind_shock[i][k] +
                       s.normal(0.0, cfg.idio_vol) + drift[k / 6][j];
            r = std::max(r, -0.95);
            u.close[j][k + 1] = u.close[j][k] * (1.0 + r);
            // The return actually used everywhere is the one recoverable from the two closes.
            u.ret[j][k] = u.close[j][k + 1] / u.close[j][k] - 1.0;
        }
    }

    u.market_return.resize(static_cast<std::size_t>(T));
    u.bond_return.resize(static_cast<std::size_t>(T));
    u.factors.resize(static_cast<std::size_t>(T));
    {
        rng::Stream bond(cfg.seed, "bond", "returns");
        rng::Stream fac(cfg.seed, "factors", "returns");
        for (int t = 0; t < T; ++t) {
            const auto k = static_cast<std::size_t>(t);
            double num = 0.0, den = 0.0;
            for (std::size_t j = 0; j < S; ++j) {
                const double c = synth_detail::cap(u, j, t - 1);
                num += c * u.ret[j][k];
                den += c;
            }
            u.market_return[k] = num / den;
            u.bond_return[k] = bond.normal(cfg.risk_free, cfg.bond_vol);
            const double smb = fac.normal(0.0, cfg.factor_vol);
            const double hml = fac.normal(0.0, cfg.factor_vol);
            u.factors[k] = FactorRow{u.market_return[k] - cfg.risk_free, smb, hml, cfg.risk_free};
        }
    }

    // Benchmark constituents at every June and December report month.
    const AssetWeights bench_sleeves = AssetWeights::from_sleeves(0.8, 0.2);
    for (int t = -1; t < T; t += 6) {
        BenchmarkDefinition b;
        b.benchmark_id = "BM";
        b.as_of = Date::month_end(u.month_at(t));
        double total = 0.0;
        for (std::size_t j = 0; j < S; ++j) total += synth_detail::cap(u, j, t);
        for (std::size_t j = 0; j < S; ++j) b.constituents.push_back({u.stock_ids[j], synth_detail::cap(u, j, t) / total});
        b.asset_weights = bench_sleeves;
        u.benchmarks.push_back(std::move(b));
    }

    // Cumulative market excess over each window, the quantity timers anticipate.
    std::vector<double> window_excess(static_cast<std::size_t>(W), 0.0);
    for (int t = 0; t < T; ++t) window_excess[static_cast<std::size_t>(t / 6)] += u.market_return[static_cast<std::size_t>(t)] - cfg.risk_free;

    const int fund_width = std::max(4, static_cast<int>(std::to_string(cfg.n_funds).size()));
    for (int n = 0; n < cfg.n_funds; ++n) {
        SyntheticFund f;
        f.fund_id = synth_detail::numbered('F', n + 1, fund_width);
        f.benchmark_id = "BM";
        const bool skilled = std::floor((n + 1) * cfg.skilled_share) > std::floor(n * cfg.skilled_share);
        if (skilled) f.skill = cfg.skill;

        rng::Stream skill_stream(cfg.seed, f.fund_id, "skill");
        const double rho = f.skill.persistence_rho;
        double z = f.skill.skill_noise > 0.0 ? skill_stream.normal(0.0, f.skill.skill_noise / std::sqrt(1.0 - rho * rho)) : 0.0;

        f.held.resize(static_cast<std::size_t>(W));
        for (int w = 0; w < W; ++w) {
            if (w > 0 && f.skill.skill_noise > 0.0) z = rho * z + skill_stream.normal(0.0, f.skill.skill_noise);
            const double delta = f.skill.selection_drift + z;
            const int t0 = 6 * w - 1; // weights are set on the closes of the month before the window

            std::vector<double> ind_cap(I, 0.0), plus_cap(I, 0.0);
            double total = 0.0;
            for (std::size_t j = 0; j < S; ++j) {
                const double c = synth_detail::cap(u, j, t0);
                const auto i = static_cast<std::size_t>(u.industry_of[j]);
                ind_cap[i] += c;
                if (drift[static_cast<std::size_t>(w)][j] > 0.0) plus_cap[i] += c;
                total += c;
            }
            double beta_bar = 0.0, z_bar = 0.0;
            std::vector<double> zi(I);
            rng::Stream tilt(cfg.seed, f.fund_id, "industry", static_cast<std::uint64_t>(w));
            for (std::size_t i = 0; i < I; ++i) {
                zi[i] = tilt.uniform(-1.0, 1.0);
                z_bar += ind_cap[i] / total * zi[i];
                beta_bar += ind_cap[i] / total * u.industry_beta[i];
            }
            const double a = std::clamp(f.skill.timing_gamma * window_excess[static_cast<std::size_t>(w)], -0.4, 0.4);

            std::map<std::size_t, double> weights;
            rng::Stream picks(cfg.seed, f.fund_id, "picks", static_cast<std::uint64_t>(w));
            for (std::size_t i = 0; i < I; ++i) {
                const double wi = ind_cap[i] / total *
                                  (1.0 + cfg.industry_weight_noise * (zi[i] - z_bar) + a * (u.industry_beta[i] - beta_bar));
                double p_plus = plus_cap[i] / ind_cap[i];
                if (cfg.mispricing > 0.0) p_plus = std::clamp(p_plus + delta / (2.0 * cfg.mispricing), 0.0, 1.0);
                for (int d = 0; d < cfg.draws_per_industry; ++d) {
                    const bool from_plus = picks.uniform() < p_plus;
                    double half = 0.0;
                    for (std::size_t j = i; j < S; j += I)
                        if ((drift[static_cast<std::size_t>(w)][j] > 0.0) == from_plus) half += synth_detail::cap(u, j, t0);
                    double target = picks.uniform() * half, acc = 0.0;
                    std::size_t chosen = S;
                    for (std::size_t j = i; j < S; j += I) {
                        if ((drift[static_cast<std::size_t>(w)][j] > 0.0) != from_plus) continue;
                        chosen = j;
                        acc += synth_detail::cap(u, j, t0);
                        if (target < acc) break;
                    }
                    weights[chosen] += wi / cfg.draws_per_industry;
                }
            }
            for (auto [j, wt] : weights) f.held[static_cast<std::size_t>(w)].emplace_back(j, wt);

            rng::Stream sleeves(cfg.seed, f.fund_id, "sleeves", static_cast<std::uint64_t>(w));
            HoldingsSnapshot snap;
            snap.fund_id = f.fund_id;
            snap.report_date = Date::month_end(u.month_at(u.report_month(w)));
            snap.kind = ReportKind::semiannual;
            for (auto [j, wt] : weights) snap.positions.push_back({u.stock_ids[j], wt});
            std::sort(snap.positions.begin(), snap.positions.end(),
                      [](const Position& x, const Position& y) { return x.stock_id < y.stock_id; });
            const double st = 0.8 + sleeves.uniform(-cfg.sleeve_spread, cfg.sleeve_spread);
            snap.asset_weights = AssetWeights::from_sleeves(st, 0.95 - st);
            f.semiannual.push_back(std::move(snap));

            if (cfg.quarterly_reports) {
                HoldingsSnapshot q;
                q.fund_id = f.fund_id;
                q.report_date = Date::month_end(u.month_at(6 * w + 2));
                q.kind = ReportKind::quarterly;
                const double qs = 0.8 + sleeves.uniform(-cfg.sleeve_spread, cfg.sleeve_spread);
                q.asset_weights = AssetWeights::from_sleeves(qs, 0.95 - qs);
                f.quarterly.push_back(std::move(q));
            }
        }

        f.nav_noise.assign(static_cast<std::size_t>(T), 0.0);
        if (cfg.nav_noise > 0.0) {
            rng::Stream s(cfg.seed, f.fund_id, "nav");
            for (auto& e : f.nav_noise) e = s.normal(0.0, cfg.nav_noise);
        }
        synth_detail::rebuild_nav(u, f);
        u.funds.push_back(std::move(f));
    }
    return u;
}

/// Makes `fund_id` switch its whole portfolio into one stock from
/// `trade_month` to the end of the window containing it, while its report
/// keeps showing the original weights. Without `target` the stock with the
/// best return over the remaining months is chosen.
inline Universe inject_trading_gap(Universe u, const std::string& fund_id, YearMonth trade_month,
                                   std::optional<std::string> target = std::nullopt) {
    auto it = std::find_if(u.funds.begin(), u.funds.end(), [&](const SyntheticFund& f) { return f.fund_id == fund_id; });
    if (it == u.funds.end()) throw Error(Errc::unknown_fund, "no synthetic fund " + fund_id);
    const int t = trade_month.index() - u.month_at(0).index();
    if (t < 0 || t >= u.config.n_months)
        throw Error(Errc::invalid_argument, "trade month " + trade_month.to_string() + " outside the universe");
    const int w = t / 6;
    std::size_t chosen = 0;
    if (target) {
        auto s = std::find(u.stock_ids.begin(), u.stock_ids.end(), *target);
        if (s == u.stock_ids.end()) throw Error(Errc::invalid_argument, "unknown stock " + *target);
        chosen = static_cast<std::size_t>(s - u.stock_ids.begin());
    } else {
        double best = -1.0;
        for (std::size_t j = 0; j < u.stock_ids.size(); ++j) {
            double g = 1.0;
            for (int m = t; m < 6 * w + 6; ++m) g *= 1.0 + u.ret[j][static_cast<std::size_t>(m)];
            if (g - 1.0 > best) {
                best = g - 1.0;
                chosen = j;
            }
        }
    }
    it->trades[w] = {t, chosen};
    synth_detail::window_nav(u, *it, w);
    return u;
}

/// Raw panel observations, in canonical order.
inline PanelInputs universe_panel_inputs(const Universe& u) {
    PanelInputs in;
    for (std::size_t j = 0; j < u.stock_ids.size(); ++j) {
        for (int t = -1; t < u.config.n_months; ++t)
            in.prices.push_back({u.stock_ids[j], u.month_at(t), u.close[j][static_cast<std::size_t>(t + 1)], 0});
        in.industries.emplace_back(u.stock_ids[j], u.industry_ids[static_cast<std::size_t>(u.industry_of[j])]);
    }
    for (int t = 0; t < u.config.n_months; ++t) in.factors.push_back({u.month_at(t), u.factors[static_cast<std::size_t>(t)], 0});
    for (const auto& f : u.funds)
        for (int t = 0; t < u.config.n_months; ++t) in.nav.push_back({f.fund_id, u.month_at(t), f.nav_return[static_cast<std::size_t>(t)], 0});
    for (int t = 0; t < u.config.n_months; ++t) in.index.push_back({"BM", u.month_at(t), u.market_return[static_cast<std::size_t>(t)], 0});
    for (int t = 0; t < u.config.n_months; ++t)
        in.index.push_back({std::string(bond_market_id), u.month_at(t), u.bond_return[static_cast<std::size_t>(t)], 0});
    for (int t = 0; t < u.config.n_months; ++t)
        in.index.push_back({std::string(stock_market_id), u.month_at(t), u.market_return[static_cast<std::size_t>(t)], 0});
    return in;
}

/// All snapshots, ordered by fund then date.
inline std::vector<HoldingsSnapshot> universe_holdings(const Universe& u) {
    std::vector<HoldingsSnapshot> out;
    for (const auto& f : u.funds) {
        std::vector<HoldingsSnapshot> mine = f.semiannual;
        mine.insert(mine.end(), f.quarterly.begin(), f.quarterly.end());
        std::sort(mine.begin(), mine.end(),
                  [](const HoldingsSnapshot& a, const HoldingsSnapshot& b) { return a.report_date < b.report_date; });
        out.insert(out.end(), std::make_move_iterator(mine.begin()), std::make_move_iterator(mine.end()));
    }
    return out;
}

inline std::map<std::string, std::string> universe_fund_map(const Universe& u) {
    std::map<std::string, std::string> m;
    for (const auto& f : u.funds) m[f.fund_id] = f.benchmark_id;
    return m;
}

/// Default run settings for a universe: windows on the side the holdings are
/// actually held.
inline Config universe_config(const Universe& u) {
    Config c;
    c.direction = u.config.holding_alignment;
    return c;
}

/// The eight input files plus workspace.toml, as file name to contents.
inline std::map<std::string, std::string> universe_files(const Universe& u, const Config& cfg) {
    std::map<std::string, std::string> files;
    auto panel = write_panel_inputs(universe_panel_inputs(u));
    files[holdings_file] = write_holdings_csv(universe_holdings(u));
    files[benchmark_file] = write_benchmark_csv(u.benchmarks);
    files[funds_file] = write_fund_map(universe_fund_map(u));
    files[prices_file] = std::move(panel.prices);
    files[industries_file] = std::move(panel.industries);
    files[factors_file] = std::move(panel.factors);
    files[nav_file] = std::move(panel.nav);
    files[index_file] = std::move(panel.index);
    files[config_file] = write_config(cfg);
    return files;
}

inline std::map<std::string, std::string> universe_files(const Universe& u) { return universe_files(u, universe_config(u)); }

/// Workspace built straight from the generator, skipping CSV text.
inline Workspace universe_workspace(const Universe& u, const Config& cfg) {
    Workspace ws;
    ws.config = cfg;
    ws.holdings = universe_holdings(u);
    ws.benchmarks = u.benchmarks;
    ws.fund_benchmark = universe_fund_map(u);
    auto p = build_market_panel(universe_panel_inputs(u), PanelOptions{cfg.gap_limit});
    ws.report = std::move(p.report);
    ws.report.subject_id = "synthetic universe";
    ws.panel = std::move(p.value);
    return ws;
}

inline Workspace universe_workspace(const Universe& u) { return universe_workspace(u, universe_config(u)); }

} // namespace attrib
