#pragma once

#include "attrib/brinson.hpp"
#include "attrib/core.hpp"
#include "attrib/csv.hpp"
#include "attrib/data_model.hpp"
#include "attrib/inference.hpp"
#include "attrib/ingestion.hpp"
#include "attrib/parallel.hpp"
#include "attrib/regression.hpp"
#include "attrib/workspace.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <tuple>
#include <vector>

namespace attrib {

using ordered_json = nlohmann::ordered_json;

struct RunOptions {
    Config config;
    unsigned threads = 1;
    std::optional<std::string> measure; ///< ss | ia | it | aa; all when empty
    std::string model = "simple";       ///< simple | ff
    std::string pair = "ia-timing";     ///< ia-timing | ss-alpha
};

/// Files produced by a command, keyed by file name, plus diagnostics.
struct Output {
    std::map<std::string, std::string> files;
    std::vector<std::string> notes;
};

struct Exclusion {
    std::string fund_id;
    std::string family;
    std::string reason;
};

// ---------------------------------------------------------------------------
// Sample selection

/// Inclusive month range a command works on.
struct SampleRange {
    YearMonth first;
    YearMonth last;

    bool contains(YearMonth a, YearMonth b) const { return !(a < first) && !(last < b); }
    int months() const { return last.index() - first.index() + 1; }
};

/// Calendar years end_year − span + 1 .. end_year clipped to the panel, or
/// the whole panel when no end year is set. With `last_full_year` the end
/// year defaults to the last year whose December is in the panel.
inline SampleRange sample_range(const MarketPanel& panel, const Config& cfg, bool last_full_year = false) {
    if (panel.periods.empty()) throw Error(Errc::empty_universe, "market panel is empty");
    const YearMonth lo = panel.periods.front(), hi = panel.periods.back();
    std::optional<int> end = cfg.end_year;
    if (!end && last_full_year) end = hi.month == 12 ? hi.year : hi.year - 1;
    if (!end) return {lo, hi};
    YearMonth first{*end - cfg.span_years + 1, 1}, last{*end, 12};
    first = std::max(first, lo);
    last = std::min(last, hi);
    if (last < first)
        throw Error(Errc::empty_universe, "sample years " + std::to_string(*end - cfg.span_years + 1) + ".." +
                                              std::to_string(*end) + " outside the market panel");
    return {first, last};
}

namespace pipeline_detail {

inline bool nav_complete(const MarketPanel& panel, const std::string& fund, const SampleRange& r) {
    auto it = panel.fund_nav_return.find(fund);
    if (it == panel.fund_nav_return.end()) return false;
    for (int m = r.first.index(); m <= r.last.index(); ++m) {
        auto k = panel.offset(YearMonth::from_index(m));
        if (!k || *k >= it->second.size() || !it->second[*k]) return false;
    }
    return true;
}

inline ReturnSeries cells_to_series(const MarketPanel& panel, const std::vector<Cell>& v, const SampleRange& r) {
    ReturnSeries s;
    for (int m = r.first.index(); m <= r.last.index(); ++m) {
        auto ym = YearMonth::from_index(m);
        auto k = panel.offset(ym);
        if (k && *k < v.size() && v[*k]) s.push(ym, *v[*k]);
    }
    return s;
}

inline FactorSeries factor_series(const MarketPanel& panel, const SampleRange& r) {
    FactorSeries s;
    for (int m = r.first.index(); m <= r.last.index(); ++m) {
        auto ym = YearMonth::from_index(m);
        auto k = panel.offset(ym);
        if (k && *k < panel.factors.size() && panel.factors[*k]) s.push(ym, *panel.factors[*k]);
    }
    return s;
}

/// Latest definition of each benchmark at or before a date.
class BenchmarkIndex {
public:
    explicit BenchmarkIndex(const Workspace& ws) : ws_(ws) {
        for (const auto& d : ws.benchmarks) by_id_[d.benchmark_id].push_back(&d);
        for (auto& [id, v] : by_id_)
            std::sort(v.begin(), v.end(), [](auto* a, auto* b) { return a->as_of < b->as_of; });
    }

    const BenchmarkDefinition& for_fund(const std::string& fund, const Date& date) const {
        auto m = ws_.fund_benchmark.find(fund);
        if (m == ws_.fund_benchmark.end()) throw Error(Errc::missing_benchmark, "fund " + fund + " has no benchmark mapping");
        auto it = by_id_.find(m->second);
        if (it == by_id_.end()) throw Error(Errc::missing_benchmark, "benchmark " + m->second + " has no constituents");
        const BenchmarkDefinition* best = nullptr;
        for (auto* d : it->second)
            if (!(date < d->as_of)) best = d;
        if (!best)
            throw Error(Errc::missing_benchmark,
                        "benchmark " + m->second + " not defined on or before " + date.to_string());
        return *best;
    }

private:
    const Workspace& ws_;
    std::map<std::string, std::vector<const BenchmarkDefinition*>> by_id_;
};

/// Snapshots keyed by fund and date.
inline std::map<std::string, std::map<Date, const HoldingsSnapshot*>> snapshots_by_fund(const Workspace& ws) {
    std::map<std::string, std::map<Date, const HoldingsSnapshot*>> m;
    for (const auto& s : ws.holdings) m[s.fund_id][s.report_date] = &s;
    return m;
}

/// Resolved windows shared by every fund, computed once before fan-out.
class WindowCache {
public:
    WindowCache(const MarketPanel& panel) : panel_(panel) {}

    void prepare(const Date& d, Direction dir, int horizon) {
        auto key = std::make_tuple(d, dir, horizon);
        if (cache_.count(key)) return;
        cache_.emplace(key, std::make_shared<WindowReturns>(resolve_window(panel_, {d, dir, horizon})));
    }
    const WindowReturns& get(const Date& d, Direction dir, int horizon) const {
        return *cache_.at(std::make_tuple(d, dir, horizon));
    }

private:
    const MarketPanel& panel_;
    std::map<std::tuple<Date, Direction, int>, std::shared_ptr<const WindowReturns>> cache_;
};

inline void fingerprint(csv::Writer& w, const Config& c, Direction d) {
    w.field(to_string(c.df)).field(to_string(d));
}

inline std::vector<std::string> with_fingerprint(std::vector<std::string> header) {
    header.push_back("df_convention");
    header.push_back("direction");
    return header;
}

inline std::string excluded_csv(const std::vector<Exclusion>& ex) {
    csv::Writer w({"fund_id", "family", "reason"});
    for (const auto& e : ex) w.field(e.fund_id).field(e.family).field(e.reason).end_row();
    return w.str();
}

inline ordered_json excluded_json(const std::vector<Exclusion>& ex) {
    auto a = ordered_json::array();
    for (const auto& e : ex) a.push_back({{"fund_id", e.fund_id}, {"family", e.family}, {"reason", e.reason}});
    return a;
}

inline ordered_json header_json(std::string_view command, const Config& c, Direction d) {
    return {{"command", command}, {"df_convention", to_string(c.df)}, {"direction", to_string(d)}};
}

inline std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

inline double share(std::size_t k, std::size_t n) { return n ? static_cast<double>(k) / static_cast<double>(n) : 0.0; }

} // namespace pipeline_detail

// ---------------------------------------------------------------------------
// Attribution over a continuous-performance sample

/// Report dates a family needs and the funds that have all of them.
struct FamilySample {
    std::string family;
    SampleRange range;
    std::vector<Date> dates;
    std::vector<std::string> funds;
};

struct AttributionRun {
    Direction direction = Direction::before;
    FamilySample semi;
    FamilySample quarterly;
    std::vector<AttributionRecord> records;        ///< fund then date
    std::vector<AssetAllocationRecord> aa_records; ///< fund then date
    std::vector<Exclusion> excluded;
};

inline double measure_of(const AttributionRecord& r, std::string_view m) {
    if (m == "ss") return r.ss;
    if (m == "ia") return r.ia;
    if (m == "it") return r.it;
    if (m == "excess") return r.excess;
    throw Error(Errc::invalid_argument, "unknown measure " + std::string(m));
}

/// Per-fund series of one measure in date order.
inline std::map<std::string, std::vector<double>> measure_series(const AttributionRun& run, std::string_view m) {
    std::map<std::string, std::vector<double>> out;
    if (m == "aa") {
        for (const auto& r : run.aa_records) out[r.fund_id].push_back(r.aa);
    } else {
        for (const auto& r : run.records) out[r.fund_id].push_back(measure_of(r, m));
    }
    return out;
}

/// Brinson measures on six-month windows of semiannual reports and asset
/// allocation on three-month after-windows of every report carrying
/// asset-class weights. A fund stays in a family only if it reports on every
/// sample date of that family, has complete NAV returns over the sample
/// range and every measure is computable; otherwise it is listed in
/// `excluded` with the reason.
inline AttributionRun compute_attribution(const Workspace& ws, const Config& cfg, Direction direction,
                                          unsigned threads, bool semiannual = true, bool quarterly = true,
                                          std::optional<SampleRange> range = std::nullopt) {
    using namespace pipeline_detail;
    AttributionRun run;
    run.direction = direction;
    const SampleRange r = range ? *range : sample_range(ws.panel, cfg);
    auto by_fund = snapshots_by_fund(ws);
    BenchmarkIndex bench(ws);
    WindowCache windows(ws.panel);

    auto pick_dates = [&](FamilySample& fam, auto qualifies, Direction dir, int horizon) {
        fam.range = r;
        std::set<Date> dates;
        for (const auto& s : ws.holdings) {
            if (!qualifies(s)) continue;
            auto [a, b] = window_months({s.report_date, dir, horizon});
            if (r.contains(a, b) && ws.panel.offset(a) && ws.panel.offset(b)) dates.insert(s.report_date);
        }
        fam.dates.assign(dates.begin(), dates.end());
        for (const auto& d : fam.dates) windows.prepare(d, dir, horizon);
    };
    auto is_semi = [](const HoldingsSnapshot& s) { return s.kind == ReportKind::semiannual && !s.positions.empty(); };
    auto has_sleeves = [](const HoldingsSnapshot& s) { return s.asset_weights.has_value(); };
    run.semi.family = "semiannual";
    run.quarterly.family = "asset_allocation";
    if (semiannual) pick_dates(run.semi, is_semi, direction, 6);
    if (quarterly) pick_dates(run.quarterly, has_sleeves, Direction::after, 3);

    std::vector<std::string> funds;
    for (const auto& [f, snaps] : by_fund) funds.push_back(f);

    struct FundResult {
        std::vector<AttributionRecord> records;
        std::vector<AssetAllocationRecord> aa;
        std::optional<std::string> semi_reason, aa_reason;
    };
    std::vector<FundResult> results(funds.size());
    parallel_for(funds.size(), threads, [&](std::size_t i) {
        const auto& fund = funds[i];
        const auto& snaps = by_fund.at(fund);
        auto& out = results[i];
        const bool nav_ok = nav_complete(ws.panel, fund, r);
        auto find = [&](const Date& d, auto qualifies) -> const HoldingsSnapshot* {
            auto it = snaps.find(d);
            return it != snaps.end() && qualifies(*it->second) ? it->second : nullptr;
        };
        if (semiannual && !run.semi.dates.empty()) {
            try {
                if (!nav_ok) throw Error(Errc::missing_nav, "NAV returns incomplete over the sample");
                for (const auto& d : run.semi.dates) {
                    auto s = find(d, is_semi);
                    if (!s) throw Error(Errc::empty_sleeve, "no semiannual holdings on " + d.to_string());
                    const auto& w = windows.get(d, direction, 6);
                    auto b = build_breakdown(normalize_stock_sleeve(*s), bench.for_fund(fund, d), ws.panel.industry_of, w,
                                             direction);
                    out.records.push_back(attribute(fund, b));
                }
            } catch (const Error& e) {
                out.records.clear();
                out.semi_reason = e.what();
            }
        }
        if (quarterly && !run.quarterly.dates.empty()) {
            try {
                if (!nav_ok) throw Error(Errc::missing_nav, "NAV returns incomplete over the sample");
                for (const auto& d : run.quarterly.dates) {
                    auto s = find(d, has_sleeves);
                    if (!s) throw Error(Errc::missing_sleeve, "no asset-class weights on " + d.to_string());
                    out.aa.push_back(asset_allocation(*s, bench.for_fund(fund, d), windows.get(d, Direction::after, 3)));
                }
            } catch (const Error& e) {
                out.aa.clear();
                out.aa_reason = e.what();
            }
        }
    });

    for (std::size_t i = 0; i < funds.size(); ++i) {
        auto& res = results[i];
        if (semiannual && !run.semi.dates.empty()) {
            if (res.semi_reason) run.excluded.push_back({funds[i], run.semi.family, *res.semi_reason});
            else run.semi.funds.push_back(funds[i]);
        }
        if (quarterly && !run.quarterly.dates.empty()) {
            if (res.aa_reason) run.excluded.push_back({funds[i], run.quarterly.family, *res.aa_reason});
            else run.quarterly.funds.push_back(funds[i]);
        }
        std::move(res.records.begin(), res.records.end(), std::back_inserter(run.records));
        std::move(res.aa.begin(), res.aa.end(), std::back_inserter(run.aa_records));
    }
    return run;
}

// ---------------------------------------------------------------------------
// Commands

/// Holdings summary per semiannual report date: fund count, average number
/// of stocks and, when a value column was supplied, average stock-sleeve size.
inline Output cmd_summarize(const Workspace& ws, const RunOptions& opt) {
    using namespace pipeline_detail;
    Output out;
    const auto dir = opt.config.direction;
    struct Acc {
        std::size_t funds = 0, stocks = 0, valued = 0;
        double value = 0.0;
    };
    std::map<Date, Acc> by_date;
    bool any_value = false;
    for (const auto& s : ws.holdings) {
        if (s.kind != ReportKind::semiannual || s.positions.empty()) continue;
        auto& a = by_date[s.report_date];
        ++a.funds;
        a.stocks += s.positions.size();
        if (s.stock_value) {
            any_value = true;
            ++a.valued;
            a.value += *s.stock_value;
        }
    }
    std::vector<std::string> header = {"report_date", "n_funds", "avg_n_stocks"};
    if (any_value) header.push_back("avg_stock_value");
    csv::Writer w(with_fingerprint(header));
    auto j = header_json("summarize", opt.config, dir);
    auto rows = ordered_json::array();
    for (const auto& [d, a] : by_date) {
        const double avg = static_cast<double>(a.stocks) / static_cast<double>(a.funds);
        w.field(d.to_string()).field(a.funds).field(avg);
        ordered_json row = {{"report_date", d.to_string()}, {"n_funds", a.funds}, {"avg_n_stocks", avg}};
        if (any_value) {
            Cell v;
            if (a.valued) v = a.value / static_cast<double>(a.valued);
            w.field(v);
            row["avg_stock_value"] = v ? ordered_json(*v) : ordered_json(nullptr);
        }
        fingerprint(w, opt.config, dir);
        w.end_row();
        rows.push_back(std::move(row));
    }
    if (!any_value) out.notes.push_back("holdings carry no value column; average size omitted");
    j["rows"] = std::move(rows);
    j["notes"] = out.notes;
    out.files["summary.csv"] = w.str();
    out.files["summary.json"] = dump(j);
    return out;
}

/// Per-fund, per-report attribution rows, the four-measure cross-section
/// table and the per-report share of funds with a positive measure.
inline Output cmd_attribute(const Workspace& ws, const RunOptions& opt) {
    using namespace pipeline_detail;
    Output out;
    const auto& cfg = opt.config;
    const auto dir = cfg.direction;
    std::vector<std::string> measures = {"ss", "ia", "it", "aa"};
    if (opt.measure) {
        if (std::find(measures.begin(), measures.end(), *opt.measure) == measures.end())
            throw Error(Errc::invalid_argument, "unknown measure " + *opt.measure);
        measures = {*opt.measure};
    }
    const bool want_aa = std::find(measures.begin(), measures.end(), "aa") != measures.end();
    const bool want_semi = measures.size() > 1 || measures.front() != "aa";
    auto run = compute_attribution(ws, cfg, dir, opt.threads, want_semi, want_aa);

    csv::Writer rows(with_fingerprint(
        {"fund_id", "report_date", "window_start", "window_end", "measure", "value", "additivity_residual"}));
    // Rows sorted by fund, then date, then measure name.
    struct Line {
        std::string fund;
        Date date;
        std::string measure;
        YearMonth a, b;
        double value;
        Cell resid;
    };
    std::vector<Line> lines;
    if (want_semi) {
        for (const auto& r : run.records) {
            auto [a, b] = window_months({r.report_date, dir, 6});
            const double resid = r.ss + r.ia + r.it - r.excess;
            for (std::string_view m : {"excess", "ia", "it", "ss"})
                if (m == "excess" || std::find(measures.begin(), measures.end(), m) != measures.end())
                    lines.push_back({r.fund_id, r.report_date, std::string(m), a, b, measure_of(r, m), resid});
        }
    }
    if (want_aa) {
        for (const auto& r : run.aa_records) {
            auto [a, b] = window_months({r.quarter_date, Direction::after, 3});
            lines.push_back({r.fund_id, r.quarter_date, "aa", a, b, r.aa, std::nullopt});
        }
    }
    std::sort(lines.begin(), lines.end(), [](const Line& x, const Line& y) {
        return std::tie(x.fund, x.date, x.measure) < std::tie(y.fund, y.date, y.measure);
    });
    for (const auto& l : lines) {
        rows.field(l.fund).field(l.date.to_string()).field(l.a.to_string()).field(l.b.to_string()).field(l.measure)
            .field(l.value).field(l.resid);
        fingerprint(rows, cfg, dir);
        rows.end_row();
    }

    csv::Writer table(with_fingerprint({"measure", "n_funds", "positive_proportion",
                                        "significantly_positive_proportion", "significantly_positive_proportion_strict",
                                        "level", "level_strict", "alternative"}));
    csv::Writer shares(with_fingerprint({"measure", "report_date", "n_funds", "positive_share"}));
    auto j = header_json("attribute", cfg, dir);
    j["sample"] = {{"first", run.semi.range.first.to_string()}, {"last", run.semi.range.last.to_string()}};
    auto jm = ordered_json::object();
    const std::string alt = cfg.two_sided ? "two_sided" : "greater";
    for (const auto& m : measures) {
        auto series = measure_series(run, m);
        SummaryOptions so{cfg.df, cfg.two_sided, cfg.level};
        std::optional<SummaryRow> row, strict;
        try {
            row = cross_section_summary(series, m, so);
            so.level = cfg.level_strict;
            strict = cross_section_summary(series, m, so);
        } catch (const Error& e) {
            if (e.code() != Errc::empty_universe) throw;
            out.notes.push_back(std::string("measure ") + m + ": " + e.what());
        }
        table.field(m).field(row ? row->n_funds : std::size_t{0});
        if (row)
            table.field(row->positive_proportion).field(row->significantly_positive_proportion)
                .field(strict->significantly_positive_proportion);
        else
            table.field("").field("").field("");
        table.field(cfg.level).field(cfg.level_strict).field(alt);
        fingerprint(table, cfg, dir);
        table.end_row();

        // Positive share per report date across the sample funds.
        std::map<Date, std::pair<std::size_t, std::size_t>> per_date;
        if (m == "aa") {
            for (const auto& r : run.aa_records) {
                auto& c = per_date[r.quarter_date];
                ++c.first;
                if (r.aa > 0.0) ++c.second;
            }
        } else {
            for (const auto& r : run.records) {
                auto& c = per_date[r.report_date];
                ++c.first;
                if (measure_of(r, m) > 0.0) ++c.second;
            }
        }
        auto js = ordered_json::array();
        for (const auto& [d, c] : per_date) {
            shares.field(m).field(d.to_string()).field(c.first).field(share(c.second, c.first));
            fingerprint(shares, cfg, dir);
            shares.end_row();
            js.push_back({{"report_date", d.to_string()}, {"n_funds", c.first}, {"positive_share", share(c.second, c.first)}});
        }
        ordered_json entry = {{"n_funds", row ? row->n_funds : 0}};
        entry["positive_proportion"] = row ? ordered_json(row->positive_proportion) : ordered_json(nullptr);
        entry["significantly_positive_proportion"] =
            row ? ordered_json(row->significantly_positive_proportion) : ordered_json(nullptr);
        entry["significantly_positive_proportion_strict"] =
            strict ? ordered_json(strict->significantly_positive_proportion) : ordered_json(nullptr);
        entry["positive_share"] = std::move(js);
        jm[m] = std::move(entry);
    }
    j["level"] = cfg.level;
    j["level_strict"] = cfg.level_strict;
    j["alternative"] = alt;
    j["measures"] = std::move(jm);
    j["excluded"] = excluded_json(run.excluded);
    j["notes"] = out.notes;
    out.files["attribution.csv"] = rows.str();
    out.files["table4.csv"] = table.str();
    out.files["positive_share.csv"] = shares.str();
    out.files["excluded.csv"] = excluded_csv(run.excluded);
    out.files["attribute.json"] = dump(j);
    return out;
}

struct BenchmarkFitRow {
    std::string fund_id;
    std::string benchmark_id;
    RegressionFit fit;
    TestResult beta_test;
    TrackingStats tracking;
};

struct BenchmarkRun {
    SampleRange range;
    std::vector<BenchmarkFitRow> rows;
    std::vector<Exclusion> excluded;
};

/// Regression of each fund's monthly NAV return on its benchmark index
/// (optionally with SMB and HML) and the two-sided test of beta_d = 1.
inline BenchmarkRun compute_benchmark_validation(const Workspace& ws, const Config& cfg, const std::string& model,
                                                 unsigned threads) {
    using namespace pipeline_detail;
    if (model != "simple" && model != "ff") throw Error(Errc::invalid_argument, "unknown model " + model);
    BenchmarkRun run;
    run.range = sample_range(ws.panel, cfg);
    const auto factors = factor_series(ws.panel, run.range);
    RegressionOptions ro{cfg.min_obs, 60, cfg.allow_gaps};
    std::set<std::string> fund_set;
    for (const auto& s : ws.holdings) fund_set.insert(s.fund_id);
    for (const auto& [f, v] : ws.panel.fund_nav_return) fund_set.insert(f);
    std::vector<std::string> funds(fund_set.begin(), fund_set.end());

    std::vector<std::optional<BenchmarkFitRow>> rows(funds.size());
    std::vector<std::string> reasons(funds.size());
    parallel_for(funds.size(), threads, [&](std::size_t i) {
        const auto& f = funds[i];
        try {
            auto m = ws.fund_benchmark.find(f);
            if (m == ws.fund_benchmark.end()) throw Error(Errc::missing_benchmark, "fund " + f + " has no benchmark mapping");
            auto bi = ws.panel.benchmark_return.find(m->second);
            if (bi == ws.panel.benchmark_return.end())
                throw Error(Errc::missing_benchmark, "no index returns for benchmark " + m->second);
            if (!cfg.allow_gaps && !nav_complete(ws.panel, f, run.range))
                throw Error(Errc::missing_nav, "NAV returns incomplete over the sample");
            auto nav = ws.panel.fund_nav_return.find(f);
            if (nav == ws.panel.fund_nav_return.end()) throw Error(Errc::missing_nav, "no NAV returns");
            auto y = cells_to_series(ws.panel, nav->second, run.range);
            auto d = cells_to_series(ws.panel, bi->second, run.range);
            BenchmarkFitRow row{f, m->second, {}, {}, {}};
            row.fit = model == "simple" ? fit_benchmark_simple(y, d, ro) : fit_benchmark_ff(y, d, factors, ro);
            row.beta_test = coef_test(row.fit, "beta_d", 1.0, Alternative::two_sided);
            row.tracking = tracking_stats(y, d, cfg.allow_gaps);
            rows[i] = std::move(row);
        } catch (const Error& e) {
            reasons[i] = e.what();
        }
    });
    for (std::size_t i = 0; i < funds.size(); ++i) {
        if (rows[i]) run.rows.push_back(std::move(*rows[i]));
        else run.excluded.push_back({funds[i], "monthly", reasons[i]});
    }
    return run;
}

inline Output cmd_validate_benchmark(const Workspace& ws, const RunOptions& opt) {
    using namespace pipeline_detail;
    Output out;
    const auto& cfg = opt.config;
    const auto dir = cfg.direction;
    auto run = compute_benchmark_validation(ws, cfg, opt.model, opt.threads);
    csv::Writer w(with_fingerprint({"fund_id", "benchmark_id", "model", "n_obs", "short_sample", "alpha", "beta_d",
                                    "se_beta_d", "t_beta_d_eq_1", "p_value", "greater_than_1", "reject_level",
                                    "reject_level_strict", "mean_diff", "sd_diff", "median_rel_diff"}));
    std::size_t gt = 0, rej = 0, rej_strict = 0;
    for (const auto& r : run.rows) {
        const double beta = r.fit.estimate("beta_d");
        const bool g = beta > 1.0, a = r.beta_test.reject_at(cfg.level), b = r.beta_test.reject_at(cfg.level_strict);
        gt += g;
        rej += a;
        rej_strict += b;
        w.field(r.fund_id).field(r.benchmark_id).field(opt.model).field(r.fit.n_obs).field(r.fit.short_sample)
            .field(r.fit.estimate("alpha")).field(beta).field(r.fit.standard_error("beta_d"))
            .field(r.beta_test.statistic).field(r.beta_test.p_value).field(g).field(a).field(b)
            .field(r.tracking.mean_diff).field(r.tracking.sd_diff).field(r.tracking.median_rel_diff);
        fingerprint(w, cfg, dir);
        w.end_row();
    }
    const std::size_t n = run.rows.size();
    csv::Writer t(with_fingerprint({"model", "n_funds", "share_beta_gt_1", "share_reject_level",
                                    "share_reject_level_strict", "level", "level_strict"}));
    t.field(opt.model).field(n).field(share(gt, n)).field(share(rej, n)).field(share(rej_strict, n)).field(cfg.level)
        .field(cfg.level_strict);
    fingerprint(t, cfg, dir);
    t.end_row();
    if (n == 0) out.notes.push_back("no fund qualified for benchmark validation");
    auto j = header_json("validate-benchmark", cfg, dir);
    j["model"] = opt.model;
    j["sample"] = {{"first", run.range.first.to_string()}, {"last", run.range.last.to_string()}};
    j["n_funds"] = n;
    j["share_beta_gt_1"] = share(gt, n);
    j["share_reject_level"] = share(rej, n);
    j["share_reject_level_strict"] = share(rej_strict, n);
    j["level"] = cfg.level;
    j["level_strict"] = cfg.level_strict;
    j["excluded"] = excluded_json(run.excluded);
    j["notes"] = out.notes;
    out.files["benchmark_fits.csv"] = w.str();
    out.files["table3.csv"] = t.str();
    out.files["excluded.csv"] = excluded_csv(run.excluded);
    out.files["validate_benchmark.json"] = dump(j);
    return out;
}

struct PersistenceRow {
    std::string fund_id;
    RegressionFit fit;
    TestResult test;
};

struct PersistenceRun {
    std::vector<PersistenceRow> rows;
    std::vector<Exclusion> excluded;
};

/// AR(1) slope of each fund's measure series with a one-sided test of
/// beta_1 > 0. Funds whose series cannot support the fit are excluded.
inline PersistenceRun compute_persistence(const std::map<std::string, std::vector<double>>& series,
                                          std::vector<Exclusion> excluded = {}) {
    PersistenceRun run;
    run.excluded = std::move(excluded);
    for (const auto& [f, s] : series) {
        try {
            auto fit = fit_persistence(s);
            auto test = coef_test(fit, "beta_1", 0.0, Alternative::greater);
            run.rows.push_back({f, std::move(fit), test});
        } catch (const Error& e) {
            run.excluded.push_back({f, "persistence", e.what()});
        }
    }
    return run;
}

inline Output cmd_persistence(const Workspace& ws, const RunOptions& opt) {
    using namespace pipeline_detail;
    Output out;
    const auto& cfg = opt.config;
    const auto dir = cfg.direction;
    const std::string m = opt.measure.value_or("ss");
    if (m != "ss" && m != "ia" && m != "it" && m != "aa") throw Error(Errc::invalid_argument, "unknown measure " + m);
    auto attr = compute_attribution(ws, cfg, dir, opt.threads, m != "aa", m == "aa");
    auto run = compute_persistence(measure_series(attr, m), attr.excluded);
    for (const auto& e : run.excluded)
        if (e.family == "persistence") out.notes.push_back("fund " + e.fund_id + " excluded: " + e.reason);

    csv::Writer w(with_fingerprint({"fund_id", "measure", "n_pairs", "beta_0", "beta_1", "se_beta_1", "t_stat",
                                    "p_value", "reject_level", "reject_level_strict"}));
    std::size_t pos = 0, sig = 0, sig_strict = 0;
    for (const auto& r : run.rows) {
        const double b1 = r.fit.estimate("beta_1");
        const bool a = r.test.reject_at(cfg.level), b = r.test.reject_at(cfg.level_strict);
        pos += b1 > 0.0;
        sig += a;
        sig_strict += b;
        w.field(r.fund_id).field(m).field(r.fit.n_obs).field(r.fit.estimate("alpha")).field(b1)
            .field(r.fit.standard_error("beta_1")).field(r.test.statistic).field(r.test.p_value).field(a).field(b);
        fingerprint(w, cfg, dir);
        w.end_row();
    }
    const std::size_t n = run.rows.size();
    csv::Writer t(with_fingerprint({"measure", "n_funds", "positive_proportion", "significantly_positive_proportion",
                                    "significantly_positive_proportion_strict", "level", "level_strict"}));
    t.field(m).field(n).field(share(pos, n)).field(share(sig, n)).field(share(sig_strict, n)).field(cfg.level)
        .field(cfg.level_strict);
    fingerprint(t, cfg, dir);
    t.end_row();
    auto j = header_json("persistence", cfg, dir);
    j["measure"] = m;
    j["n_funds"] = n;
    j["positive_proportion"] = share(pos, n);
    j["significantly_positive_proportion"] = share(sig, n);
    j["significantly_positive_proportion_strict"] = share(sig_strict, n);
    j["level"] = cfg.level;
    j["level_strict"] = cfg.level_strict;
    j["excluded"] = excluded_json(run.excluded);
    j["notes"] = out.notes;
    out.files["persistence.csv"] = w.str();
    out.files["table2.csv"] = t.str();
    out.files["excluded.csv"] = excluded_csv(run.excluded);
    out.files["persistence.json"] = dump(j);
    return out;
}

struct AssociationFund {
    std::string fund_id;
    double accumulated = 0.0; ///< geometrically accumulated semiannual measure
    double ability = 0.0;     ///< timing gamma or three-factor alpha
    double ability_se = 0.0;
};

struct AssociationRun {
    std::string pair;
    int end_year = 0;
    int span_years = 0;
    Direction direction = Direction::before;
    std::vector<AssociationFund> funds;
    std::vector<Exclusion> excluded;
    CorrelationResult correlation;
};

/// Cross-fund correlation between an accumulated attribution measure and a
/// regression-based ability over a rolling sample of calendar years:
/// industry allocation on past windows against Treynor-Mazuy gamma, or
/// within-industry selection on future windows against three-factor alpha.
inline AssociationRun compute_association(const Workspace& ws, const Config& cfg, const std::string& pair,
                                          unsigned threads) {
    using namespace pipeline_detail;
    if (pair != "ia-timing" && pair != "ss-alpha") throw Error(Errc::invalid_argument, "unknown pair " + pair);
    AssociationRun run;
    run.pair = pair;
    run.direction = pair == "ia-timing" ? Direction::before : Direction::after;
    Config c = cfg;
    if (!c.end_year) c.end_year = sample_range(ws.panel, cfg, true).last.year;
    const SampleRange r = sample_range(ws.panel, c);
    run.end_year = *c.end_year;
    run.span_years = c.span_years;
    auto attr = compute_attribution(ws, c, run.direction, threads, true, false, r);
    run.excluded = attr.excluded;
    auto series = measure_series(attr, pair == "ia-timing" ? "ia" : "ss");

    const auto factors = factor_series(ws.panel, r);
    ReturnSeries market_excess;
    for (std::size_t k = 0; k < factors.size(); ++k) market_excess.push(factors.months[k], factors.values[k].market_excess);
    std::map<int, double> rf;
    for (std::size_t k = 0; k < factors.size(); ++k) rf[factors.months[k].index()] = factors.values[k].risk_free;
    RegressionOptions ro{c.min_obs, 60, c.allow_gaps};

    std::vector<std::string> funds;
    for (const auto& [f, s] : series) funds.push_back(f);
    std::vector<std::optional<AssociationFund>> rows(funds.size());
    std::vector<std::string> reasons(funds.size());
    parallel_for(funds.size(), threads, [&](std::size_t i) {
        const auto& f = funds[i];
        try {
            AssociationFund a{f, accumulate_geometric(series.at(f)), 0.0, 0.0};
            auto nav = cells_to_series(ws.panel, ws.panel.fund_nav_return.at(f), r);
            ReturnSeries excess;
            for (std::size_t k = 0; k < nav.size(); ++k) {
                auto it = rf.find(nav.months[k].index());
                if (it != rf.end()) excess.push(nav.months[k], nav.values[k] - it->second);
            }
            if (pair == "ia-timing") {
                auto fit = fit_treynor_mazuy(excess, market_excess, ro);
                a.ability = fit.estimate("gamma");
                a.ability_se = fit.standard_error("gamma");
            } else {
                auto fit = fit_fama_french(excess, factors, ro);
                a.ability = fit.estimate("alpha");
                a.ability_se = fit.standard_error("alpha");
            }
            rows[i] = a;
        } catch (const Error& e) {
            reasons[i] = e.what();
        }
    });
    std::vector<double> x, y;
    for (std::size_t i = 0; i < funds.size(); ++i) {
        if (!rows[i]) {
            run.excluded.push_back({funds[i], "monthly", reasons[i]});
            continue;
        }
        x.push_back(rows[i]->accumulated);
        y.push_back(rows[i]->ability);
        run.funds.push_back(*rows[i]);
    }
    std::sort(run.excluded.begin(), run.excluded.end(), [](const Exclusion& a, const Exclusion& b) {
        return std::tie(a.fund_id, a.family) < std::tie(b.fund_id, b.family);
    });
    if (run.funds.size() < 3)
        throw Error(Errc::empty_universe, "only " + std::to_string(run.funds.size()) +
                                              " funds with continuous performance in the sample");
    run.correlation = pearson_test(x, y);
    return run;
}

inline Output cmd_associate(const Workspace& ws, const RunOptions& opt) {
    using namespace pipeline_detail;
    Output out;
    const auto& cfg = opt.config;
    auto run = compute_association(ws, cfg, opt.pair, opt.threads);
    const auto& c = run.correlation;
    csv::Writer row(with_fingerprint({"pair", "end_year", "span", "n_funds", "correlation", "t_stat", "p_value", "stars"}));
    row.field(run.pair).field(run.end_year).field(run.span_years).field(c.n).field(c.r).field(c.t_stat).field(c.p_value)
        .field(stars(c.p_value));
    fingerprint(row, cfg, run.direction);
    row.end_row();
    const bool timing = run.pair == "ia-timing";
    csv::Writer per(with_fingerprint({"fund_id", timing ? "accumulated_ia" : "accumulated_ss",
                                      timing ? "gamma" : "alpha", timing ? "se_gamma" : "se_alpha"}));
    for (const auto& f : run.funds) {
        per.field(f.fund_id).field(f.accumulated).field(f.ability).field(f.ability_se);
        fingerprint(per, cfg, run.direction);
        per.end_row();
    }
    auto j = header_json("associate", cfg, run.direction);
    j["pair"] = run.pair;
    j["end_year"] = run.end_year;
    j["span"] = run.span_years;
    j["n_funds"] = c.n;
    j["correlation"] = c.r;
    j["t_stat"] = c.t_stat;
    j["p_value"] = c.p_value;
    j["stars"] = stars(c.p_value);
    j["excluded"] = excluded_json(run.excluded);
    j["notes"] = out.notes;
    out.files["associate.csv"] = row.str();
    out.files["associate_funds.csv"] = per.str();
    out.files["excluded.csv"] = excluded_csv(run.excluded);
    out.files["associate.json"] = dump(j);
    return out;
}

struct SkippedReport {
    std::string fund_id;
    Date report_date;
    std::string reason;
};

struct DiagnoseRun {
    std::vector<ValidityDiff> diffs; ///< date then fund
    std::map<Date, BoxStats> bands;
    std::vector<SkippedReport> skipped;
};

/// Assumed buy-and-hold minus NAV-implied return for every semiannual
/// report, summarized per report date across funds.
inline DiagnoseRun compute_holding_diagnostics(const Workspace& ws, const Config& cfg, Direction dir, unsigned threads) {
    using namespace pipeline_detail;
    DiagnoseRun run;
    const SampleRange r = sample_range(ws.panel, cfg);
    WindowCache windows(ws.panel);
    std::vector<const HoldingsSnapshot*> snaps;
    for (const auto& s : ws.holdings) {
        if (s.kind != ReportKind::semiannual || s.positions.empty()) continue;
        auto [a, b] = window_months({s.report_date, dir, 6});
        if (!r.contains(a, b) || !ws.panel.offset(a) || !ws.panel.offset(b)) continue;
        windows.prepare(s.report_date, dir, 6);
        snaps.push_back(&s);
    }
    std::sort(snaps.begin(), snaps.end(), [](auto* a, auto* b) {
        return std::tie(a->report_date, a->fund_id) < std::tie(b->report_date, b->fund_id);
    });
    std::vector<std::optional<ValidityDiff>> out(snaps.size());
    std::vector<std::string> reasons(snaps.size());
    parallel_for(snaps.size(), threads, [&](std::size_t i) {
        const auto& s = *snaps[i];
        try {
            out[i] = holding_validity_diff(s.fund_id, normalize_stock_sleeve(s), ws.panel,
                                           windows.get(s.report_date, dir, 6), dir);
        } catch (const Error& e) {
            reasons[i] = e.what();
        }
    });
    std::map<Date, std::vector<double>> per_date;
    for (std::size_t i = 0; i < snaps.size(); ++i) {
        if (!out[i]) {
            run.skipped.push_back({snaps[i]->fund_id, snaps[i]->report_date, reasons[i]});
            continue;
        }
        per_date[out[i]->report_date].push_back(out[i]->diff);
        run.diffs.push_back(*out[i]);
    }
    for (const auto& [d, v] : per_date) run.bands[d] = box_stats(v);
    return run;
}

inline Output cmd_diagnose_holdings(const Workspace& ws, const RunOptions& opt) {
    using namespace pipeline_detail;
    Output out;
    const auto& cfg = opt.config;
    const auto dir = cfg.direction;
    auto run = compute_holding_diagnostics(ws, cfg, dir, opt.threads);
    csv::Writer d(with_fingerprint({"fund_id", "report_date", "assumed_return", "actual_return", "diff"}));
    for (const auto& v : run.diffs) {
        d.field(v.fund_id).field(v.report_date.to_string()).field(v.assumed_return).field(v.actual_return).field(v.diff);
        fingerprint(d, cfg, dir);
        d.end_row();
    }
    csv::Writer b(with_fingerprint({"report_date", "n_funds", "p2_5", "p25", "p50", "p75", "p97_5", "covers_zero"}));
    auto jb = ordered_json::array();
    for (const auto& [date, s] : run.bands) {
        b.field(date.to_string()).field(s.n).field(s.p2_5).field(s.p25).field(s.p50).field(s.p75).field(s.p97_5)
            .field(s.covers_zero());
        fingerprint(b, cfg, dir);
        b.end_row();
        jb.push_back({{"report_date", date.to_string()},
                      {"n_funds", s.n},
                      {"p2_5", s.p2_5},
                      {"p25", s.p25},
                      {"p50", s.p50},
                      {"p75", s.p75},
                      {"p97_5", s.p97_5},
                      {"covers_zero", s.covers_zero()}});
    }
    csv::Writer sk({"fund_id", "report_date", "reason"});
    for (const auto& e : run.skipped) {
        sk.field(e.fund_id).field(e.report_date.to_string()).field(e.reason).end_row();
        out.notes.push_back("fund " + e.fund_id + " report " + e.report_date.to_string() + " skipped: " + e.reason);
    }
    auto j = header_json("diagnose-holdings", cfg, dir);
    j["bands"] = std::move(jb);
    j["notes"] = out.notes;
    out.files["validity_diff.csv"] = d.str();
    out.files["validity_bands.csv"] = b.str();
    out.files["skipped.csv"] = sk.str();
    out.files["diagnose_holdings.json"] = dump(j);
    return out;
}

inline const std::vector<std::string>& command_names() {
    static const std::vector<std::string> names = {"summarize",   "attribute", "validate-benchmark",
                                                   "persistence", "associate", "diagnose-holdings"};
    return names;
}

inline Output run_command(std::string_view name, const Workspace& ws, const RunOptions& opt) {
    if (name == "summarize") return cmd_summarize(ws, opt);
    if (name == "attribute") return cmd_attribute(ws, opt);
    if (name == "validate-benchmark") return cmd_validate_benchmark(ws, opt);
    if (name == "persistence") return cmd_persistence(ws, opt);
    if (name == "associate") return cmd_associate(ws, opt);
    if (name == "diagnose-holdings") return cmd_diagnose_holdings(ws, opt);
    throw Error(Errc::invalid_argument, "unknown command " + std::string(name));
}

} // namespace attrib
