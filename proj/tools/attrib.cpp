#include "attrib/attrib.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid = 1;
constexpr int exit_usage = 2;

void print_issues(const attrib::ValidationReport& rep) {
    for (const auto& i : rep.issues) {
        std::cerr << (i.is_error() ? "error " : "warning ") << i.code << ": " << i.message;
        if (i.line) std::cerr << " (line " << i.line << ")";
        std::cerr << "\n";
    }
}

bool write_files(const fs::path& dir, const std::map<std::string, std::string>& files) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) {
        std::cerr << "error IO_WRITE: cannot create " << dir << ": " << ec.message() << "\n";
        return false;
    }
    for (const auto& [name, text] : files) {
        std::ofstream out(dir / name, std::ios::binary | std::ios::trunc);
        out << text;
        if (!out) {
            std::cerr << "error IO_WRITE: cannot write " << (dir / name) << "\n";
            return false;
        }
        std::cout << (dir / name).string() << "\n";
    }
    return true;
}

struct Flags {
    std::string workspace;
    std::string out;
    std::string direction;
    std::string model = "simple";
    std::string measure;
    std::string pair = "ia-timing";
    int end_year = 0;
    int span = 0;
    bool classical_df = false;
    bool allow_gaps = false;
    bool two_sided = false;
};

struct SynthFlags {
    std::string out;
    std::uint64_t seed = 1;
    int funds = 50, stocks = 60, industries = 6, months = 72, start_year = 2012;
    double selection_drift = 0.0, timing_gamma = 0.0, persistence_rho = 0.0, skill_noise = 0.0, skilled_share = 1.0;
    double nav_noise = 0.001;
    std::string alignment = "after";
    bool no_quarterly = false;
    std::vector<std::string> inject;
};

int run_analysis(const std::string& command, const Flags& f) {
    auto ws = attrib::load_workspace(f.workspace);
    print_issues(ws.report);
    if (ws.report.has_errors()) {
        std::cerr << "workspace " << f.workspace << " has validation errors; nothing computed\n";
        return exit_invalid;
    }
    attrib::RunOptions opt;
    opt.config = ws.config;
    opt.threads = attrib::default_threads();
    if (!f.direction.empty()) opt.config.direction = *attrib::parse_direction(f.direction);
    if (f.classical_df) opt.config.df = attrib::DfConvention::classical;
    if (f.allow_gaps) opt.config.allow_gaps = true;
    if (f.two_sided) opt.config.two_sided = true;
    if (f.end_year) opt.config.end_year = f.end_year;
    if (f.span) opt.config.span_years = f.span;
    if (!f.measure.empty()) opt.measure = f.measure;
    opt.model = f.model;
    opt.pair = f.pair;
    try {
        auto out = attrib::run_command(command, ws, opt);
        for (const auto& n : out.notes) std::cerr << "note: " << n << "\n";
        const fs::path dir = f.out.empty() ? fs::path(f.workspace) / "out" : fs::path(f.out);
        return write_files(dir, out.files) ? exit_ok : exit_invalid;
    } catch (const attrib::Error& e) {
        std::cerr << "error " << e.what() << "\n";
        return exit_invalid;
    }
}

int run_synth(const SynthFlags& s) {
    attrib::UniverseConfig c;
    c.seed = s.seed;
    c.n_funds = s.funds;
    c.n_stocks = s.stocks;
    c.n_industries = s.industries;
    c.n_months = s.months;
    c.start_year = s.start_year;
    c.skill = {s.selection_drift, s.timing_gamma, s.persistence_rho, s.skill_noise};
    c.skilled_share = s.skilled_share;
    c.nav_noise = s.nav_noise;
    c.holding_alignment = *attrib::parse_direction(s.alignment);
    c.quarterly_reports = !s.no_quarterly;
    try {
        auto u = attrib::generate_universe(c);
        for (const auto& spec : s.inject) {
            auto at = spec.find('@');
            auto month = at == std::string::npos ? std::nullopt : attrib::YearMonth::parse(spec.substr(at + 1));
            if (!month) {
                std::cerr << "error: --inject expects FUND@YYYY-MM, got " << spec << "\n";
                return exit_usage;
            }
            u = attrib::inject_trading_gap(std::move(u), spec.substr(0, at), *month);
        }
        return write_files(s.out, attrib::universe_files(u)) ? exit_ok : exit_invalid;
    } catch (const attrib::Error& e) {
        std::cerr << "error " << e.what() << "\n";
        return exit_usage;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Holdings-based fund performance attribution"};
    app.require_subcommand(1);
    Flags f;
    SynthFlags s;
    const std::vector<std::string> directions = {"before", "after"};

    const std::map<std::string, std::string> about = {
        {"summarize", "per-date fund counts and average holdings size"},
        {"attribute", "Brinson decomposition and positivity tests"},
        {"validate-benchmark", "regress NAV returns on the declared benchmark"},
        {"persistence", "AR(1) persistence of an attribution measure"},
        {"associate", "correlate attribution with regression-based ability"},
        {"diagnose-holdings", "assumed buy-and-hold versus NAV return per report"},
    };
    for (const auto& name : attrib::command_names()) {
        auto* sub = app.add_subcommand(name, about.at(name));
        sub->add_option("--workspace", f.workspace, "directory holding the input files")->required()->check(CLI::ExistingDirectory);
        sub->add_option("--out", f.out, "output directory (default WORKSPACE/out)");
        sub->add_option("--direction", f.direction, "window side of the report date")->check(CLI::IsMember(directions));
        sub->add_option("--end-year", f.end_year, "last calendar year of the sample");
        sub->add_option("--span", f.span, "sample length in years")->check(CLI::PositiveNumber);
        sub->add_flag("--classical-df", f.classical_df, "n-1 degrees of freedom in positivity tests");
        sub->add_flag("--allow-gaps", f.allow_gaps, "let regressions skip missing months");
        sub->add_flag("--two-sided", f.two_sided, "two-sided positivity tests");
        if (name == "attribute" || name == "persistence")
            sub->add_option("--measure", f.measure)->check(CLI::IsMember({"ss", "ia", "it", "aa"}));
        if (name == "validate-benchmark") sub->add_option("--model", f.model)->check(CLI::IsMember({"simple", "ff"}));
        if (name == "associate") sub->add_option("--pair", f.pair)->check(CLI::IsMember({"ia-timing", "ss-alpha"}));
    }

    auto* synth = app.add_subcommand("synth", "write a seeded synthetic workspace");
    synth->add_option("--out", s.out, "directory to write")->required();
    synth->add_option("--seed", s.seed);
    synth->add_option("--funds", s.funds)->check(CLI::PositiveNumber);
    synth->add_option("--stocks", s.stocks)->check(CLI::PositiveNumber);
    synth->add_option("--industries", s.industries)->check(CLI::PositiveNumber);
    synth->add_option("--months", s.months, "multiple of 6")->check(CLI::PositiveNumber);
    synth->add_option("--start-year", s.start_year);
    synth->add_option("--selection-drift", s.selection_drift);
    synth->add_option("--timing-gamma", s.timing_gamma);
    synth->add_option("--persistence-rho", s.persistence_rho)->check(CLI::Range(-0.999999, 0.999999));
    synth->add_option("--skill-noise", s.skill_noise)->check(CLI::NonNegativeNumber);
    synth->add_option("--skilled-share", s.skilled_share)->check(CLI::Range(0.0, 1.0));
    synth->add_option("--nav-noise", s.nav_noise)->check(CLI::NonNegativeNumber);
    synth->add_option("--alignment", s.alignment, "window the reported weights are held over")
        ->check(CLI::IsMember(directions));
    synth->add_flag("--no-quarterly", s.no_quarterly);
    synth->add_option("--inject", s.inject, "FUND@YYYY-MM mid-window portfolio switch");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? exit_ok : exit_usage;
    }

    if (synth->parsed()) return run_synth(s);
    for (const auto& name : attrib::command_names())
        if (app.got_subcommand(name)) return run_analysis(name, f);
    return exit_usage;
}
