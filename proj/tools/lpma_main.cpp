#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "lpma/config.hpp"
#include "lpma/csv.hpp"
#include "lpma/error.hpp"
#include "lpma/pipeline.hpp"
#include "lpma/simulation.hpp"
#include "lpma/transforms.hpp"

namespace fs = std::filesystem;
using namespace lpma;

namespace {

constexpr int kExitError = 1;
constexpr int kExitPartial = 2;

struct Common {
    std::string config;
    std::string out;
    unsigned threads = 0;
    std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* app, Common& c, bool needs_config = true) {
    auto* opt = app->add_option("--config", c.config, "Config file (YAML)");
    if (needs_config) opt->required()->check(CLI::ExistingFile);
    app->add_option("--out", c.out, "Output directory")->required();
    app->add_option("--threads", c.threads, "Worker threads (default: config value or 1)");
    app->add_option("--seed", c.seed, "Seed, overrides the config");
}

std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cli", "OutputNotWritable", p.string());
    return f;
}

RunConfig run_config(const Common& c) {
    RunConfig rc = load_run_config(c.config);
    if (c.seed) rc.seed = *c.seed;
    if (c.threads > 0) rc.threads = c.threads;
    return rc;
}

void write_error(const Error& e, const std::string& out) {
    const nlohmann::json j = {{"error", {{"code", e.qualified_code()}, {"module", e.module()}, {"message", e.detail()}}}};
    std::cerr << j.dump() << '\n';
    if (!out.empty()) {
        std::error_code ec;
        fs::create_directories(out, ec);
        std::ofstream f(fs::path(out) / "error.json", std::ios::binary);
        if (f) f << j.dump(2) << '\n';
    }
}

int cmd_run(const Common& c) {
    const RunConfig rc = run_config(c);
    const PreparedData d = prepare_data(rc);
    const PipelineResult res = run_pipeline(rc, d);
    write_bundle(res, rc, d, c.out);
    return res.complete() ? 0 : kExitPartial;
}

int cmd_fit(const Common& c) {
    const RunConfig rc = run_config(c);
    const PreparedData d = prepare_data(rc);
    bool complete = true;
    for (const auto& wc : rc.windows) {
        std::vector<ProjectionResult> results;
        DesignOptions opt;
        opt.window = wc.resolve(d.panel);
        for (const auto& o : rc.outcomes)
            for (const auto& p : rc.policies) {
                const ModelSpec base = cell_spec(rc, d, o, p);
                results.push_back(fit_projection(d.panel, d.regimes, base, rc.horizons, opt));
                for (ModelForm f : rc.models)
                    results.push_back(fit_projection(d.panel, d.regimes, base.with_form(f), rc.horizons, opt));
            }
        for (const auto& r : results) complete = complete && r.failures.empty();
        auto f = open_out(fs::path(c.out) / wc.name / "fits.csv");
        write_projection_csv(f, results);
    }
    return complete ? 0 : kExitPartial;
}

int cmd_stage(const Common& c, const std::string& which) {
    const RunConfig rc = run_config(c);
    const PreparedData d = prepare_data(rc);
    const PipelineResult res = run_pipeline(rc, d, which == "tests");
    for (const auto& wc : rc.windows) {
        std::vector<const CellResult*> cells;
        std::vector<TestReport> reports;
        for (const auto& cell : res.cells)
            if (cell.window == wc.name) {
                cells.push_back(&cell);
                reports.push_back(cell.tests);
            }
        auto f = open_out(fs::path(c.out) / wc.name / (which + ".csv"));
        if (which == "weights") write_weights_csv(f, cells);
        else if (which == "irf") write_irf_csv(f, cells);
        else write_tests_csv(f, reports);
    }
    return res.complete() ? 0 : kExitPartial;
}

int cmd_summary(const Common& c) {
    const RunConfig rc = run_config(c);
    const PreparedData d = prepare_data(rc);
    std::vector<std::string> cols;
    for (const auto* list : {&rc.outcomes, &rc.policies, &rc.controls})
        for (const auto& s : *list)
            if (std::find(cols.begin(), cols.end(), s) == cols.end()) cols.push_back(s);
    auto f = open_out(fs::path(c.out) / "summary.csv");
    write_summary_csv(f, summary_stats(d.panel, cols));
    return 0;
}

int cmd_hpfilter(const std::string& input, const std::string& column, double lambda, const std::string& out) {
    const PanelDataset panel = load_panel(input, PanelSchema{{column}});
    auto f = open_out(out);
    csv::Writer w(f);
    w.row({"country", "period", "value", "trend", "cycle"});
    for (int i = 0; i < panel.n_countries(); ++i) {
        const auto s = panel.series(column, i);
        int lo = 0, hi = panel.n_periods();
        while (lo < hi && is_missing(s[static_cast<std::size_t>(lo)])) ++lo;
        while (hi > lo && is_missing(s[static_cast<std::size_t>(hi - 1)])) --hi;
        if (lo == hi) continue;
        const auto r = hp_filter(s.subspan(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi - lo)), lambda);
        for (int t = lo; t < hi; ++t) {
            const auto k = static_cast<std::size_t>(t - lo);
            w.row({panel.countries()[static_cast<std::size_t>(i)], panel.period(t).str(),
                   csv::format_number(s[static_cast<std::size_t>(t)]), csv::format_number(r.trend[k]),
                   csv::format_number(r.cycle[k])});
        }
    }
    return 0;
}

int cmd_simulate(const Common& c) {
    std::ifstream in(c.config);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    SimulateConfig sc;
    if (c.seed) {
        nlohmann::json j = yaml_to_json(text);
        if (!j.is_object()) j = nlohmann::json::object();
        j["seed"] = *c.seed;
        sc = parse_simulate_config(j.dump());
    } else {
        sc = parse_simulate_config(text);
    }
    if (c.threads > 0) sc.mc.threads = c.threads;
    const McReport rep = run_monte_carlo(sc.dgp, sc.mc);
    fs::create_directories(c.out);
    auto f = open_out(fs::path(c.out) / "mc_report.json");
    f << to_json(rep).dump(2) << '\n';
    write_mc_tables(rep, c.out);
    return rep.passed ? 0 : kExitPartial;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Local projections with Mallows model averaging for panel data"};
    app.set_version_flag("--version", std::string(library_version()));
    app.require_subcommand(1);

    Common common;
    auto* run = app.add_subcommand("run", "Full pipeline: irf, weights, tests, summary and run.json");
    add_common(run, common);
    auto* fit = app.add_subcommand("fit", "Per-model local projection coefficients");
    add_common(fit, common);
    auto* weights = app.add_subcommand("weights", "Per-horizon model weights");
    add_common(weights, common);
    auto* irf = app.add_subcommand("irf", "Per-model and averaged impulse responses");
    add_common(irf, common);
    auto* test = app.add_subcommand("test", "Equality tests, acceptance proportions and verdicts");
    add_common(test, common);
    auto* summary = app.add_subcommand("summary", "Mean and standard deviation per country and series");
    add_common(summary, common);
    auto* simulate = app.add_subcommand("simulate", "Monte Carlo experiment from a DGP config");
    add_common(simulate, common);

    auto* hp = app.add_subcommand("hpfilter", "Hodrick-Prescott trend and cycle per country");
    std::string hp_input, hp_column, hp_out;
    double hp_lambda = 1600.0;
    hp->add_option("--input", hp_input, "Wide panel CSV")->required()->check(CLI::ExistingFile);
    hp->add_option("--column", hp_column, "Series to filter")->required();
    hp->add_option("--lambda", hp_lambda, "Smoothing parameter")->capture_default_str();
    hp->add_option("--out", hp_out, "Output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    const std::string out = hp->parsed() ? std::string() : common.out;
    try {
        if (run->parsed()) return cmd_run(common);
        if (fit->parsed()) return cmd_fit(common);
        if (weights->parsed()) return cmd_stage(common, "weights");
        if (irf->parsed()) return cmd_stage(common, "irf");
        if (test->parsed()) return cmd_stage(common, "tests");
        if (summary->parsed()) return cmd_summary(common);
        if (simulate->parsed()) return cmd_simulate(common);
        if (hp->parsed()) return cmd_hpfilter(hp_input, hp_column, hp_lambda, hp_out);
    } catch (const Error& e) {
        write_error(e, out);
        return kExitError;
    } catch (const std::exception& e) {
        write_error(Error("cli", "Internal", e.what()), out);
        return kExitError;
    }
    return kExitError;
}
