#include "lpma/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <optional>

#include <Eigen/Core>

#include "lpma/csv.hpp"
#include "lpma/error.hpp"
#include "lpma/parallel.hpp"
#include "lpma/rng.hpp"

#ifndef LPMA_VERSION
#define LPMA_VERSION "0.0.0"
#endif

namespace lpma {

const char* library_version() noexcept { return LPMA_VERSION; }

namespace {

void add_unique(std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
}

std::vector<std::string> series_used(const RunConfig& c) {
    std::vector<std::string> out;
    for (const auto* list : {&c.outcomes, &c.policies, &c.controls})
        for (const auto& s : *list) add_unique(out, s);
    return out;
}

const char* criterion_name(WeightCriterion c) { return c == WeightCriterion::Cv1 ? "cv1" : "mallows"; }

}  // namespace

PreparedData prepare_data(const RunConfig& c) {
    c.validate();
    PreparedData d;
    PanelSchema schema;
    schema.required = series_used(c);
    add_unique(schema.required, c.rate);
    if (c.output_gap) add_unique(schema.required, c.output_gap_series);
    d.raw = load_panel(c.panel, schema);
    d.regimes = build_regimes(d.raw, c.rate);

    std::map<std::string, Transform> plan;
    for (const auto& s : schema.required)
        if (auto it = c.transforms.find(s); it != c.transforms.end()) plan[s] = it->second;
    d.panel = apply_transforms(d.raw, plan);

    if (c.output_gap) {
        d.panel.set_column(kOutputGap, output_gap(d.raw, c.output_gap_series, c.hp_lambda), Transform::Level);
        d.extra_controls.push_back(kOutputGap);
    }
    if (c.anticipation) {
        std::optional<PeriodWindow> span;
        for (const auto& w : c.windows) {
            const PeriodWindow r = w.resolve(d.panel);
            if (!span) span = r;
            span->first = std::min(span->first, r.first);
            span->last = std::max(span->last, r.last);
        }
        d.panel = merge_anticipation(d.panel, load_forecasts(c.forecasts), span);
        d.extra_controls.push_back(kGdpForecast);
    }
    d.zero_variance = zero_variance_columns(d.panel, c.policies);
    return d;
}

ModelSpec cell_spec(const RunConfig& c, const PreparedData& d, const std::string& outcome, const std::string& policy) {
    ModelSpec s;
    s.form = ModelForm::Baseline;
    s.outcome = outcome;
    s.policy = policy;
    s.controls = c.controls;
    s.control_lags = c.control_lags;
    s.policy_lags = c.policy_lags;
    s.extra_controls = d.extra_controls;
    s.include_fixed_effects = true;
    return s;
}

RegimeQuartiles evaluation_quartiles(const RunConfig& c, const PreparedData& d, const PeriodWindow& window) {
    if (c.regime_evaluation == RegimeEvaluation::ReferenceValues) return reference_quartiles();
    return sample_quartiles(d.panel, d.regimes, window);
}

bool PipelineResult::complete() const {
    return std::all_of(cells.begin(), cells.end(), [](const CellResult& c) { return c.failures.empty(); });
}

PipelineResult run_pipeline(const RunConfig& config, bool tests) {
    return run_pipeline(config, prepare_data(config), tests);
}

PipelineResult run_pipeline(const RunConfig& c, const PreparedData& d, bool with_tests) {
    c.validate();
    PipelineResult res;
    for (const auto& o : c.outcomes)
        for (const auto& p : c.policies)
            for (const auto& w : c.windows) {
                CellResult cell;
                cell.outcome = o;
                cell.policy = p;
                cell.window = w.name;
                cell.range = w.resolve(d.panel);
                cell.quartiles = evaluation_quartiles(c, d, cell.range);
                res.cells.push_back(std::move(cell));
            }

    const std::vector<int> hs(c.horizons.begin(), c.horizons.end());
    const std::size_t n_jobs = res.cells.size() * hs.size();
    std::vector<std::optional<HorizonAnalysis>> done(n_jobs);
    std::vector<std::string> errors(n_jobs);
    std::vector<std::uint64_t> seeds(n_jobs);

    parallel_for(n_jobs, c.threads, [&](std::size_t job) {
        const std::size_t ci = job / hs.size();
        const int h = hs[job % hs.size()];
        const CellResult& cell = res.cells[ci];
        const std::uint64_t seed = derive_seed(*c.seed, ci + 1, static_cast<std::uint64_t>(h));
        seeds[job] = seed;
        AnalysisOptions ao;
        ao.design.window = cell.range;
        ao.forms = c.models;
        ao.criterion = c.cv1 ? WeightCriterion::Cv1 : WeightCriterion::Mallows;
        ao.quartiles = cell.quartiles;
        ao.bandwidth = c.bandwidth;
        ao.tests = with_tests;
        if (c.factors) {
            ao.factor_r_max = c.fixed_factors >= 0 ? -1 : c.factor_r_max;
            ao.fixed_factors = c.fixed_factors;
            ao.factor.seed = derive_seed(seed, 0, 5);
        }
        if (c.bootstrap && with_tests) {
            ao.bootstrap = c.bootstrap_draws;
            ao.bootstrap_seed = derive_seed(seed, 0, 7);
        }
        try {
            done[job] = analyze_horizon(d.panel, d.regimes, cell_spec(c, d, cell.outcome, cell.policy), h, ao);
        } catch (const Error& e) {
            errors[job] = e.what();
        }
    });

    for (std::size_t ci = 0; ci < res.cells.size(); ++ci) {
        CellResult& cell = res.cells[ci];
        std::map<int, PointTests> tests;
        for (std::size_t k = 0; k < hs.size(); ++k) {
            const std::size_t job = ci * hs.size() + k;
            const int h = hs[k];
            cell.seeds[h] = seeds[job];
            if (!done[job]) {
                cell.failures[h] = errors[job];
                continue;
            }
            auto& ha = cell.horizons.emplace(h, std::move(*done[job])).first->second;
            const auto& t = c.bootstrap ? ha.boot_equality : ha.equality;
            if (t) tests.emplace(h, *t);
        }
        cell.tests = build_test_report(tests, c.alpha);
        cell.tests.outcome = cell.outcome;
        cell.tests.policy = cell.policy;
        cell.tests.window = cell.window;
    }

    nlohmann::json& run = res.run;
    run["schema_version"] = kOutputSchemaVersion;
    run["versions"] = {{"lpma", library_version()},
                       {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                     std::to_string(EIGEN_MINOR_VERSION)},
                       {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                             std::to_string(NLOHMANN_JSON_VERSION_PATCH)}};
    run["config"] = to_json(c);
    run["seed"] = *c.seed;
    run["tests"] = with_tests;
    run["test_standard_errors"] = c.bootstrap ? "country_block_bootstrap" : "conditional_on_weights";
    run["schemas"] = {
        {"irf.csv", {"outcome", "policy", "window", "horizon", "model", "regime", "value", "se", "boot_se"}},
        {"weights.csv", {"outcome", "policy", "horizon", "model", "weight", "criterion"}},
        {"tests.csv",
         {"outcome", "policy", "horizon", "prop_accept", "raw_p_summary", "adj_method", "adj_reject_frac", "verdict"}},
        {"summary.csv", {"country", "series", "n", "mean", "sd"}},
        {"factors/<outcome>_<policy>.csv", {"horizon", "model", "r", "ssr", "iterations", "converged"}}};
    auto panel = nlohmann::json::object();
    panel["countries"] = d.panel.countries();
    panel["first"] = d.panel.first_period().str();
    panel["last"] = d.panel.period(d.panel.n_periods() - 1).str();
    panel["extra_controls"] = d.extra_controls;
    auto zv = nlohmann::json::array();
    for (const auto& z : d.zero_variance) zv.push_back({{"country", z.country}, {"column", z.column}});
    panel["zero_variance_policies"] = zv;
    run["panel"] = panel;

    auto cells = nlohmann::json::array();
    for (const auto& cell : res.cells) {
        nlohmann::json j;
        j["outcome"] = cell.outcome;
        j["policy"] = cell.policy;
        j["window"] = {{"name", cell.window}, {"first", cell.range.first.str()}, {"last", cell.range.last.str()}};
        j["quartiles"] = {{"q1_quarterly", cell.quartiles.q1_quarterly},
                          {"q3_quarterly", cell.quartiles.q3_quarterly},
                          {"q1_annual", cell.quartiles.q1_annual},
                          {"q3_annual", cell.quartiles.q3_annual}};
        auto hz = nlohmann::json::array();
        for (int h : hs) {
            nlohmann::json e;
            e["horizon"] = h;
            e["seed"] = cell.seeds.at(h);
            if (auto it = cell.horizons.find(h); it != cell.horizons.end()) {
                const auto& a = it->second.audit;
                e["rows"] = a.rows;
                e["first_base_period"] = a.rows > 0 ? nlohmann::json(a.first.str()) : nlohmann::json();
                e["last_base_period"] = a.rows > 0 ? nlohmann::json(a.last.str()) : nlohmann::json();
                e["sigma2_hat"] = it->second.candidates.sigma2_hat;
                e["weight_diagnostics"] = it->second.weights.diagnostics;
                if (c.bootstrap) e["bootstrap_failed_draws"] = it->second.bootstrap_failed;
            } else {
                e["error"] = cell.failures.at(h);
            }
            hz.push_back(std::move(e));
        }
        j["horizons"] = hz;
        cells.push_back(std::move(j));
    }
    run["cells"] = cells;
    run["complete"] = res.complete();
    return res;
}

void write_irf_csv(std::ostream& out, const std::vector<const CellResult*>& cells, bool header) {
    csv::Writer w(out);
    if (header) w.row({"outcome", "policy", "window", "horizon", "model", "regime", "value", "se", "boot_se"});
    for (const auto* cell : cells)
        for (const auto& [h, ha] : cell->horizons) {
            const std::string hs = std::to_string(h);
            for (const auto& p : ha.points) {
                for (std::size_t m = 0; m < p.per_model.size(); ++m)
                    w.row({cell->outcome, cell->policy, cell->window, hs, ha.candidates.labels[m], p.regime,
                           csv::format_number(p.per_model[m].value), csv::format_number(p.per_model[m].se), ""});
                w.row({cell->outcome, cell->policy, cell->window, hs, "average", p.regime, csv::format_number(p.value),
                       csv::format_number(p.se), csv::format_number(p.boot_se)});
            }
            for (const auto& b : ha.baseline_points)
                w.row({cell->outcome, cell->policy, cell->window, hs, "Baseline", b.regime, csv::format_number(b.value),
                       csv::format_number(b.se), ""});
        }
}

void write_weights_csv(std::ostream& out, const std::vector<const CellResult*>& cells, bool header) {
    csv::Writer w(out);
    if (header) w.row({"outcome", "policy", "horizon", "model", "weight", "criterion"});
    for (const auto* cell : cells)
        for (const auto& [h, ha] : cell->horizons)
            for (std::size_t m = 0; m < ha.weights.labels.size(); ++m)
                w.row({cell->outcome, cell->policy, std::to_string(h), ha.weights.labels[m],
                       csv::format_number(ha.weights.w[static_cast<Eigen::Index>(m)]),
                       criterion_name(ha.weights.criterion)});
}

void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows, bool header) {
    csv::Writer w(out);
    if (header) w.row({"country", "series", "n", "mean", "sd"});
    for (const auto& r : rows)
        w.row({r.country, r.column, std::to_string(r.n), csv::format_number(r.mean), csv::format_number(r.sd)});
}

namespace {

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p, std::ios::binary);
    if (!f) throw Error("cli", "OutputNotWritable", p.string());
    return f;
}

}  // namespace

void write_bundle(const PipelineResult& res, const RunConfig& c, const PreparedData& d, const std::filesystem::path& out) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) throw Error("cli", "OutputNotWritable", out.string() + ": " + ec.message());
    for (const auto& wc : c.windows) {
        std::vector<const CellResult*> cells;
        std::vector<TestReport> reports;
        for (const auto& cell : res.cells)
            if (cell.window == wc.name) {
                cells.push_back(&cell);
                reports.push_back(cell.tests);
            }
        const auto dir = out / wc.name;
        std::filesystem::create_directories(dir, ec);
        if (ec) throw Error("cli", "OutputNotWritable", dir.string() + ": " + ec.message());
        auto irf = open_out(dir / "irf.csv");
        write_irf_csv(irf, cells);
        auto wts = open_out(dir / "weights.csv");
        write_weights_csv(wts, cells);
        auto tst = open_out(dir / "tests.csv");
        write_tests_csv(tst, reports);
        if (c.factors) {
            std::filesystem::create_directories(dir / "factors", ec);
            for (const auto* cell : cells) {
                std::vector<FactorDiagnostic> rows;
                for (const auto& [h, ha] : cell->horizons)
                    rows.insert(rows.end(), ha.factor_diagnostics.begin(), ha.factor_diagnostics.end());
                auto fac = open_out(dir / "factors" / (cell->outcome + "_" + cell->policy + ".csv"));
                write_factor_diagnostics_csv(fac, rows);
            }
        }
    }
    std::vector<std::string> cols = series_used(c);
    for (const auto& e : d.extra_controls) add_unique(cols, e);
    auto sum = open_out(out / "summary.csv");
    write_summary_csv(sum, summary_stats(d.panel, cols));
    auto js = open_out(out / "run.json");
    js << res.run.dump(2) << '\n';
}

}  // namespace lpma
