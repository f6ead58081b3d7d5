#include "lpma/transforms.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <tuple>

#include "lpma/csv.hpp"
#include "lpma/error.hpp"
#include "lpma/stats.hpp"

namespace lpma {

std::vector<double> log_diff_100(std::span<const double> levels) {
    for (std::size_t t = 0; t < levels.size(); ++t)
        if (!is_missing(levels[t]) && levels[t] <= 0.0)
            throw Error("data", "NonPositiveLevel",
                        "level " + csv::format_number(levels[t]) + " at position " + std::to_string(t));
    std::vector<double> out(levels.size(), kMissing);
    for (std::size_t t = 1; t < levels.size(); ++t)
        if (!is_missing(levels[t]) && !is_missing(levels[t - 1]))
            out[t] = 100.0 * std::log(levels[t] / levels[t - 1]);
    return out;
}

std::vector<double> first_difference(std::span<const double> levels) {
    std::vector<double> out(levels.size(), kMissing);
    for (std::size_t t = 1; t < levels.size(); ++t)
        if (!is_missing(levels[t]) && !is_missing(levels[t - 1])) out[t] = levels[t] - levels[t - 1];
    return out;
}

PanelDataset apply_transforms(const PanelDataset& panel, const std::map<std::string, Transform>& plan) {
    PanelDataset out = panel;
    for (const auto& [name, tag] : plan) {
        if (panel.transform(name) != Transform::Level)
            throw Error("data", "AlreadyTransformed", "column '" + name + "' is not a level series");
        if (tag == Transform::Level) continue;
        std::vector<double> values;
        values.reserve(panel.column(name).size());
        for (int c = 0; c < panel.n_countries(); ++c) {
            const auto s = panel.series(name, c);
            std::vector<double> t;
            try {
                t = tag == Transform::LogDiff100 ? log_diff_100(s) : first_difference(s);
            } catch (const Error& e) {
                throw Error(e.module(), e.code(), "column '" + name + "', country " + panel.countries()[c] + ": " +
                                                      e.detail());
            }
            values.insert(values.end(), t.begin(), t.end());
        }
        out.set_column(name, std::move(values), tag);
    }
    return out;
}

RegimeVariables build_regimes(const PanelDataset& panel, const std::string& rate_column) {
    if (!panel.has_column(rate_column))
        throw Error("data", "MissingRateColumn", "rate column '" + rate_column + "' not in panel");
    const auto rate = panel.column(rate_column);
    const std::size_t n = rate.size();
    RegimeVariables r{std::vector<double>(n, kMissing), std::vector<double>(n, kMissing),
                      std::vector<double>(n, kMissing), std::vector<double>(n, kMissing)};
    for (int c = 0; c < panel.n_countries(); ++c)
        for (int t = 0; t < panel.n_periods(); ++t) {
            const auto k = panel.cell(c, t);
            if (is_missing(rate[k])) continue;
            if (t >= 1 && !is_missing(rate[k - 1])) {
                r.d_i_q[k] = rate[k] - rate[k - 1];
                r.ind_q[k] = r.d_i_q[k] < 0.0 ? 1.0 : 0.0;
            }
            if (t >= 4 && !is_missing(rate[k - 4])) {
                r.d_i_a[k] = rate[k] - rate[k - 4];
                r.ind_a[k] = r.d_i_a[k] < 0.0 ? 1.0 : 0.0;
            }
        }
    return r;
}

PanelDataset attach_regimes(const PanelDataset& panel, const RegimeVariables& regimes) {
    PanelDataset out = panel;
    out.set_column(kRateChangeQ, regimes.d_i_q, Transform::Diff);
    out.set_column(kRateChangeA, regimes.d_i_a, Transform::Diff);
    out.set_column(kIndicatorQ, regimes.ind_q, Transform::Level);
    out.set_column(kIndicatorA, regimes.ind_a, Transform::Level);
    return out;
}

HpResult hp_filter(std::span<const double> y, double lambda) {
    const std::size_t n = y.size();
    if (!(lambda > 0.0)) throw Error("data", "InvalidLambda", "lambda must be positive");
    for (std::size_t t = 0; t < n; ++t)
        if (is_missing(y[t])) throw Error("data", "InteriorMissing", "missing value at position " + std::to_string(t));
    if (n < 4) throw Error("data", "SeriesTooShort", "need at least 4 observations, got " + std::to_string(n));

    // Band of A = I + lambda D'D: a0 diagonal, a1 first and a2 second super-diagonal.
    std::vector<double> a0(n, 1.0), a1(n, 0.0), a2(n, 0.0);
    const double coef[3] = {1.0, -2.0, 1.0};
    for (std::size_t r = 0; r + 2 < n; ++r)
        for (int i = 0; i < 3; ++i) {
            a0[r + i] += lambda * coef[i] * coef[i];
            if (i < 2) a1[r + i] += lambda * coef[i] * coef[i + 1];
            if (i < 1) a2[r + i] += lambda * coef[i] * coef[i + 2];
        }

    // A = L D L' with unit lower-triangular L of bandwidth 2.
    std::vector<double> d(n), l1(n, 0.0), l2(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double di = a0[i];
        if (i >= 1) di -= l1[i - 1] * l1[i - 1] * d[i - 1];
        if (i >= 2) di -= l2[i - 2] * l2[i - 2] * d[i - 2];
        d[i] = di;
        double v1 = a1[i];
        if (i >= 1) v1 -= l2[i - 1] * l1[i - 1] * d[i - 1];
        l1[i] = v1 / di;
        l2[i] = a2[i] / di;
    }
    std::vector<double> z(n);
    for (std::size_t i = 0; i < n; ++i) {
        double v = y[i];
        if (i >= 1) v -= l1[i - 1] * z[i - 1];
        if (i >= 2) v -= l2[i - 2] * z[i - 2];
        z[i] = v;
    }
    for (std::size_t i = 0; i < n; ++i) z[i] /= d[i];
    HpResult out{std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t k = n; k-- > 0;) {
        double v = z[k];
        if (k + 1 < n) v -= l1[k] * out.trend[k + 1];
        if (k + 2 < n) v -= l2[k] * out.trend[k + 2];
        out.trend[k] = v;
    }
    for (std::size_t i = 0; i < n; ++i) out.cycle[i] = y[i] - out.trend[i];
    return out;
}

std::vector<double> output_gap(const PanelDataset& panel, const std::string& level_column, double lambda) {
    std::vector<double> out(panel.column(level_column).size(), kMissing);
    for (int c = 0; c < panel.n_countries(); ++c) {
        const auto s = panel.series(level_column, c);
        int lo = 0, hi = static_cast<int>(s.size()) - 1;
        while (lo <= hi && is_missing(s[lo])) ++lo;
        while (hi >= lo && is_missing(s[hi])) --hi;
        if (lo > hi) continue;
        std::vector<double> logs;
        for (int t = lo; t <= hi; ++t) {
            if (!is_missing(s[t]) && s[t] <= 0.0)
                throw Error("data", "NonPositiveLevel", "country " + panel.countries()[c] + ", " + level_column);
            logs.push_back(is_missing(s[t]) ? kMissing : 100.0 * std::log(s[t]));
        }
        HpResult hp;
        try {
            hp = hp_filter(logs, lambda);
        } catch (const Error& e) {
            throw Error(e.module(), e.code(), "country " + panel.countries()[c] + ": " + e.detail());
        }
        for (int t = lo; t <= hi; ++t) out[panel.cell(c, t)] = hp.cycle[t - lo];
    }
    return out;
}

std::vector<ForecastRecord> parse_forecasts(std::istream& in) {
    const auto table = csv::parse(in);
    const int cc = table.column("country"), ec = table.column("edition"), tc = table.column("target_year"),
              vc = table.column("value");
    for (auto [idx, name] : {std::pair{cc, "country"}, {ec, "edition"}, {tc, "target_year"}, {vc, "value"}})
        if (idx < 0) throw Error("data", "MissingColumn", std::string("forecast file lacks '") + name + "'");
    std::vector<ForecastRecord> out;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& f = table.rows[r];
        const auto line = std::to_string(table.line_numbers[r]);
        ForecastRecord rec;
        rec.country = f.at(cc);
        const auto& ed = f.at(ec);
        if (ed.size() != 7 || ed[4] != '-') throw Error("data", "UnparseableEdition", "line " + line + ": '" + ed + "'");
        try {
            rec.edition_year = std::stoi(ed.substr(0, 4));
            rec.edition_month = std::stoi(ed.substr(5, 2));
            rec.target_year = std::stoi(f.at(tc));
            std::size_t used = 0;
            rec.value = std::stod(f.at(vc), &used);
            if (used != f.at(vc).size() || !std::isfinite(rec.value)) throw std::invalid_argument("value");
        } catch (const std::exception&) {
            throw Error("data", "UnparseableValue", "forecast file line " + line);
        }
        if (rec.edition_month < 1 || rec.edition_month > 12)
            throw Error("data", "UnparseableEdition", "line " + line + ": '" + ed + "'");
        out.push_back(rec);
    }
    return out;
}

std::vector<ForecastRecord> load_forecasts(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("data", "FileNotFound", "cannot open " + path.string());
    return parse_forecasts(in);
}

PanelDataset merge_anticipation(const PanelDataset& panel, const std::vector<ForecastRecord>& forecasts,
                                const std::optional<PeriodWindow>& window) {
    using Key = std::tuple<std::string, int, int, int>;
    std::map<Key, double> lookup;
    for (const auto& f : forecasts) {
        Key key{f.country, f.edition_year, f.edition_month, f.target_year};
        auto [it, fresh] = lookup.emplace(key, f.value);
        if (!fresh && it->second != f.value)
            throw Error("data", "DuplicateForecast",
                        f.country + " edition " + std::to_string(f.edition_year) + "-" +
                            std::to_string(f.edition_month) + " target " + std::to_string(f.target_year));
    }
    std::vector<double> col(static_cast<std::size_t>(panel.n_countries()) * panel.n_periods(), kMissing);
    for (int c = 0; c < panel.n_countries(); ++c)
        for (int t = 0; t < panel.n_periods(); ++t) {
            const Period p = panel.period(t);
            if (window && !window->contains(p)) continue;
            const bool first_half = p.quarter <= 2;
            const int ed_year = first_half ? p.year - 1 : p.year;
            const int ed_month = first_half ? 12 : 6;
            const int target = first_half ? p.year : p.year + 1;
            auto it = lookup.find(Key{panel.countries()[c], ed_year, ed_month, target});
            if (it == lookup.end()) {
                char ed[16];
                std::snprintf(ed, sizeof ed, "%04d-%02d", ed_year, ed_month);
                throw Error("data", "MissingForecast",
                            "(" + panel.countries()[c] + ", " + p.str() + ") requires edition " + ed + " target " +
                                std::to_string(target));
            }
            col[panel.cell(c, t)] = it->second;
        }
    PanelDataset out = panel;
    out.set_column(kGdpForecast, std::move(col), Transform::Level);
    return out;
}

std::vector<SummaryRow> summary_stats(const PanelDataset& panel, const std::vector<std::string>& columns) {
    std::vector<SummaryRow> out;
    for (int c = 0; c < panel.n_countries(); ++c)
        for (const auto& name : columns) {
            const auto s = panel.series(name, c);
            SummaryRow row{panel.countries()[c], name};
            for (double v : s)
                if (!is_missing(v)) ++row.n;
            row.mean = stats::mean(s);
            row.sd = stats::sample_sd(s);
            out.push_back(row);
        }
    return out;
}

std::vector<SummaryRow> summary_stats(const PanelDataset& panel) {
    return summary_stats(panel, panel.column_names());
}

}  // namespace lpma
