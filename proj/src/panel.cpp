#include "lpma/panel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>

#include "lpma/csv.hpp"
#include "lpma/error.hpp"

namespace lpma {

const char* to_string(Transform t) noexcept {
    switch (t) {
        case Transform::Level: return "level";
        case Transform::LogDiff100: return "log_diff_100";
        case Transform::Diff: return "diff";
    }
    return "level";
}

Transform parse_transform(const std::string& text) {
    if (text == "level") return Transform::Level;
    if (text == "log_diff_100") return Transform::LogDiff100;
    if (text == "diff") return Transform::Diff;
    throw Error("data", "UnknownTransform", "'" + text + "' (expected level | log_diff_100 | diff)");
}

PanelDataset::PanelDataset(std::vector<std::string> countries, Period first, int n_periods)
    : countries_(std::move(countries)), first_(first), n_periods_(n_periods),
      source_rows_(countries_.size(), n_periods) {
    if (n_periods < 0) throw Error("data", "InvalidPanel", "negative period count");
}

std::vector<Period> PanelDataset::periods() const {
    std::vector<Period> out;
    out.reserve(n_periods_);
    for (int t = 0; t < n_periods_; ++t) out.push_back(first_ + t);
    return out;
}

int PanelDataset::country_index(const std::string& name) const {
    auto it = std::find(countries_.begin(), countries_.end(), name);
    return it == countries_.end() ? -1 : static_cast<int>(it - countries_.begin());
}

const PanelDataset::Column& PanelDataset::get(const std::string& name) const {
    auto it = columns_.find(name);
    if (it == columns_.end()) throw Error("data", "MissingColumn", "column '" + name + "' not in panel");
    return it->second;
}

std::span<const double> PanelDataset::column(const std::string& name) const {
    return get(name).values;
}

std::span<const double> PanelDataset::series(const std::string& name, int country) const {
    return column(name).subspan(cell(country, 0), n_periods_);
}

Transform PanelDataset::transform(const std::string& name) const { return get(name).tag; }

void PanelDataset::set_column(const std::string& name, std::vector<double> values, Transform tag) {
    if (values.size() != static_cast<std::size_t>(n_countries()) * n_periods_)
        throw Error("data", "ShapeMismatch", "column '" + name + "' has wrong length");
    for (double v : values)
        if (std::isinf(v)) throw Error("data", "NonFinite", "column '" + name + "' contains infinity");
    if (!columns_.count(name)) order_.push_back(name);
    columns_[name] = Column{std::move(values), tag};
}

void PanelDataset::set_series(const std::string& name, int country, std::span<const double> values) {
    auto it = columns_.find(name);
    if (it == columns_.end()) throw Error("data", "MissingColumn", "column '" + name + "' not in panel");
    if (values.size() != static_cast<std::size_t>(n_periods_))
        throw Error("data", "ShapeMismatch", "series for '" + name + "' has wrong length");
    std::copy(values.begin(), values.end(), it->second.values.begin() + cell(country, 0));
}

PanelDataset PanelDataset::resample_countries(const std::vector<int>& picks) const {
    std::vector<std::string> names;
    std::map<int, int> seen;
    for (int c : picks) {
        const int k = seen[c]++;
        names.push_back(k == 0 ? countries_.at(c) : countries_.at(c) + "#" + std::to_string(k + 1));
    }
    PanelDataset out(names, first_, n_periods_);
    std::vector<int> rows;
    for (int c : picks) rows.push_back(source_rows_.at(c));
    out.source_rows_ = rows;
    for (const auto& name : order_) {
        const auto& col = columns_.at(name);
        std::vector<double> v;
        v.reserve(picks.size() * n_periods_);
        for (int c : picks)
            v.insert(v.end(), col.values.begin() + cell(c, 0), col.values.begin() + cell(c, 0) + n_periods_);
        out.set_column(name, std::move(v), col.tag);
    }
    return out;
}

namespace {

double parse_cell(const std::string& field, int line, const std::string& column) {
    if (field.empty()) return kMissing;
    double v = 0.0;
    auto first = field.data();
    auto last = field.data() + field.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec != std::errc{} || p != last)
        throw Error("data", "UnparseableValue",
                    "line " + std::to_string(line) + ", column '" + column + "': '" + field + "'");
    if (!std::isfinite(v))
        throw Error("data", "NonFinite",
                    "line " + std::to_string(line) + ", column '" + column + "': '" + field + "'");
    return v;
}

}  // namespace

PanelDataset parse_panel(std::istream& in, const PanelSchema& schema) {
    const csv::Table table = csv::parse(in);
    const auto& h = table.header;
    const int ccol = table.column("country");
    const int pcol = table.column("period");
    if (ccol < 0) throw Error("data", "MissingColumn", "column 'country' absent from header");
    if (table.column("variable") >= 0 || table.column("series") >= 0 ||
        (table.column("value") >= 0 && h.size() <= 4))
        throw Error("data", "LongFormat",
                    "long-format input (variable/value columns) is not accepted; supply one row per "
                    "country-quarter with one column per series");
    if (pcol < 0) throw Error("data", "MissingColumn", "column 'period' absent from header");
    for (const auto& req : schema.required)
        if (table.column(req) < 0) throw Error("data", "MissingColumn", "column '" + req + "' absent from header");

    std::vector<int> series_cols;
    std::set<std::string> names;
    for (std::size_t j = 0; j < h.size(); ++j) {
        if (static_cast<int>(j) == ccol || static_cast<int>(j) == pcol) continue;
        if (!names.insert(h[j]).second) throw Error("data", "DuplicateColumn", "column '" + h[j] + "' repeated");
        series_cols.push_back(static_cast<int>(j));
    }

    struct Row {
        std::string country;
        Period period;
        int line;
        std::size_t index;
    };
    std::vector<Row> rows;
    rows.reserve(table.rows.size());
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& f = table.rows[r];
        const int line = table.line_numbers[r];
        if (f.size() != h.size())
            throw Error("data", "RaggedRow",
                        "line " + std::to_string(line) + " has " + std::to_string(f.size()) + " fields, expected " +
                            std::to_string(h.size()));
        auto p = parse_period(f[pcol]);
        if (!p)
            throw Error("data", "UnparseablePeriod",
                        "line " + std::to_string(line) + ": '" + f[pcol] + "' (expected YYYY-Qn)");
        rows.push_back(Row{f[ccol], *p, line, r});
    }
    if (rows.empty()) throw Error("data", "EmptyInput", "no data rows");

    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        return a.country != b.country ? a.country < b.country : a.period < b.period;
    });
    for (std::size_t r = 1; r < rows.size(); ++r)
        if (rows[r].country == rows[r - 1].country && rows[r].period == rows[r - 1].period)
            throw Error("data", "DuplicateRow",
                        "(\"" + rows[r].country + "\",\"" + rows[r].period.str() + "\") at lines " +
                            std::to_string(rows[r - 1].line) + " and " + std::to_string(rows[r].line));

    std::vector<std::string> countries;
    Period lo = rows.front().period, hi = rows.front().period;
    for (const auto& row : rows) {
        if (countries.empty() || countries.back() != row.country) countries.push_back(row.country);
        lo = std::min(lo, row.period);
        hi = std::max(hi, row.period);
    }
    PanelDataset panel(countries, lo, (hi - lo) + 1);
    std::vector<int> counts(countries.size(), 0);
    std::vector<std::vector<double>> data(series_cols.size(),
                                          std::vector<double>(countries.size() * panel.n_periods(), kMissing));
    int ci = -1;
    std::string current;
    for (const auto& row : rows) {
        if (ci < 0 || row.country != current) {
            ++ci;
            current = row.country;
        }
        ++counts[ci];
        const auto cell = panel.cell(ci, panel.period_index(row.period));
        const auto& f = table.rows[row.index];
        for (std::size_t s = 0; s < series_cols.size(); ++s)
            data[s][cell] = parse_cell(f[series_cols[s]], row.line, h[series_cols[s]]);
    }
    for (std::size_t s = 0; s < series_cols.size(); ++s)
        panel.set_column(h[series_cols[s]], std::move(data[s]), Transform::Level);
    panel.set_source_rows(std::move(counts));
    return panel;
}

PanelDataset load_panel(const std::filesystem::path& path, const PanelSchema& schema) {
    std::ifstream in(path);
    if (!in) throw Error("data", "FileNotFound", "cannot open " + path.string());
    return parse_panel(in, schema);
}

void write_panel(std::ostream& out, const PanelDataset& panel) {
    csv::Writer w(out);
    std::vector<std::string> header{"country", "period"};
    for (const auto& n : panel.column_names()) header.push_back(n);
    w.row(header);
    for (int c = 0; c < panel.n_countries(); ++c)
        for (int t = 0; t < panel.n_periods(); ++t) {
            std::vector<std::string> f{panel.countries()[c], panel.period(t).str()};
            for (const auto& n : panel.column_names()) f.push_back(csv::format_number(panel.value(n, c, t)));
            w.row(f);
        }
}

std::vector<ZeroVarianceFlag> zero_variance_columns(const PanelDataset& panel,
                                                    const std::vector<std::string>& columns) {
    std::vector<ZeroVarianceFlag> out;
    for (const auto& name : columns)
        for (int c = 0; c < panel.n_countries(); ++c) {
            double lo = std::numeric_limits<double>::infinity(), hi = -lo;
            for (double v : panel.series(name, c))
                if (!is_missing(v)) {
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
            if (lo <= hi && lo == hi) out.push_back({panel.countries()[c], name});
        }
    return out;
}

}  // namespace lpma
