#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lpma/period.hpp"

namespace lpma {

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();
inline bool is_missing(double v) noexcept { return std::isnan(v); }

enum class Transform { Level, LogDiff100, Diff };

const char* to_string(Transform t) noexcept;
Transform parse_transform(const std::string& text);

// Country x quarter table. Every column shares the same quarterly index;
// a cell holding NaN is missing (non-finite values are rejected on entry,
// so NaN never carries any other meaning).
class PanelDataset {
public:
    PanelDataset() = default;
    PanelDataset(std::vector<std::string> countries, Period first, int n_periods);

    const std::vector<std::string>& countries() const noexcept { return countries_; }
    int n_countries() const noexcept { return static_cast<int>(countries_.size()); }
    int n_periods() const noexcept { return n_periods_; }
    Period first_period() const noexcept { return first_; }
    Period period(int t) const noexcept { return first_ + t; }
    std::vector<Period> periods() const;
    int period_index(const Period& p) const noexcept { return p - first_; }
    int country_index(const std::string& name) const;  // -1 when absent

    std::size_t cell(int country, int t) const noexcept {
        return static_cast<std::size_t>(country) * n_periods_ + t;
    }

    bool has_column(const std::string& name) const { return columns_.count(name) != 0; }
    const std::vector<std::string>& column_names() const noexcept { return order_; }
    std::span<const double> column(const std::string& name) const;
    std::span<const double> series(const std::string& name, int country) const;
    Transform transform(const std::string& name) const;
    double value(const std::string& name, int country, int t) const {
        return column(name)[cell(country, t)];
    }

    // Adds or replaces a column; throws on size mismatch or non-finite cells.
    void set_column(const std::string& name, std::vector<double> values, Transform tag);
    void set_series(const std::string& name, int country, std::span<const double> values);

    // Rows physically present in the source file, per country.
    const std::vector<int>& source_rows() const noexcept { return source_rows_; }
    void set_source_rows(std::vector<int> counts) { source_rows_ = std::move(counts); }

    // New panel built from the given country indices (repeats allowed);
    // repeated countries get distinct labels "<name>#k".
    PanelDataset resample_countries(const std::vector<int>& picks) const;

private:
    struct Column {
        std::vector<double> values;
        Transform tag = Transform::Level;
    };
    const Column& get(const std::string& name) const;

    std::vector<std::string> countries_;
    Period first_{};
    int n_periods_ = 0;
    std::map<std::string, Column> columns_;
    std::vector<std::string> order_;
    std::vector<int> source_rows_;
};

struct PanelSchema {
    std::vector<std::string> required;  // series columns that must be present
};

// Wide CSV: country,period,<series...>; period "YYYY-Qn"; empty field = missing.
PanelDataset load_panel(const std::filesystem::path& path, const PanelSchema& schema = {});
PanelDataset parse_panel(std::istream& in, const PanelSchema& schema = {});

void write_panel(std::ostream& out, const PanelDataset& panel);

// (country, column) pairs whose non-missing values have zero variance.
struct ZeroVarianceFlag {
    std::string country;
    std::string column;
};
std::vector<ZeroVarianceFlag> zero_variance_columns(const PanelDataset& panel,
                                                    const std::vector<std::string>& columns);

}  // namespace lpma
