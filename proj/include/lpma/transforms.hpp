#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpma/panel.hpp"

namespace lpma {

// out_t = 100 * ln(x_t / x_{t-1}); first element and any element touching a
// missing level are missing. Throws data.NonPositiveLevel.
std::vector<double> log_diff_100(std::span<const double> levels);

// out_t = x_t - x_{t-1}.
std::vector<double> first_difference(std::span<const double> levels);

// Applies the requested transform to each listed level column in place
// (per country); the column's tag records the transform.
PanelDataset apply_transforms(const PanelDataset& panel, const std::map<std::string, Transform>& plan);

// Interest-rate environment, aligned with the panel's cell layout.
struct RegimeVariables {
    std::vector<double> d_i_q;  // i_t - i_{t-1}
    std::vector<double> d_i_a;  // i_t - i_{t-4}
    std::vector<double> ind_q;  // 1{d_i_q < 0}
    std::vector<double> ind_a;  // 1{d_i_a < 0}
};

inline constexpr const char* kRateChangeQ = "d_i_q";
inline constexpr const char* kRateChangeA = "d_i_a";
inline constexpr const char* kIndicatorQ = "ind_q";
inline constexpr const char* kIndicatorA = "ind_a";

RegimeVariables build_regimes(const PanelDataset& panel, const std::string& rate_column);

// Copy of the panel with the four regime series added as columns.
PanelDataset attach_regimes(const PanelDataset& panel, const RegimeVariables& regimes);

struct HpResult {
    std::vector<double> trend;
    std::vector<double> cycle;
};

// Hodrick-Prescott filter solved exactly through a banded LDL' factorization
// of (I + lambda D'D). Requires a complete series of length >= 4.
HpResult hp_filter(std::span<const double> series, double lambda);

// Per-country HP cycle of 100*ln(level), computed over each country's
// contiguous observed span. Interior gaps are an error.
std::vector<double> output_gap(const PanelDataset& panel, const std::string& level_column, double lambda);

struct ForecastRecord {
    std::string country;
    int edition_year = 0;
    int edition_month = 0;
    int target_year = 0;
    double value = 0.0;
};

std::vector<ForecastRecord> load_forecasts(const std::filesystem::path& path);
std::vector<ForecastRecord> parse_forecasts(std::istream& in);

// Adds column "gdp_forecast": Q1/Q2 of year t take the December t-1 edition's
// forecast for year t; Q3/Q4 take the June t edition's forecast for t+1.
// Cells outside `window` are left missing.
inline constexpr const char* kGdpForecast = "gdp_forecast";
inline constexpr const char* kOutputGap = "output_gap";
PanelDataset merge_anticipation(const PanelDataset& panel, const std::vector<ForecastRecord>& forecasts,
                                const std::optional<PeriodWindow>& window = std::nullopt);

struct SummaryRow {
    std::string country;
    std::string column;
    int n = 0;
    double mean = kMissing;
    double sd = kMissing;
};

// Sample mean and (n-1) standard deviation per (country, column), missing skipped.
std::vector<SummaryRow> summary_stats(const PanelDataset& panel, const std::vector<std::string>& columns);
std::vector<SummaryRow> summary_stats(const PanelDataset& panel);

}  // namespace lpma
