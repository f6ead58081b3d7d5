#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpma/analysis.hpp"
#include "lpma/config.hpp"
#include "lpma/inference.hpp"
#include "lpma/transforms.hpp"

namespace lpma {

inline constexpr int kOutputSchemaVersion = 1;
const char* library_version() noexcept;

struct PreparedData {
    PanelDataset raw;    // levels as loaded
    PanelDataset panel;  // transformed, with any extra controls
    RegimeVariables regimes;
    std::vector<std::string> extra_controls;
    std::vector<ZeroVarianceFlag> zero_variance;
};

// Loads the panel, builds the regimes from the rate levels, applies the
// transforms and adds the output gap and GDP forecasts when requested.
PreparedData prepare_data(const RunConfig& config);

ModelSpec cell_spec(const RunConfig& config, const PreparedData& data, const std::string& outcome,
                    const std::string& policy);
RegimeQuartiles evaluation_quartiles(const RunConfig& config, const PreparedData& data, const PeriodWindow& window);

struct CellResult {
    std::string outcome, policy, window;
    PeriodWindow range;
    RegimeQuartiles quartiles;
    std::map<int, HorizonAnalysis> horizons;
    std::map<int, std::string> failures;  // horizon -> qualified error
    std::map<int, std::uint64_t> seeds;
    TestReport tests;
};

struct PipelineResult {
    std::vector<CellResult> cells;  // outcome, policy, window in config order
    nlohmann::json run;
    bool complete() const;
};

// `tests` false skips the baseline fits, equality tests and bootstrap.
PipelineResult run_pipeline(const RunConfig& config, bool tests = true);
PipelineResult run_pipeline(const RunConfig& config, const PreparedData& data, bool tests = true);

// <out>/run.json and summary.csv, plus <out>/<window>/{irf,weights,tests}.csv
// and <out>/<window>/factors/<outcome>_<policy>.csv when factors are on.
void write_bundle(const PipelineResult& result, const RunConfig& config, const PreparedData& data,
                  const std::filesystem::path& out);

void write_irf_csv(std::ostream& out, const std::vector<const CellResult*>& cells, bool header = true);
void write_weights_csv(std::ostream& out, const std::vector<const CellResult*>& cells, bool header = true);
void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows, bool header = true);

}  // namespace lpma
