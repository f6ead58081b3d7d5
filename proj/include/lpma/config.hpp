#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpma/mallows.hpp"
#include "lpma/panel.hpp"
#include "lpma/period.hpp"
#include "lpma/projection.hpp"
#include "lpma/simulation.hpp"

namespace lpma {

// Open bounds take the panel's first or last quarter.
struct WindowConfig {
    std::string name;
    std::optional<Period> first, last;

    PeriodWindow resolve(const PanelDataset& panel) const;
};

enum class RegimeEvaluation { SampleQuartiles, ReferenceValues };
const char* to_string(RegimeEvaluation r) noexcept;
RegimeEvaluation parse_regime_evaluation(const std::string& text);

struct RunConfig {
    std::filesystem::path panel;
    std::filesystem::path forecasts;  // required when anticipation is on

    std::string rate = "short_rate";
    std::map<std::string, Transform> transforms{
        {"gdp", Transform::LogDiff100},          {"cpi", Transform::LogDiff100},
        {"reer", Transform::LogDiff100},         {"unemployment", Transform::LogDiff100},
        {"short_rate", Transform::Diff},         {"rr", Transform::LogDiff100},
        {"almp", Transform::LogDiff100},         {"epl", Transform::LogDiff100}};
    std::vector<std::string> outcomes{"gdp", "cpi", "unemployment", "reer"};
    std::vector<std::string> policies{"rr", "almp", "epl"};
    std::vector<std::string> controls{"cpi", "gdp", "reer", "unemployment", "short_rate"};
    int control_lags = 2;
    int policy_lags = 1;
    std::vector<ModelForm> models{kCandidateForms.begin(), kCandidateForms.end()};
    std::set<int> horizons{1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
    std::vector<WindowConfig> windows{{"full", std::nullopt, std::nullopt},
                                      {"pre1999", Period{1985, 1}, Period{1998, 4}},
                                      {"post1999", Period{1999, 1}, Period{2010, 4}}};
    double alpha = 0.1;
    double hp_lambda = 1600.0;
    std::optional<int> bandwidth;  // empty: the horizon rule
    RegimeEvaluation regime_evaluation = RegimeEvaluation::SampleQuartiles;

    bool anticipation = false;
    bool output_gap = false;
    std::string output_gap_series = "gdp";
    bool factors = false;
    int factor_r_max = 4;
    int fixed_factors = -1;
    bool bootstrap = false;
    int bootstrap_draws = 199;
    bool cv1 = false;

    std::optional<std::uint64_t> seed;
    unsigned threads = 1;

    void validate() const;
};

// YAML mapping; relative paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

struct SimulateConfig {
    DgpConfig dgp;
    McOptions mc;
};

// YAML with a `dgp` mapping (DgpConfig fields) and experiment keys
// (replications, seed, horizons, identity, msfe, factor_r_max, irf_draws,
// alpha, tests, bootstrap). The seed is required.
SimulateConfig parse_simulate_config(const std::string& text);
SimulateConfig load_simulate_config(const std::filesystem::path& path);

// Generic YAML to JSON: scalars become integers, reals or booleans when they
// parse as such, strings otherwise.
nlohmann::json yaml_to_json(const std::string& text);

}  // namespace lpma
