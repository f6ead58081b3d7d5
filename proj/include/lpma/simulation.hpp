#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "lpma/analysis.hpp"
#include "lpma/panel.hpp"
#include "lpma/projection.hpp"
#include "lpma/transforms.hpp"

namespace lpma {

enum class NoiseKind { Iid, Ma, Heteroskedastic };
const char* to_string(NoiseKind k) noexcept;
NoiseKind parse_noise(const std::string& text);

// Horizon-1 structural equation, for country i and base period t:
//   dy_{t+1} = a_i + d1 p_t + d2 p_{t-1} + interaction(form, p_t, rates_t)
//              + b'x_t + g'x_{t-1} + l_i'f_{t+1} + e_{t+1}
// Rate changes, the policy and the controls are independent AR(1) processes.
struct DgpConfig {
    ModelForm true_form = ModelForm::A;
    double delta1 = 1.0, delta2 = 0.0, delta3 = 0.0, delta4 = 0.0, delta5 = 0.0;
    std::vector<double> beta{0.3, -0.2};
    std::vector<double> gamma{0.1, 0.05};
    std::vector<double> alpha;  // per country; drawn N(0, alpha_sd^2) when empty
    double alpha_sd = 0.5;
    int n_countries = 11;
    int n_periods = 200;
    int burn_in = 100;

    NoiseKind noise = NoiseKind::Iid;
    double sigma2 = 1.0;
    std::vector<double> ma;  // MA coefficients on lagged innovations
    double hetero = 0.0;     // variance multiplier 1 + hetero * x1_t^2

    int factors = 0;
    double loading_scale = 1.0;
    double factor_rho = 0.5;
    double regressor_loading = 0.0;  // x1 also loads on the factors

    double rate_rho = 0.3, rate_sd = 0.5, rate_drift = 0.0, rate_start = 3.0;
    double policy_rho = 0.5, policy_sd = 1.0;
    double control_rho = 0.5, control_sd = 1.0;

    std::uint64_t seed = 0;

    void validate() const;
    // Spec matching the generated column names (dy, p, x1..xK).
    ModelSpec model_spec() const;
};

struct DgpTruth {
    // Per panel cell of the outcome: structural conditional mean and shock.
    std::vector<double> conditional_mean, shock;
    std::vector<double> alpha;
    Eigen::MatrixXd factors;   // n_periods x r
    Eigen::MatrixXd loadings;  // N x r
    RegimeQuartiles quartiles; // population quartiles of the rate changes
    std::map<int, std::map<std::string, double>> irf;  // horizon -> regime -> effect
};

struct SyntheticPanel {
    PanelDataset panel;
    RegimeVariables regimes;
    DgpTruth truth;
    ModelSpec spec;
};

inline constexpr const char* kSimRate = "rate";
inline constexpr int kDefaultTruthDraws = 10000;

// Deterministic given config.seed. irf_draws = 0 skips the true-IRF paths.
SyntheticPanel generate_dgp(const DgpConfig& config, int max_horizon = 12, int irf_draws = kDefaultTruthDraws);

RegimeQuartiles population_quartiles(const DgpConfig& config);

// Effect of a unit policy impulse at t on dy_{t+k}, conditional on the true
// form's regime at t, averaged over simulated rate paths (antithetic pairs).
std::map<int, std::map<std::string, double>> true_irf(const DgpConfig& config, int max_horizon, int draws);

struct McOptions {
    int replications = 2;
    std::uint64_t seed = 0;
    unsigned threads = 1;
    std::set<int> horizons{1};
    bool fit_models = true;
    AnalysisOptions analysis;  // quartiles are replaced by the population values
    bool identity = false;     // C_T(w) - u'u/T - L_T(w) at horizon 1
    bool msfe = false;         // out-of-sample, fresh panel, horizon 1
    int factor_r_max = -1;     // factor-number recovery on the baseline design
    int irf_draws = kDefaultTruthDraws;
    double alpha = 0.1;
};

struct McIrfRow {
    int horizon = 0;
    std::string regime, model;  // model "avg" for the averaged IRF
    double value = 0.0, se = kMissing;
};

struct McReplication {
    int index = 0;
    std::uint64_t seed = 0;
    bool ok = true;
    std::string error;
    std::map<int, std::vector<double>> weights;
    std::vector<McIrfRow> irf;
    double identity = kMissing;
    double msfe_avg = kMissing;
    std::vector<double> msfe_models;
    std::map<int, double> reject_rate;  // equality test, share of (i,t) with p <= alpha
    std::map<int, double> reject_rate_boot;  // same, bootstrap standard errors
    int factors_selected = -1;
    bool ssr_monotone = true;
};

struct McSummaryRow {
    int horizon = 0;
    std::string regime, model;
    double truth = 0.0, mean = 0.0, bias = 0.0, sd = 0.0, mc_se = 0.0, rmse = 0.0, coverage = kMissing;
    int n = 0;
};

struct McReport {
    DgpConfig config;
    McOptions options;
    std::vector<std::string> labels;
    std::vector<McReplication> reps;
    int failed = 0;
    double failure_rate = 0.0;
    bool passed = true;  // failure rate within 1%
    std::map<int, std::map<std::string, double>> truth;
    std::vector<McSummaryRow> irf_summary;
    std::map<int, std::vector<double>> mean_weights;
    double identity_mean = kMissing, identity_se = kMissing;
    double msfe_avg = kMissing;
    std::vector<double> msfe_models;
    std::map<int, double> rejection;
    std::map<int, double> rejection_boot;
    std::map<int, int> factor_counts;  // selected r -> replications
    bool ssr_monotone = true;
};

McReport run_monte_carlo(const DgpConfig& config, const McOptions& options);

nlohmann::json to_json(const DgpConfig& config);
DgpConfig dgp_from_json(const nlohmann::json& j);
nlohmann::json to_json(const McReport& report);
// replications.csv and irf_summary.csv.
void write_mc_tables(const McReport& report, const std::filesystem::path& dir);

// Demo panel in the input file layout: levels for the outcome/control
// series, a policy index and the short rate.
PanelDataset demo_panel(std::uint64_t seed, int n_countries = 11, int n_periods = 104);

}  // namespace lpma
