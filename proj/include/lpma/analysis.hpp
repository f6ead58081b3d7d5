#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "lpma/bootstrap.hpp"
#include "lpma/factor.hpp"
#include "lpma/inference.hpp"
#include "lpma/mallows.hpp"
#include "lpma/projection.hpp"

namespace lpma {

struct AnalysisOptions {
    DesignOptions design;
    std::vector<ModelForm> forms{kCandidateForms.begin(), kCandidateForms.end()};
    WeightCriterion criterion = WeightCriterion::Mallows;
    RegimeQuartiles quartiles;
    std::optional<int> bandwidth;
    bool covariance = true;  // per-model robust covariance
    bool tests = true;       // baseline fit and equality test
    // Interactive fixed effects: fixed_factors >= 0 fixes r, otherwise
    // factor_r_max >= 0 selects r per model; both negative disables factors.
    int factor_r_max = -1;
    int fixed_factors = -1;
    FactorOptions factor;
    // Country-block bootstrap draws; 0 disables it.
    int bootstrap = 0;
    std::uint64_t bootstrap_seed = 0;
    unsigned threads = 1;

    bool factors() const noexcept { return factor_r_max >= 0 || fixed_factors >= 0; }
};

struct SampleAudit {
    int rows = 0;
    Period first, last;  // base periods
};

// Everything estimated at one horizon on the common sample.
struct HorizonAnalysis {
    int horizon = 0;
    CandidateSet candidates;
    MallowsWeights weights;
    std::vector<AveragedPoint> points;  // loosening, tightening
    std::optional<HorizonFit> baseline;
    std::vector<IrfPoint> baseline_points;
    std::optional<PointTests> equality;
    std::optional<PointTests> boot_equality;
    int bootstrap_failed = 0;
    std::vector<FactorDiagnostic> factor_diagnostics;
    SampleAudit audit;
};

std::shared_ptr<const DesignMatrix> make_design(const PanelDataset& panel, const RegimeVariables& regimes,
                                                const ModelSpec& spec, int horizon, const DesignOptions& options);

HorizonAnalysis analyze_horizon(const PanelDataset& panel, const RegimeVariables& regimes, const ModelSpec& spec,
                                int horizon, const AnalysisOptions& options);

SampleAudit audit_rows(const DesignMatrix& design);

// Fitted values of `fit` applied to another design with matching column names.
Eigen::VectorXd predict(const HorizonFit& fit, const DesignMatrix& design);

}  // namespace lpma
