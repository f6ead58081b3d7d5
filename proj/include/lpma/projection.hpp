#pragma once

#include <array>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpma/panel.hpp"
#include "lpma/transforms.hpp"

namespace lpma {

enum class ModelForm { Baseline, A, B, C, D, E };

const char* to_string(ModelForm f) noexcept;
ModelForm parse_form(const std::string& text);

// The Mallows candidate set; Baseline is the test reference only.
inline constexpr std::array<ModelForm, 5> kCandidateForms{ModelForm::A, ModelForm::B, ModelForm::C, ModelForm::D,
                                                          ModelForm::E};
inline constexpr std::array<ModelForm, 6> kAllForms{ModelForm::Baseline, ModelForm::A, ModelForm::B,
                                                    ModelForm::C,        ModelForm::D, ModelForm::E};

// Number of policy-interaction columns the form adds to the baseline.
int interaction_count(ModelForm f) noexcept;

struct ModelSpec {
    ModelForm form = ModelForm::Baseline;
    std::string outcome;
    std::string policy;
    std::vector<std::string> controls;
    int control_lags = 2;  // dated copies of each control: t, t-1, ...
    int policy_lags = 1;   // policy lags beyond t
    std::vector<std::string> extra_controls;  // dated t only (gdp_forecast, output_gap)
    bool include_fixed_effects = true;

    ModelSpec with_form(ModelForm f) const {
        ModelSpec s = *this;
        s.form = f;
        return s;
    }
};

enum class ColumnRole {
    FixedEffect,
    Control,
    ExtraControl,
    Policy,       // delta1
    PolicyLag,    // delta2
    Interaction,  // delta3: policy x (indicator | change)
    RateSlope,    // delta4 (Model E): policy x d_i_q
    TripleSlope,  // delta5 (Model E): policy x d_i_q x ind_q
    Factor,
};

struct DesignColumn {
    std::string name;
    ColumnRole role;
};

struct RowId {
    int country;
    int period;  // panel index of the base period t
};

struct DesignOptions {
    std::optional<PeriodWindow> window;
    // Require all four regime series on every row, so that every form shares
    // the same sample at a given horizon.
    bool common_regime_sample = true;
};

// Regime values at each row's base period.
struct RowRegimes {
    Eigen::VectorXd d_i_q, d_i_a, ind_q, ind_a;
};

struct DesignMatrix {
    ModelSpec spec;
    int horizon = 1;
    std::vector<std::string> countries;
    Period first_period;
    std::vector<RowId> rows;  // sorted by (country, period)
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    std::vector<DesignColumn> columns;  // retained columns, in design order
    std::vector<std::string> dropped;   // pruned as linearly dependent
    RowRegimes regimes;

    int dim() const noexcept { return static_cast<int>(X.cols()); }
    int n_rows() const noexcept { return static_cast<int>(X.rows()); }
    int index_of(ColumnRole role) const noexcept;  // first retained column with role, -1 if none
    int index_of(const std::string& name) const noexcept;
    Period base_period(std::size_t row) const noexcept { return first_period + rows[row].period; }
};

inline constexpr double kPruneTolerance = 1e-10;

DesignMatrix build_design(const PanelDataset& panel, const RegimeVariables& regimes, const ModelSpec& spec,
                          int horizon, const DesignOptions& options = {});

// Columns before pruning; exposed for column-count checks.
std::vector<DesignColumn> design_columns(const ModelSpec& spec, const std::vector<std::string>& countries);

// In-order pivoted Gram-Schmidt: a column is dropped when its residual after
// projection on the already retained (unit-scaled) columns has norm below
// `tolerance`. Returns the retained indices.
std::vector<int> independent_columns(const Eigen::MatrixXd& X, double tolerance = kPruneTolerance);

struct HorizonFit {
    std::shared_ptr<const DesignMatrix> design;
    Eigen::VectorXd coef;
    Eigen::VectorXd residuals;
    Eigen::VectorXd leverage;  // diagonal of the hat matrix
    Eigen::MatrixXd bread;     // (X'X)^{-1}
    double sigma2_ols = 0.0;
    int t_eff = 0;
    Eigen::MatrixXd robust_cov;  // panel Newey-West at `bandwidth`
    int bandwidth = 0;

    int horizon() const noexcept { return design->horizon; }
    int dim() const noexcept { return design->dim(); }
    ModelForm form() const noexcept { return design->spec.form; }
    double coefficient(ColumnRole role) const;  // 0 when the column was pruned
    double coefficient(const std::string& name) const;
    double se(const std::string& name) const;
};

// Least squares by Householder QR. The default bandwidth is the horizon,
// capped below the longest per-country sample.
HorizonFit fit_horizon(const DesignMatrix& design);
HorizonFit fit_horizon(const DesignMatrix& design, int bandwidth);
HorizonFit fit_horizon(std::shared_ptr<const DesignMatrix> design, std::optional<int> bandwidth = std::nullopt);

struct FitOptions {
    std::optional<int> bandwidth;
    bool covariance = true;  // robust_cov left empty when off
    bool leverage = true;
};
HorizonFit fit_horizon(std::shared_ptr<const DesignMatrix> design, const FitOptions& options);

int default_bandwidth(const DesignMatrix& design);

// Regime at which a marginal effect is evaluated. Indicator-based forms need
// `indicator`; change-based forms need `value`; Model E needs both.
struct RegimeDescriptor {
    std::string label;
    std::optional<double> indicator;
    std::optional<double> value;
};

struct IrfPoint {
    int horizon = 0;
    std::string regime;
    double value = 0.0;
    double se = 0.0;
};

// Gradient g with marginal effect = g'coef over the fit's retained columns.
Eigen::VectorXd effect_gradient(const DesignMatrix& design, const RegimeDescriptor& regime);
// Same, with the regime values read from row `row` of the design.
Eigen::VectorXd effect_gradient_at_row(const DesignMatrix& design, std::size_t row);

IrfPoint irf_point(const HorizonFit& fit, const RegimeDescriptor& regime);

enum class Stance { Loosening, Tightening };
const char* to_string(Stance s) noexcept;

// Evaluation values for the change-based forms.
struct RegimeQuartiles {
    double q1_quarterly = -0.40;
    double q3_quarterly = 0.23;
    double q1_annual = -1.35;
    double q3_annual = 0.66;
};

// Published evaluation points for comparability.
RegimeQuartiles reference_quartiles() noexcept;
// Pooled empirical quartiles over the window's non-missing cells.
RegimeQuartiles sample_quartiles(const PanelDataset& panel, const RegimeVariables& regimes,
                                 const std::optional<PeriodWindow>& window);

// Loosening: negative indicator / first quartile; tightening: zero indicator / third quartile.
RegimeDescriptor regime_for(ModelForm form, Stance stance, const RegimeQuartiles& q);

struct ProjectionResult {
    ModelSpec spec;
    std::map<int, HorizonFit> fits;
    std::map<int, std::string> failures;  // horizon -> error code and message
};

ProjectionResult fit_projection(const PanelDataset& panel, const RegimeVariables& regimes, const ModelSpec& spec,
                                const std::set<int>& horizons, const DesignOptions& options = {});

void write_projection_csv(std::ostream& out, const std::vector<ProjectionResult>& results, bool header = true);

}  // namespace lpma
