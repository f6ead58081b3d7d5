#include "lpma/projection.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "lpma/covariance.hpp"
#include "lpma/csv.hpp"
#include "lpma/error.hpp"
#include "lpma/stats.hpp"

namespace lpma {

const char* to_string(ModelForm f) noexcept {
    switch (f) {
        case ModelForm::Baseline: return "Baseline";
        case ModelForm::A: return "A";
        case ModelForm::B: return "B";
        case ModelForm::C: return "C";
        case ModelForm::D: return "D";
        case ModelForm::E: return "E";
    }
    return "Baseline";
}

ModelForm parse_form(const std::string& text) {
    for (auto f : kAllForms)
        if (text == to_string(f)) return f;
    throw Error("projection", "UnknownModel", "'" + text + "' (expected Baseline, A, B, C, D or E)");
}

int interaction_count(ModelForm f) noexcept {
    switch (f) {
        case ModelForm::Baseline: return 0;
        case ModelForm::E: return 3;
        default: return 1;
    }
}

const char* to_string(Stance s) noexcept { return s == Stance::Loosening ? "loosening" : "tightening"; }

int DesignMatrix::index_of(ColumnRole role) const noexcept {
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j].role == role) return static_cast<int>(j);
    return -1;
}

int DesignMatrix::index_of(const std::string& name) const noexcept {
    for (std::size_t j = 0; j < columns.size(); ++j)
        if (columns[j].name == name) return static_cast<int>(j);
    return -1;
}

namespace {

std::string lag_name(const std::string& base, int lag) {
    return lag == 0 ? base : base + "_l" + std::to_string(lag);
}

// Source of each design column, used when filling rows.
enum class Source { Dummy, Intercept, Column, PolicyTimes };
struct ColumnPlan {
    DesignColumn column;
    Source source;
    std::string series;  // panel column for Source::Column
    int lag = 0;
    int country = -1;
    const std::vector<double>* factor_a = nullptr;  // regime multipliers for interactions
    const std::vector<double>* factor_b = nullptr;
};

std::vector<ColumnPlan> plan_columns(const ModelSpec& spec, const std::vector<std::string>& countries,
                                     const RegimeVariables* regimes) {
    std::vector<ColumnPlan> plan;
    if (spec.include_fixed_effects) {
        for (std::size_t c = 0; c < countries.size(); ++c)
            plan.push_back({{"fe:" + countries[c], ColumnRole::FixedEffect}, Source::Dummy, {}, 0, static_cast<int>(c)});
    } else {
        plan.push_back({{"const", ColumnRole::FixedEffect}, Source::Intercept, {}, 0});
    }
    for (int lag = 0; lag < spec.control_lags; ++lag)
        for (const auto& c : spec.controls)
            plan.push_back({{lag_name(c, lag), ColumnRole::Control}, Source::Column, c, lag});
    for (const auto& e : spec.extra_controls)
        plan.push_back({{e, ColumnRole::ExtraControl}, Source::Column, e, 0});
    plan.push_back({{spec.policy, ColumnRole::Policy}, Source::Column, spec.policy, 0});
    for (int lag = 1; lag <= spec.policy_lags; ++lag)
        plan.push_back({{lag_name(spec.policy, lag), ColumnRole::PolicyLag}, Source::Column, spec.policy, lag});

    const auto* iq = regimes ? &regimes->ind_q : nullptr;
    const auto* ia = regimes ? &regimes->ind_a : nullptr;
    const auto* dq = regimes ? &regimes->d_i_q : nullptr;
    const auto* da = regimes ? &regimes->d_i_a : nullptr;
    auto inter = [&](const std::string& suffix, ColumnRole role, const std::vector<double>* a,
                     const std::vector<double>* b = nullptr) {
        plan.push_back({{spec.policy + ":" + suffix, role}, Source::PolicyTimes, spec.policy, 0, -1, a, b});
    };
    switch (spec.form) {
        case ModelForm::Baseline: break;
        case ModelForm::A: inter(kIndicatorQ, ColumnRole::Interaction, iq); break;
        case ModelForm::B: inter(kIndicatorA, ColumnRole::Interaction, ia); break;
        case ModelForm::C: inter(kRateChangeQ, ColumnRole::Interaction, dq); break;
        case ModelForm::D: inter(kRateChangeA, ColumnRole::Interaction, da); break;
        case ModelForm::E:
            inter(kIndicatorQ, ColumnRole::Interaction, iq);
            inter(kRateChangeQ, ColumnRole::RateSlope, dq);
            inter(std::string(kRateChangeQ) + ":" + kIndicatorQ, ColumnRole::TripleSlope, dq, iq);
            break;
    }
    return plan;
}

}  // namespace

std::vector<DesignColumn> design_columns(const ModelSpec& spec, const std::vector<std::string>& countries) {
    std::vector<DesignColumn> out;
    for (auto& p : plan_columns(spec, countries, nullptr)) out.push_back(p.column);
    return out;
}

std::vector<int> independent_columns(const Eigen::MatrixXd& X, double tolerance) {
    std::vector<int> keep;
    std::vector<Eigen::VectorXd> basis;
    for (Eigen::Index j = 0; j < X.cols(); ++j) {
        Eigen::VectorXd v = X.col(j);
        const double nrm = v.norm();
        if (nrm == 0.0) continue;
        v /= nrm;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) v -= q.dot(v) * q;
        const double r = v.norm();
        if (r < tolerance) continue;
        basis.push_back(v / r);
        keep.push_back(static_cast<int>(j));
    }
    return keep;
}

DesignMatrix build_design(const PanelDataset& panel, const RegimeVariables& regimes, const ModelSpec& spec,
                          int horizon, const DesignOptions& options) {
    if (horizon < 1 || horizon > 12)
        throw Error("projection", "InvalidHorizon", "horizon " + std::to_string(horizon) + " outside 1..12");
    if (spec.controls.empty()) throw Error("projection", "InvalidSpec", "controls list is empty");
    if (spec.control_lags < 1 || spec.policy_lags < 0)
        throw Error("projection", "InvalidSpec", "control_lags must be >= 1 and policy_lags >= 0");
    std::vector<std::string> referenced{spec.outcome, spec.policy};
    referenced.insert(referenced.end(), spec.controls.begin(), spec.controls.end());
    referenced.insert(referenced.end(), spec.extra_controls.begin(), spec.extra_controls.end());
    for (const auto& name : referenced)
        if (!panel.has_column(name))
            throw Error("projection", "MissingColumn", "column '" + name + "' referenced by the model is not in the panel");
    const std::size_t cells = static_cast<std::size_t>(panel.n_countries()) * panel.n_periods();
    if (regimes.d_i_q.size() != cells || regimes.d_i_a.size() != cells || regimes.ind_q.size() != cells ||
        regimes.ind_a.size() != cells)
        throw Error("projection", "ShapeMismatch", "regime variables do not match the panel layout");

    const auto plan = plan_columns(spec, panel.countries(), &regimes);
    {
        std::set<std::string> seen;
        for (const auto& p : plan)
            if (!seen.insert(p.column.name).second)
                throw Error("projection", "DuplicateColumn", "design column '" + p.column.name + "' appears twice");
    }

    const int max_lag = std::max(spec.control_lags - 1, spec.policy_lags);
    const auto form = spec.form;
    auto needs = [&](const std::vector<double>& v, bool used) { return used || options.common_regime_sample ? &v : nullptr; };
    const std::vector<const std::vector<double>*> regime_required{
        needs(regimes.ind_q, form == ModelForm::A || form == ModelForm::E),
        needs(regimes.ind_a, form == ModelForm::B),
        needs(regimes.d_i_q, form == ModelForm::C || form == ModelForm::E),
        needs(regimes.d_i_a, form == ModelForm::D),
    };

    std::vector<RowId> rows;
    std::vector<double> yv;
    std::vector<double> xv;
    const std::size_t p_all = plan.size();
    std::vector<double> row(p_all);
    std::vector<std::span<const double>> series_cache(plan.size());
    for (std::size_t j = 0; j < plan.size(); ++j)
        if (plan[j].source == Source::Column || plan[j].source == Source::PolicyTimes)
            series_cache[j] = panel.column(plan[j].series);
    const auto outcome = panel.column(spec.outcome);

    for (int c = 0; c < panel.n_countries(); ++c)
        for (int t = max_lag; t + horizon < panel.n_periods(); ++t) {
            if (options.window && !options.window->contains(panel.period(t))) continue;
            const auto k = panel.cell(c, t);
            const double y = outcome[panel.cell(c, t + horizon)];
            if (is_missing(y)) continue;
            bool ok = true;
            for (const auto* r : regime_required)
                if (r && is_missing((*r)[k])) {
                    ok = false;
                    break;
                }
            for (std::size_t j = 0; ok && j < p_all; ++j) {
                const auto& pl = plan[j];
                double v = 0.0;
                switch (pl.source) {
                    case Source::Dummy: v = pl.country == c ? 1.0 : 0.0; break;
                    case Source::Intercept: v = 1.0; break;
                    case Source::Column: v = series_cache[j][k - pl.lag]; break;
                    case Source::PolicyTimes:
                        v = series_cache[j][k] * (*pl.factor_a)[k];
                        if (pl.factor_b) v *= (*pl.factor_b)[k];
                        break;
                }
                if (is_missing(v)) ok = false;
                row[j] = v;
            }
            if (!ok) continue;
            rows.push_back({c, t});
            yv.push_back(y);
            xv.insert(xv.end(), row.begin(), row.end());
        }

    if (rows.empty())
        throw Error("projection", "EmptyDesign",
                    "no complete rows for " + spec.outcome + " on " + spec.policy + ", model " + to_string(form) +
                        ", horizon " + std::to_string(horizon));

    const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
    const Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> full(
        xv.data(), n, static_cast<Eigen::Index>(p_all));

    std::size_t policy_col = 0;
    while (plan[policy_col].column.role != ColumnRole::Policy) ++policy_col;
    const auto pcol = full.col(static_cast<Eigen::Index>(policy_col));
    if (pcol.maxCoeff() == pcol.minCoeff())
        throw Error("projection", "AllPolicyVarianceZero", "policy '" + spec.policy + "' is constant on the sample");

    DesignMatrix d;
    d.spec = spec;
    d.horizon = horizon;
    d.countries = panel.countries();
    d.first_period = panel.first_period();
    d.rows = std::move(rows);
    d.y = Eigen::Map<const Eigen::VectorXd>(yv.data(), n);

    const Eigen::MatrixXd dense = full;
    const auto keep = independent_columns(dense);
    d.X.resize(n, static_cast<Eigen::Index>(keep.size()));
    std::size_t next = 0;
    for (std::size_t j = 0; j < p_all; ++j) {
        if (next < keep.size() && keep[next] == static_cast<int>(j)) {
            d.X.col(static_cast<Eigen::Index>(next)) = dense.col(static_cast<Eigen::Index>(j));
            d.columns.push_back(plan[j].column);
            ++next;
        } else {
            d.dropped.push_back(plan[j].column.name);
        }
    }

    d.regimes.d_i_q.resize(n);
    d.regimes.d_i_a.resize(n);
    d.regimes.ind_q.resize(n);
    d.regimes.ind_a.resize(n);
    for (Eigen::Index r = 0; r < n; ++r) {
        const auto k = panel.cell(d.rows[r].country, d.rows[r].period);
        d.regimes.d_i_q[r] = regimes.d_i_q[k];
        d.regimes.d_i_a[r] = regimes.d_i_a[k];
        d.regimes.ind_q[r] = regimes.ind_q[k];
        d.regimes.ind_a[r] = regimes.ind_a[k];
    }
    return d;
}

int default_bandwidth(const DesignMatrix& design) {
    return std::max(0, std::min(design.horizon, max_rows_per_country(design.rows) - 1));
}

HorizonFit fit_horizon(std::shared_ptr<const DesignMatrix> design, std::optional<int> bandwidth) {
    return fit_horizon(std::move(design), FitOptions{bandwidth, true, true});
}

HorizonFit fit_horizon(std::shared_ptr<const DesignMatrix> design, const FitOptions& options) {
    const auto& d = *design;
    const Eigen::Index n = d.X.rows(), p = d.X.cols();
    if (n <= p)
        throw Error("projection", "InsufficientRows",
                    std::to_string(n) + " rows for " + std::to_string(p) + " columns at horizon " +
                        std::to_string(d.horizon));
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(d.X);
    const Eigen::MatrixXd R = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
    const Eigen::VectorXd diag = R.diagonal().cwiseAbs();
    if (p > 0 && diag.minCoeff() <= 1e-13 * diag.maxCoeff())
        throw Error("projection", "RankDeficientAfterPruning", "design is singular after column pruning");

    HorizonFit fit;
    fit.design = design;
    fit.coef = qr.solve(d.y);
    fit.residuals = d.y - d.X * fit.coef;
    const Eigen::MatrixXd Rinv = R.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    fit.bread = Rinv * Rinv.transpose();
    if (options.leverage) {
        const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, p);
        fit.leverage = Q.rowwise().squaredNorm();
    }
    fit.t_eff = static_cast<int>(n);
    fit.sigma2_ols = fit.residuals.squaredNorm() / static_cast<double>(n - p);
    fit.bandwidth = options.bandwidth ? *options.bandwidth : default_bandwidth(d);
    if (options.covariance) fit.robust_cov = robust_cov_matrix(d, fit.residuals, fit.bread, fit.bandwidth);
    return fit;
}

HorizonFit fit_horizon(const DesignMatrix& design) {
    return fit_horizon(std::make_shared<const DesignMatrix>(design));
}

HorizonFit fit_horizon(const DesignMatrix& design, int bandwidth) {
    return fit_horizon(std::make_shared<const DesignMatrix>(design), bandwidth);
}

double HorizonFit::coefficient(ColumnRole role) const {
    const int j = design->index_of(role);
    return j < 0 ? 0.0 : coef[j];
}

double HorizonFit::coefficient(const std::string& name) const {
    const int j = design->index_of(name);
    return j < 0 ? 0.0 : coef[j];
}

double HorizonFit::se(const std::string& name) const {
    const int j = design->index_of(name);
    if (robust_cov.size() == 0) return kMissing;
    return j < 0 ? 0.0 : std::sqrt(std::max(0.0, robust_cov(j, j)));
}

namespace {

void require(bool ok, const DesignMatrix& d, const RegimeDescriptor& r) {
    if (!ok)
        throw Error("projection", "RegimeMismatch",
                    "regime '" + r.label + "' lacks the value required by model " + to_string(d.spec.form));
}

Eigen::VectorXd gradient(const DesignMatrix& d, std::optional<double> indicator, std::optional<double> value) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(d.dim());
    auto set = [&](ColumnRole role, double v) {
        const int j = d.index_of(role);
        if (j >= 0) g[j] = v;
    };
    set(ColumnRole::Policy, 1.0);
    switch (d.spec.form) {
        case ModelForm::Baseline: break;
        case ModelForm::A:
        case ModelForm::B: set(ColumnRole::Interaction, *indicator); break;
        case ModelForm::C:
        case ModelForm::D: set(ColumnRole::Interaction, *value); break;
        case ModelForm::E:
            set(ColumnRole::Interaction, *indicator);
            set(ColumnRole::RateSlope, *value);
            set(ColumnRole::TripleSlope, *value * *indicator);
            break;
    }
    return g;
}

}  // namespace

Eigen::VectorXd effect_gradient(const DesignMatrix& d, const RegimeDescriptor& r) {
    switch (d.spec.form) {
        case ModelForm::Baseline: break;
        case ModelForm::A:
        case ModelForm::B: require(r.indicator.has_value(), d, r); break;
        case ModelForm::C:
        case ModelForm::D: require(r.value.has_value(), d, r); break;
        case ModelForm::E: require(r.indicator.has_value() && r.value.has_value(), d, r); break;
    }
    return gradient(d, r.indicator, r.value);
}

Eigen::VectorXd effect_gradient_at_row(const DesignMatrix& d, std::size_t row) {
    const auto& rg = d.regimes;
    std::optional<double> ind, val;
    switch (d.spec.form) {
        case ModelForm::Baseline: break;
        case ModelForm::A: ind = rg.ind_q[row]; break;
        case ModelForm::B: ind = rg.ind_a[row]; break;
        case ModelForm::C: val = rg.d_i_q[row]; break;
        case ModelForm::D: val = rg.d_i_a[row]; break;
        case ModelForm::E:
            ind = rg.ind_q[row];
            val = rg.d_i_q[row];
            break;
    }
    if ((ind && is_missing(*ind)) || (val && is_missing(*val)))
        throw Error("inference", "MissingRegimeValue",
                    d.countries[d.rows[row].country] + " " + d.base_period(row).str());
    return gradient(d, ind, val);
}

IrfPoint irf_point(const HorizonFit& fit, const RegimeDescriptor& regime) {
    const Eigen::VectorXd g = effect_gradient(*fit.design, regime);
    IrfPoint pt;
    pt.horizon = fit.horizon();
    pt.regime = regime.label;
    pt.value = g.dot(fit.coef);
    pt.se = fit.robust_cov.size() == 0 ? kMissing : std::sqrt(std::max(0.0, g.dot(fit.robust_cov * g)));
    return pt;
}

RegimeQuartiles reference_quartiles() noexcept { return RegimeQuartiles{}; }

RegimeQuartiles sample_quartiles(const PanelDataset& panel, const RegimeVariables& regimes,
                                 const std::optional<PeriodWindow>& window) {
    std::vector<double> q, a;
    for (int c = 0; c < panel.n_countries(); ++c)
        for (int t = 0; t < panel.n_periods(); ++t) {
            if (window && !window->contains(panel.period(t))) continue;
            const auto k = panel.cell(c, t);
            q.push_back(regimes.d_i_q[k]);
            a.push_back(regimes.d_i_a[k]);
        }
    RegimeQuartiles out;
    out.q1_quarterly = stats::quantile(q, 0.25);
    out.q3_quarterly = stats::quantile(q, 0.75);
    out.q1_annual = stats::quantile(a, 0.25);
    out.q3_annual = stats::quantile(a, 0.75);
    if (std::isnan(out.q1_quarterly) || std::isnan(out.q1_annual))
        throw Error("projection", "EmptyRegimeSample", "no interest-rate changes inside the window");
    return out;
}

RegimeDescriptor regime_for(ModelForm form, Stance stance, const RegimeQuartiles& q) {
    const bool loose = stance == Stance::Loosening;
    RegimeDescriptor r{to_string(stance), std::nullopt, std::nullopt};
    switch (form) {
        case ModelForm::Baseline: break;
        case ModelForm::A:
        case ModelForm::B: r.indicator = loose ? 1.0 : 0.0; break;
        case ModelForm::C: r.value = loose ? q.q1_quarterly : q.q3_quarterly; break;
        case ModelForm::D: r.value = loose ? q.q1_annual : q.q3_annual; break;
        case ModelForm::E:
            r.indicator = loose ? 1.0 : 0.0;
            r.value = loose ? q.q1_quarterly : q.q3_quarterly;
            break;
    }
    return r;
}

ProjectionResult fit_projection(const PanelDataset& panel, const RegimeVariables& regimes, const ModelSpec& spec,
                                const std::set<int>& horizons, const DesignOptions& options) {
    ProjectionResult out;
    out.spec = spec;
    for (int h : horizons) {
        if (h < 1 || h > 12) throw Error("projection", "InvalidHorizon", "horizon " + std::to_string(h) + " outside 1..12");
        try {
            out.fits.emplace(h, fit_horizon(build_design(panel, regimes, spec, h, options)));
        } catch (const Error& e) {
            if (e.code() != "EmptyDesign" && e.code() != "InsufficientRows") throw;
            out.failures[h] = e.qualified_code() + ": " + e.detail();
        }
    }
    return out;
}

void write_projection_csv(std::ostream& out, const std::vector<ProjectionResult>& results, bool header) {
    csv::Writer w(out);
    if (header) w.row({"outcome", "policy", "model", "horizon", "term", "coef", "se"});
    for (const auto& res : results)
        for (const auto& [h, fit] : res.fits)
            for (std::size_t j = 0; j < fit.design->columns.size(); ++j)
                w.row({res.spec.outcome, res.spec.policy, to_string(res.spec.form), std::to_string(h),
                       fit.design->columns[j].name, csv::format_number(fit.coef[static_cast<Eigen::Index>(j)]),
                       csv::format_number(std::sqrt(std::max(0.0, fit.robust_cov(j, j))))});
}

}  // namespace lpma
