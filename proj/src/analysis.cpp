#include "lpma/analysis.hpp"

#include "lpma/error.hpp"

namespace lpma {

std::shared_ptr<const DesignMatrix> make_design(const PanelDataset& panel, const RegimeVariables& regimes,
                                                const ModelSpec& spec, int horizon, const DesignOptions& options) {
    return std::make_shared<const DesignMatrix>(build_design(panel, regimes, spec, horizon, options));
}

SampleAudit audit_rows(const DesignMatrix& d) {
    SampleAudit a;
    a.rows = d.n_rows();
    if (d.rows.empty()) return a;
    a.first = a.last = d.base_period(0);
    for (std::size_t r = 1; r < d.rows.size(); ++r) {
        const Period p = d.base_period(r);
        if (p < a.first) a.first = p;
        if (a.last < p) a.last = p;
    }
    return a;
}

namespace {

FactorFit factor_fit(std::shared_ptr<const DesignMatrix> d, const AnalysisOptions& o) {
    if (o.fixed_factors >= 0) return estimate_interactive(std::move(d), o.fixed_factors, o.factor);
    auto sel = select_factor_number(std::move(d), o.factor_r_max, o.factor);
    return std::move(sel.fits[static_cast<std::size_t>(sel.r)]);
}

}  // namespace

HorizonAnalysis analyze_horizon(const PanelDataset& panel, const RegimeVariables& regimes, const ModelSpec& spec,
                                int horizon, const AnalysisOptions& o) {
    if (o.forms.empty()) throw Error("mallows", "EmptyModelSet", "no candidate models requested");
    HorizonAnalysis out;
    out.horizon = horizon;
    const FitOptions fo{o.bandwidth, o.covariance, o.criterion == WeightCriterion::Cv1};

    if (o.factors()) {
        std::vector<FactorFit> fits;
        for (ModelForm f : o.forms) {
            fits.push_back(factor_fit(make_design(panel, regimes, spec.with_form(f), horizon, o.design), o));
            const auto& ff = fits.back();
            out.factor_diagnostics.push_back({horizon, to_string(f), ff.r, ff.ssr, ff.iterations, ff.converged});
        }
        out.candidates = make_factor_candidate_set(std::move(fits));
    } else {
        std::vector<HorizonFit> fits;
        for (ModelForm f : o.forms)
            fits.push_back(fit_horizon(make_design(panel, regimes, spec.with_form(f), horizon, o.design), fo));
        out.candidates = make_candidate_set(std::move(fits));
    }
    out.candidates.horizon = horizon;
    out.weights = solve_weights(out.candidates, o.criterion);
    out.points = average_horizon(out.candidates, out.weights, o.quartiles);
    out.audit = audit_rows(*out.candidates.fits.front().design);

    if (o.tests) {
        auto bd = make_design(panel, regimes, spec.with_form(ModelForm::Baseline), horizon, o.design);
        if (o.factors()) {
            FactorFit ff = factor_fit(bd, o);
            out.factor_diagnostics.push_back({horizon, "Baseline", ff.r, ff.ssr, ff.iterations, ff.converged});
            out.baseline = std::move(ff.fit);
        } else {
            out.baseline = fit_horizon(bd, fo);
        }
        for (Stance s : {Stance::Loosening, Stance::Tightening})
            out.baseline_points.push_back(irf_point(*out.baseline, regime_for(ModelForm::Baseline, s, o.quartiles)));
        out.equality = equality_test(out.candidates, out.weights.w, *out.baseline);
    }
    if (o.bootstrap > 0) {
        const BootstrapOptions bo{o.bootstrap, o.bootstrap_seed, o.criterion, o.threads};
        const auto draws = bootstrap_candidates(out.candidates, out.baseline ? &*out.baseline : nullptr, bo);
        out.bootstrap_failed = draws.failed;
        bootstrap_points(out.points, out.candidates, draws, o.quartiles);
        if (out.baseline) out.boot_equality = bootstrap_equality_test(out.candidates, out.weights.w, *out.baseline, draws);
    }
    return out;
}

Eigen::VectorXd predict(const HorizonFit& fit, const DesignMatrix& target) {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(target.n_rows());
    const auto& cols = fit.design->columns;
    for (std::size_t j = 0; j < cols.size(); ++j) {
        const int k = target.index_of(cols[j].name);
        if (k < 0) {
            if (fit.coef[static_cast<Eigen::Index>(j)] == 0.0) continue;
            throw Error("projection", "ColumnMismatch", "column '" + cols[j].name + "' is absent from the target design");
        }
        out += fit.coef[static_cast<Eigen::Index>(j)] * target.X.col(k);
    }
    return out;
}

}  // namespace lpma
