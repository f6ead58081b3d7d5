#include "lpma/mallows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lpma/covariance.hpp"
#include "lpma/error.hpp"

namespace lpma {

const char* to_string(WeightSolver s) noexcept {
    return s == WeightSolver::ActiveSetEnumeration ? "active-set-enumeration" : "projected-gradient";
}

Sigma2Estimate estimate_sigma2(const Eigen::VectorXd& residuals, int dim) {
    const auto df = residuals.size() - dim;
    if (df <= 0)
        throw Error("mallows", "NonPositiveDf",
                    std::to_string(residuals.size()) + " rows for " + std::to_string(dim) + " columns");
    const double s2 = residuals.squaredNorm() / static_cast<double>(df);
    return {s2, s2 == 0.0};
}

Sigma2Estimate estimate_sigma2(const HorizonFit& fit) { return estimate_sigma2(fit.residuals, fit.dim()); }

int largest_model(const Eigen::VectorXd& dims) {
    int best = 0;
    for (int m = 1; m < dims.size(); ++m)
        if (dims[m] >= dims[best]) best = m;
    return best;
}

CandidateSet make_candidate_set(Eigen::MatrixXd residuals, Eigen::VectorXd dims, double sigma2_hat,
                                std::vector<std::string> labels) {
    if (residuals.cols() != dims.size())
        throw Error("mallows", "DimensionMismatch", "residual columns and dims differ in length");
    if (residuals.cols() < 1) throw Error("mallows", "EmptyCandidateSet", "no candidate models");
    if (labels.empty())
        for (int m = 0; m < dims.size(); ++m) labels.push_back("m" + std::to_string(m + 1));
    CandidateSet c;
    c.labels = std::move(labels);
    c.residuals = std::move(residuals);
    c.dims = std::move(dims);
    c.sigma2_hat = sigma2_hat;
    c.largest = largest_model(c.dims);
    c.degenerate = sigma2_hat == 0.0;
    return c;
}

CandidateSet make_candidate_set(std::vector<HorizonFit> fits) {
    if (fits.empty()) throw Error("mallows", "EmptyCandidateSet", "no candidate models");
    const auto& rows0 = fits.front().design->rows;
    const int horizon = fits.front().horizon();
    for (const auto& f : fits) {
        const auto& r = f.design->rows;
        if (f.horizon() != horizon || r.size() != rows0.size() ||
            !std::equal(r.begin(), r.end(), rows0.begin(),
                        [](const RowId& a, const RowId& b) { return a.country == b.country && a.period == b.period; }))
            throw Error("mallows", "SampleMismatch", "candidate fits do not share one sample");
    }
    const Eigen::Index T = static_cast<Eigen::Index>(rows0.size());
    const Eigen::Index M = static_cast<Eigen::Index>(fits.size());
    Eigen::MatrixXd U(T, M);
    Eigen::VectorXd dims(M);
    std::vector<std::string> labels;
    for (Eigen::Index m = 0; m < M; ++m) {
        U.col(m) = fits[m].residuals;
        dims[m] = fits[m].dim();
        labels.push_back(to_string(fits[m].form()));
    }
    const int big = largest_model(dims);
    const auto s2 = estimate_sigma2(fits[big]);
    CandidateSet c = make_candidate_set(std::move(U), std::move(dims), s2.value, std::move(labels));
    c.horizon = horizon;
    c.fits = std::move(fits);
    return c;
}

QuadraticCriterion mallows_quadratic(const CandidateSet& cand) {
    const double T = cand.t_eff();
    QuadraticCriterion q;
    q.H = cand.residuals.transpose() * cand.residuals / T;
    q.c = (2.0 * cand.sigma2_hat / T) * cand.dims;
    return q;
}

namespace {
void check_weights(const Eigen::VectorXd& w, Eigen::Index m) {
    if (w.size() != m) throw Error("mallows", "DimensionMismatch", "weight vector length differs from model count");
}
}  // namespace

double mallows_criterion(const Eigen::VectorXd& w, const CandidateSet& cand) {
    check_weights(w, cand.size());
    const Eigen::VectorXd u = cand.residuals * w;
    const double T = cand.t_eff();
    return u.squaredNorm() / T + 2.0 * cand.sigma2_hat / T * cand.dims.dot(w);
}

Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v) {
    std::vector<double> s(v.data(), v.data() + v.size());
    std::sort(s.begin(), s.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) {
        cum += s[k];
        const double t = (cum - 1.0) / static_cast<double>(k + 1);
        if (s[k] - t > 0.0) theta = t;
    }
    return (v.array() - theta).cwiseMax(0.0).matrix();
}

namespace {

SimplexSolution enumerate_supports(const Eigen::MatrixXd& H, const Eigen::VectorXd& c, const Eigen::VectorXd& tie_dims) {
    const int M = static_cast<int>(c.size());
    SimplexSolution best;
    best.value = std::numeric_limits<double>::infinity();
    double best_dim = 0.0;
    std::vector<int> best_support;
    for (unsigned mask = 1; mask < (1u << M); ++mask) {
        std::vector<int> S;
        for (int m = 0; m < M; ++m)
            if (mask & (1u << m)) S.push_back(m);
        const int s = static_cast<int>(S.size());
        Eigen::MatrixXd K = Eigen::MatrixXd::Zero(s + 1, s + 1);
        Eigen::VectorXd rhs(s + 1);
        for (int i = 0; i < s; ++i) {
            for (int j = 0; j < s; ++j) K(i, j) = 2.0 * H(S[i], S[j]);
            K(i, s) = 1.0;
            K(s, i) = 1.0;
            rhs[i] = -c[S[i]];
        }
        rhs[s] = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(K);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) {
            std::string d = "SingularKKT support {";
            for (int i = 0; i < s; ++i) d += (i ? "," : "") + std::to_string(S[i]);
            best.diagnostics.push_back(d + "} skipped");
            continue;
        }
        const Eigen::VectorXd sol = lu.solve(rhs);
        bool feasible = true;
        for (int i = 0; i < s; ++i)
            if (!(sol[i] >= -1e-12)) feasible = false;
        if (!feasible) continue;
        Eigen::VectorXd w = Eigen::VectorXd::Zero(M);
        for (int i = 0; i < s; ++i) w[S[i]] = std::max(0.0, sol[i]);
        w /= w.sum();
        const double value = w.dot(H * w) + c.dot(w);
        double total_dim = 0.0;
        for (int m : S) total_dim += tie_dims[m];
        const bool first = best.w.size() == 0;
        const double tol = first ? 0.0 : 1e-12 * std::max(1.0, std::fabs(best.value));
        bool better = first || value < best.value - tol;
        if (!better && std::fabs(value - best.value) <= tol) {
            if (total_dim < best_dim) better = true;
            else if (total_dim == best_dim && S < best_support) better = true;
        }
        if (better) {
            best.w = w;
            best.value = value;
            best_dim = total_dim;
            best_support = S;
        }
    }
    if (best.w.size() == 0) throw Error("mallows", "NoFeasibleSupport", "every support failed");
    best.solver = WeightSolver::ActiveSetEnumeration;
    best.iterations = static_cast<int>((1u << M) - 1);
    return best;
}

SimplexSolution projected_gradient(const Eigen::MatrixXd& H, const Eigen::VectorXd& c) {
    const Eigen::Index M = c.size();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(H, Eigen::EigenvaluesOnly);
    const double L = std::max(2.0 * eig.eigenvalues().maxCoeff(), 1e-300);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(M, 1.0 / static_cast<double>(M));
    Eigen::VectorXd z = w;
    double t = 1.0;
    SimplexSolution out;
    out.solver = WeightSolver::ProjectedGradient;
    const int max_iter = 200000;
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd gz = 2.0 * H * z + c;
        Eigen::VectorXd w_next = project_to_simplex(z - gz / L);
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        // Restart momentum when the objective goes up.
        const double f_next = w_next.dot(H * w_next) + c.dot(w_next);
        const double f_cur = w.dot(H * w) + c.dot(w);
        if (f_next > f_cur) {
            z = w;
            t = 1.0;
            continue;
        }
        z = w_next + ((t - 1.0) / t_next) * (w_next - w);
        w = w_next;
        t = t_next;
        const Eigen::VectorXd g = 2.0 * H * w + c;
        const double gap = g.dot(w) - g.minCoeff();
        out.iterations = it;
        if (gap <= 1e-10) break;
        if (it == max_iter) out.diagnostics.push_back("projected gradient hit the iteration cap");
    }
    out.w = w;
    out.value = w.dot(H * w) + c.dot(w);
    return out;
}

}  // namespace

SimplexSolution minimize_on_simplex(const Eigen::MatrixXd& H, const Eigen::VectorXd& c, const Eigen::VectorXd& tie_dims,
                                    int enumeration_limit) {
    const Eigen::Index M = c.size();
    if (M < 1) throw Error("mallows", "EmptyCandidateSet", "no candidate models");
    if (H.rows() != M || H.cols() != M || tie_dims.size() != M)
        throw Error("mallows", "DimensionMismatch", "quadratic criterion dimensions disagree");
    if (M == 1) {
        SimplexSolution s;
        s.w = Eigen::VectorXd::Ones(1);
        s.value = H(0, 0) + c[0];
        return s;
    }
    SimplexSolution sol = M <= enumeration_limit ? enumerate_supports(H, c, tie_dims) : projected_gradient(H, c);
    if (sol.w.minCoeff() < -1e-12) throw Error("mallows", "NegativeWeight", "solver returned a negative weight");
    sol.w = sol.w.cwiseMax(0.0);
    sol.w /= sol.w.sum();
    sol.value = sol.w.dot(H * sol.w) + c.dot(sol.w);
    return sol;
}

Eigen::MatrixXd loo_residuals(const CandidateSet& cand) {
    if (cand.fits.empty()) throw Error("mallows", "NoFits", "leave-one-out residuals need the fitted models");
    Eigen::MatrixXd out(cand.t_eff(), cand.size());
    for (int m = 0; m < cand.size(); ++m) {
        const auto& f = cand.fits[m];
        if (f.leverage.size() != out.rows())
            throw Error("mallows", "NoLeverage", "model " + cand.labels[m] + " was fitted without leverages");
        for (Eigen::Index t = 0; t < out.rows(); ++t) {
            const double h = f.leverage[t];
            if (h >= 1.0 - 1e-10)
                throw Error("mallows", "LeverageOne",
                            "model " + cand.labels[m] + ", row " + std::to_string(t) + " (" +
                                f.design->countries[f.design->rows[t].country] + " " + f.design->base_period(t).str() +
                                ")");
            out(t, m) = f.residuals[t] / (1.0 - h);
        }
    }
    return out;
}

double cv1_criterion(const Eigen::VectorXd& w, const Eigen::MatrixXd& loo) {
    check_weights(w, loo.cols());
    return (loo * w).squaredNorm() / static_cast<double>(loo.rows());
}

double cv1_criterion(const Eigen::VectorXd& w, const CandidateSet& cand) { return cv1_criterion(w, loo_residuals(cand)); }

MallowsWeights solve_weights(const CandidateSet& cand, WeightCriterion criterion, int enumeration_limit) {
    QuadraticCriterion q;
    if (criterion == WeightCriterion::Mallows) {
        q = mallows_quadratic(cand);
    } else {
        const Eigen::MatrixXd loo = loo_residuals(cand);
        q.H = loo.transpose() * loo / static_cast<double>(loo.rows());
        q.c = Eigen::VectorXd::Zero(cand.size());
    }
    auto sol = minimize_on_simplex(q.H, q.c, cand.dims, enumeration_limit);
    MallowsWeights out;
    out.horizon = cand.horizon;
    out.labels = cand.labels;
    out.w = sol.w;
    out.criterion_value = sol.value;
    out.solver = sol.solver;
    out.criterion = criterion;
    out.diagnostics = std::move(sol.diagnostics);
    if (cand.degenerate && criterion == WeightCriterion::Mallows)
        out.diagnostics.push_back("sigma2_hat is zero: penalty vanishes, weights minimize fit only");
    for (int m = 0; m < cand.size(); ++m)
        if (out.w[m] > 0.0) out.active_set.push_back(m);
    return out;
}

AveragedPoint average_points(const MallowsWeights& w, const std::vector<IrfPoint>& per_model) {
    if (per_model.size() != static_cast<std::size_t>(w.w.size()))
        throw Error("mallows", "ModelSetMismatch",
                    std::to_string(per_model.size()) + " model points for " + std::to_string(w.w.size()) + " weights");
    AveragedPoint p;
    p.horizon = per_model.empty() ? w.horizon : per_model.front().horizon;
    p.regime = per_model.empty() ? "" : per_model.front().regime;
    for (std::size_t m = 0; m < per_model.size(); ++m) {
        if (per_model[m].horizon != p.horizon || per_model[m].regime != p.regime)
            throw Error("mallows", "ModelSetMismatch", "per-model points disagree on horizon or regime");
        p.value += w.w[static_cast<Eigen::Index>(m)] * per_model[m].value;
    }
    p.per_model = per_model;
    return p;
}

AveragedIrf averaged_irf(const std::map<int, MallowsWeights>& weights,
                         const std::map<int, std::vector<std::vector<IrfPoint>>>& points) {
    if (weights.size() != points.size()) throw Error("mallows", "ModelSetMismatch", "weights and points cover different horizons");
    AveragedIrf out;
    for (const auto& [h, w] : weights) {
        auto it = points.find(h);
        if (it == points.end()) throw Error("mallows", "ModelSetMismatch", "no points at horizon " + std::to_string(h));
        if (out.labels.empty()) out.labels = w.labels;
        if (w.labels != out.labels) throw Error("mallows", "ModelSetMismatch", "model labels differ across horizons");
        for (const auto& per_regime : it->second) out.points.push_back(average_points(w, per_regime));
    }
    return out;
}

double averaged_se(const CandidateSet& cand, const Eigen::VectorXd& w,
                   const std::vector<RegimeDescriptor>& per_model_regime) {
    if (cand.fits.empty()) throw Error("mallows", "NoFits", "standard errors need the fitted models");
    if (per_model_regime.size() != cand.fits.size() || w.size() != cand.size())
        throw Error("mallows", "ModelSetMismatch", "regimes, weights and models differ in count");
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(cand.t_eff());
    for (std::size_t m = 0; m < cand.fits.size(); ++m) {
        if (w[static_cast<Eigen::Index>(m)] == 0.0) continue;
        const auto& f = cand.fits[m];
        const Eigen::VectorXd g = effect_gradient(*f.design, per_model_regime[m]);
        // u_t x_t' (X'X)^{-1} g, without materializing the influence matrix.
        const Eigen::VectorXd xb = f.design->X * (f.bread * g);
        phi += w[static_cast<Eigen::Index>(m)] * f.residuals.cwiseProduct(xb);
    }
    const Eigen::MatrixXd v = kernel_crossproduct(phi, cand.fits.front().design->rows, cand.fits.front().bandwidth);
    return std::sqrt(std::max(0.0, v(0, 0)));
}

std::vector<AveragedPoint> average_horizon(const CandidateSet& cand, const MallowsWeights& w, const RegimeQuartiles& q) {
    std::vector<AveragedPoint> out;
    for (Stance s : {Stance::Loosening, Stance::Tightening}) {
        std::vector<IrfPoint> pts;
        std::vector<RegimeDescriptor> regs;
        for (const auto& f : cand.fits) {
            regs.push_back(regime_for(f.form(), s, q));
            pts.push_back(irf_point(f, regs.back()));
        }
        AveragedPoint p = average_points(w, pts);
        p.se = averaged_se(cand, w.w, regs);
        out.push_back(std::move(p));
    }
    return out;
}

}  // namespace lpma
