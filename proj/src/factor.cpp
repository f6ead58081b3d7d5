#include "lpma/factor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <set>

#include "lpma/csv.hpp"
#include "lpma/error.hpp"
#include "lpma/parallel.hpp"
#include "lpma/rng.hpp"

namespace lpma {

namespace {

DesignMatrix subset_rows(const DesignMatrix& d, const std::vector<Eigen::Index>& keep) {
    DesignMatrix out;
    out.spec = d.spec;
    out.horizon = d.horizon;
    out.countries = d.countries;
    out.first_period = d.first_period;
    out.columns = d.columns;
    out.dropped = d.dropped;
    for (auto r : keep) out.rows.push_back(d.rows[static_cast<std::size_t>(r)]);
    out.y = d.y(keep);
    out.X = d.X(keep, Eigen::all);
    out.regimes.d_i_q = d.regimes.d_i_q(keep);
    out.regimes.d_i_a = d.regimes.d_i_a(keep);
    out.regimes.ind_q = d.regimes.ind_q(keep);
    out.regimes.ind_a = d.regimes.ind_a(keep);
    return out;
}

struct Panel {
    int N = 0, T = 0;
    Eigen::MatrixXd X;  // NT x p, country-major
    Eigen::VectorXd y;
};

struct State {
    Eigen::VectorXd beta;
    Eigen::MatrixXd F, L;
    double ssr = std::numeric_limits<double>::infinity();
    std::vector<double> path;
    int iterations = 0;
    bool converged = false;
};

class Alternation {
public:
    Alternation(const Panel& p, int r) : p_(p), r_(r) {
        xtx_ = p.X.transpose() * p.X;
        xty_ = p.X.transpose() * p.y;
    }

    Eigen::VectorXd beta_given(const Eigen::MatrixXd& F) const {
        Eigen::MatrixXd A = xtx_;
        Eigen::VectorXd b = xty_;
        const double T = p_.T;
        for (int i = 0; i < p_.N; ++i) {
            const auto Xi = p_.X.middleRows(static_cast<Eigen::Index>(i) * p_.T, p_.T);
            const auto yi = p_.y.segment(static_cast<Eigen::Index>(i) * p_.T, p_.T);
            const Eigen::MatrixXd FX = F.transpose() * Xi;
            A.noalias() -= FX.transpose() * FX / T;
            b.noalias() -= FX.transpose() * (F.transpose() * yi) / T;
        }
        return Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(A).solve(b);
    }

    Eigen::MatrixXd residual_panel(const Eigen::VectorXd& beta) const {
        const Eigen::VectorXd e = p_.y - p_.X * beta;
        return Eigen::Map<const Eigen::MatrixXd>(e.data(), p_.T, p_.N).transpose();
    }

    // Principal components of the N x T residual panel; F'F/T = I.
    void factors_given(const Eigen::VectorXd& beta, State& s) const {
        const Eigen::MatrixXd W = residual_panel(beta);
        const double T = p_.T;
        if (p_.N <= p_.T) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(W * W.transpose());
            const Eigen::MatrixXd V = eig.eigenvectors().rightCols(r_);
            Eigen::VectorXd d = eig.eigenvalues().tail(r_).cwiseMax(std::numeric_limits<double>::min());
            s.F = W.transpose() * V * d.cwiseSqrt().cwiseInverse().asDiagonal() * std::sqrt(T);
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(W.transpose() * W);
            s.F = eig.eigenvectors().rightCols(r_) * std::sqrt(T);
        }
        s.F = s.F.rowwise().reverse().eval();  // strongest factor first
        s.L = W * s.F / T;
        s.beta = beta;
        s.ssr = (W - s.L * s.F.transpose()).squaredNorm();
    }

    State run(State s, int max_iter, double tol) const {
        s.path.push_back(s.ssr);
        for (int it = 1; it <= max_iter; ++it) {
            State next;
            factors_given(beta_given(s.F), next);
            s.iterations = it;
            if (!(next.ssr <= s.ssr)) {
                s.converged = true;  // no further descent at working precision
                return s;
            }
            const double prev = s.ssr;
            next.path = std::move(s.path);
            next.path.push_back(next.ssr);
            next.iterations = it;
            s = std::move(next);
            if (s.ssr == 0.0 || prev - s.ssr <= tol * prev) {
                s.converged = true;
                return s;
            }
        }
        s.converged = false;
        return s;
    }

    State pca_start() const {
        State s;
        const Eigen::VectorXd beta = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(xtx_).solve(xty_);
        factors_given(beta, s);
        return s;
    }

    State random_start(std::uint64_t seed) const {
        Rng rng(seed);
        std::normal_distribution<double> z;
        Eigen::MatrixXd G(p_.T, r_);
        for (Eigen::Index j = 0; j < G.cols(); ++j)
            for (Eigen::Index t = 0; t < G.rows(); ++t) G(t, j) = z(rng);
        Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
        const Eigen::MatrixXd F = qr.householderQ() * Eigen::MatrixXd::Identity(p_.T, r_) * std::sqrt(double(p_.T));
        State s;
        factors_given(beta_given(F), s);
        return s;
    }

private:
    const Panel& p_;
    int r_;
    Eigen::MatrixXd xtx_;
    Eigen::VectorXd xty_;
};

// M_F applied within each country; columns whose defactored norm falls below
// 1e-10 of the original, or that become dependent, are pruned.
std::shared_ptr<const DesignMatrix> defactor(const DesignMatrix& d, const Eigen::MatrixXd& F, int N, int T) {
    DesignMatrix out = d;
    const double Td = T;
    auto annihilate = [&](Eigen::Ref<Eigen::MatrixXd> block) { block -= F * (F.transpose() * block) / Td; };
    for (int i = 0; i < N; ++i) {
        annihilate(out.X.middleRows(static_cast<Eigen::Index>(i) * T, T));
        annihilate(out.y.segment(static_cast<Eigen::Index>(i) * T, T));
    }
    std::vector<int> keep;
    std::vector<Eigen::VectorXd> basis;
    for (Eigen::Index j = 0; j < out.X.cols(); ++j) {
        const double orig = d.X.col(j).norm();
        if (orig == 0.0) continue;
        Eigen::VectorXd v = out.X.col(j) / orig;
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : basis) v -= q.dot(v) * q;
        const double nrm = v.norm();
        if (nrm < kPruneTolerance) continue;
        basis.push_back(v / nrm);
        keep.push_back(static_cast<int>(j));
    }
    if (keep.size() != static_cast<std::size_t>(out.X.cols())) {
        std::vector<DesignColumn> cols;
        std::size_t next = 0;
        for (std::size_t j = 0; j < out.columns.size(); ++j) {
            if (next < keep.size() && keep[next] == static_cast<int>(j)) {
                cols.push_back(out.columns[j]);
                ++next;
            } else {
                out.dropped.push_back(out.columns[j].name);
            }
        }
        out.columns = std::move(cols);
        out.X = Eigen::MatrixXd(out.X(Eigen::all, keep));
    }
    return std::make_shared<const DesignMatrix>(std::move(out));
}

}  // namespace

std::shared_ptr<const DesignMatrix> balance_design(const DesignMatrix& design, std::vector<std::string>* dropped,
                                                   bool strict) {
    std::set<int> countries;
    std::map<int, int> per_period;
    for (const auto& r : design.rows) {
        countries.insert(r.country);
        ++per_period[r.period];
    }
    std::vector<Eigen::Index> keep;
    std::vector<std::string> removed;
    for (std::size_t i = 0; i < design.rows.size(); ++i) {
        const auto& r = design.rows[i];
        if (per_period[r.period] == static_cast<int>(countries.size()))
            keep.push_back(static_cast<Eigen::Index>(i));
        else
            removed.push_back(design.countries[r.country] + " " + design.base_period(i).str());
    }
    if (!removed.empty() && strict) {
        std::string msg = std::to_string(removed.size()) + " cells outside the balanced block:";
        for (std::size_t i = 0; i < removed.size() && i < 20; ++i) msg += " " + removed[i];
        throw Error("factor", "Unbalanced", msg);
    }
    if (keep.empty()) throw Error("factor", "Unbalanced", "no period is observed for every country");
    if (dropped) *dropped = removed;
    return std::make_shared<const DesignMatrix>(subset_rows(design, keep));
}

FactorFit estimate_interactive(std::shared_ptr<const DesignMatrix> design, int r, const FactorOptions& opt) {
    if (r < 0) throw Error("factor", "InvalidFactorCount", "r must be >= 0");
    FactorFit out;
    out.r = r;
    auto balanced = balance_design(*design, &out.dropped_cells, opt.strict_balance);
    if (out.dropped_cells.empty()) balanced = design;

    std::set<int> cs;
    for (const auto& row : balanced->rows) cs.insert(row.country);
    const int N = static_cast<int>(cs.size());
    const int T = static_cast<int>(balanced->rows.size()) / N;

    if (r == 0) {
        out.fit = fit_horizon(balanced);
        out.ssr = out.fit.residuals.squaredNorm();
        out.ssr_path = {out.ssr};
        out.factors = Eigen::MatrixXd(T, 0);
        out.loadings = Eigen::MatrixXd(N, 0);
        return out;
    }
    if (r >= std::min(N, T))
        throw Error("factor", "InvalidFactorCount",
                    "r = " + std::to_string(r) + " with N = " + std::to_string(N) + ", T = " + std::to_string(T));

    Panel p{N, T, balanced->X, balanced->y};
    Alternation alt(p, r);
    const int starts = 1 + std::max(0, opt.random_starts);
    std::vector<State> results(static_cast<std::size_t>(starts));
    parallel_for(results.size(), opt.threads, [&](std::size_t s) {
        State init = s == 0 ? alt.pca_start() : alt.random_start(derive_seed(opt.seed, static_cast<std::uint64_t>(r), s));
        results[s] = alt.run(std::move(init), opt.max_iterations, opt.tolerance);
    });
    std::size_t best = 0;
    for (std::size_t s = 1; s < results.size(); ++s)
        if (results[s].ssr < results[best].ssr) best = s;
    State& st = results[best];

    out.factors = st.F;
    out.loadings = st.L;
    out.ssr = st.ssr;
    out.ssr_path = std::move(st.path);
    out.iterations = st.iterations;
    out.converged = st.converged;
    out.best_start = static_cast<int>(best);
    out.fit = fit_horizon(defactor(*balanced, st.F, N, T));
    return out;
}

double bai_ng_icp1(double ssr, int n, int t, int r) {
    const double nt = static_cast<double>(n) * t;
    const double s = static_cast<double>(n) + t;
    return std::log(ssr / nt) + r * (s / nt) * std::log(nt / s);
}

FactorSelection select_factor_number(std::shared_ptr<const DesignMatrix> design, int r_max, const FactorOptions& opt) {
    if (r_max < 0) throw Error("factor", "InvalidFactorCount", "r_max must be >= 0");
    const auto balanced = balance_design(*design, nullptr, opt.strict_balance);
    std::set<int> cs;
    for (const auto& row : balanced->rows) cs.insert(row.country);
    const int N = static_cast<int>(cs.size());
    const int T = static_cast<int>(balanced->rows.size()) / N;
    if (2 * r_max > std::min(N, T))
        throw Error("factor", "RMaxTooLarge",
                    "r_max = " + std::to_string(r_max) + " exceeds min(N, T)/2 with N = " + std::to_string(N) +
                        ", T = " + std::to_string(T));
    FactorSelection sel;
    for (int r = 0; r <= r_max; ++r) {
        sel.fits.push_back(estimate_interactive(design, r, opt));
        sel.criterion.push_back(bai_ng_icp1(sel.fits.back().ssr, N, T, r));
    }
    for (int r = 1; r <= r_max; ++r)
        if (sel.criterion[r] < sel.criterion[sel.r]) sel.r = r;
    return sel;
}

CandidateSet make_factor_candidate_set(std::vector<FactorFit> fits) {
    std::vector<HorizonFit> hf;
    Eigen::VectorXd extra(static_cast<Eigen::Index>(fits.size()));
    for (std::size_t m = 0; m < fits.size(); ++m) {
        hf.push_back(fits[m].fit);
        extra[static_cast<Eigen::Index>(m)] = fits[m].r;
    }
    CandidateSet c = make_candidate_set(std::move(hf));
    c.dims += extra;
    c.largest = largest_model(c.dims);
    const auto s2 = estimate_sigma2(c.residuals.col(c.largest), static_cast<int>(c.dims[c.largest]));
    c.sigma2_hat = s2.value;
    c.degenerate = s2.degenerate;
    return c;
}

FactorAveraging averaged_irf_with_factors(
    const std::map<int, std::vector<std::shared_ptr<const DesignMatrix>>>& designs, const RegimeQuartiles& q,
    int r_max, int fixed_r, const FactorOptions& opt) {
    FactorAveraging out;
    for (const auto& [h, models] : designs) {
        std::vector<FactorFit> fits;
        for (const auto& d : models) {
            FactorFit f = fixed_r >= 0 ? estimate_interactive(d, fixed_r, opt) : [&] {
                auto sel = select_factor_number(d, r_max, opt);
                return std::move(sel.fits[static_cast<std::size_t>(sel.r)]);
            }();
            out.diagnostics.push_back({h, to_string(d->spec.form), f.r, f.ssr, f.iterations, f.converged});
            fits.push_back(std::move(f));
        }
        CandidateSet cand = make_factor_candidate_set(std::move(fits));
        cand.horizon = h;
        MallowsWeights w = solve_weights(cand);
        for (auto& p : average_horizon(cand, w, q)) out.irf.points.push_back(std::move(p));
        if (out.irf.labels.empty()) out.irf.labels = cand.labels;
        out.weights[h] = std::move(w);
        out.candidates.emplace(h, std::move(cand));
    }
    return out;
}

void write_factor_diagnostics_csv(std::ostream& out, const std::vector<FactorDiagnostic>& rows, bool header) {
    csv::Writer w(out);
    if (header) w.row({"horizon", "model", "r", "ssr", "iterations", "converged"});
    for (const auto& r : rows)
        w.row({std::to_string(r.horizon), r.model, std::to_string(r.r), csv::format_number(r.ssr),
               std::to_string(r.iterations), r.converged ? "true" : "false"});
}

}  // namespace lpma
