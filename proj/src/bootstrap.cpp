#include "lpma/bootstrap.hpp"

#include <cmath>
#include <limits>

#include "lpma/error.hpp"
#include "lpma/parallel.hpp"
#include "lpma/rng.hpp"
#include "lpma/stats.hpp"

namespace lpma {

namespace {

struct CountryBlock {
    Eigen::MatrixXd Z;  // global columns net of the country's own fixed effects
    Eigen::VectorXd y;
    Eigen::VectorXd h_local;
    Eigen::MatrixXd A;
    Eigen::VectorXd b;
};

struct ModelBlocks {
    Eigen::Index dim = 0;
    std::vector<int> global;
    std::vector<CountryBlock> country;
};

ModelBlocks make_blocks(const DesignMatrix& d) {
    ModelBlocks mb;
    mb.dim = d.dim();
    std::vector<int> fe;
    for (int j = 0; j < d.dim(); ++j) {
        if (d.columns[static_cast<std::size_t>(j)].role == ColumnRole::FixedEffect) fe.push_back(j);
        else mb.global.push_back(j);
    }
    const int N = static_cast<int>(d.countries.size());
    std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(N));
    for (std::size_t r = 0; r < d.rows.size(); ++r)
        rows.at(static_cast<std::size_t>(d.rows[r].country)).push_back(static_cast<Eigen::Index>(r));
    const auto g = static_cast<Eigen::Index>(mb.global.size());
    for (int c = 0; c < N; ++c) {
        const auto& rc = rows[static_cast<std::size_t>(c)];
        const auto n = static_cast<Eigen::Index>(rc.size());
        CountryBlock cb;
        cb.Z.resize(n, g);
        cb.y.resize(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            cb.y[i] = d.y[rc[static_cast<std::size_t>(i)]];
            for (Eigen::Index k = 0; k < g; ++k) cb.Z(i, k) = d.X(rc[static_cast<std::size_t>(i)], mb.global[static_cast<std::size_t>(k)]);
        }
        std::vector<int> local;
        for (int j : fe) {
            bool used = false;
            for (Eigen::Index r : rc) used = used || d.X(r, j) != 0.0;
            if (used) local.push_back(j);
        }
        cb.h_local = Eigen::VectorXd::Zero(n);
        if (!local.empty() && n > 0) {
            Eigen::MatrixXd L(n, static_cast<Eigen::Index>(local.size()));
            for (Eigen::Index i = 0; i < n; ++i)
                for (std::size_t k = 0; k < local.size(); ++k)
                    L(i, static_cast<Eigen::Index>(k)) = d.X(rc[static_cast<std::size_t>(i)], local[k]);
            Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(L);
            const Eigen::Index rank = qr.rank();
            const Eigen::MatrixXd Q = qr.householderQ() * Eigen::MatrixXd::Identity(n, rank);
            cb.Z -= Q * (Q.transpose() * cb.Z);
            cb.y -= Q * (Q.transpose() * cb.y);
            cb.h_local = Q.rowwise().squaredNorm();
        }
        cb.A = cb.Z.transpose() * cb.Z;
        cb.b = cb.Z.transpose() * cb.y;
        mb.country.push_back(std::move(cb));
    }
    return mb;
}

struct DrawFit {
    Eigen::VectorXd coef;
    Eigen::VectorXd resid, leverage;
};

DrawFit refit(const ModelBlocks& mb, const std::vector<int>& picks, bool leverage) {
    const auto g = static_cast<Eigen::Index>(mb.global.size());
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(g, g);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(g);
    Eigen::Index T = 0;
    for (int c : picks) {
        const auto& cb = mb.country[static_cast<std::size_t>(c)];
        A += cb.A;
        b += cb.b;
        T += cb.y.size();
    }
    DrawFit f;
    const Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(A);
    const Eigen::VectorXd beta = cod.solve(b);
    f.coef = Eigen::VectorXd::Zero(mb.dim);
    for (Eigen::Index k = 0; k < g; ++k) f.coef[mb.global[static_cast<std::size_t>(k)]] = beta[k];
    f.resid.resize(T);
    if (leverage) f.leverage.resize(T);
    Eigen::MatrixXd Ainv;
    if (leverage) Ainv = cod.pseudoInverse();
    Eigen::Index at = 0;
    for (int c : picks) {
        const auto& cb = mb.country[static_cast<std::size_t>(c)];
        const Eigen::Index n = cb.y.size();
        f.resid.segment(at, n) = cb.y - cb.Z * beta;
        if (leverage)
            f.leverage.segment(at, n) = cb.h_local + (cb.Z * Ainv).cwiseProduct(cb.Z).rowwise().sum();
        at += n;
    }
    return f;
}

Eigen::VectorXd draw_weights(const CandidateSet& cand, const std::vector<DrawFit>& fits, WeightCriterion criterion) {
    const Eigen::Index T = fits.front().resid.size();
    const auto M = static_cast<Eigen::Index>(cand.size());
    Eigen::MatrixXd U(T, M);
    for (Eigen::Index m = 0; m < M; ++m) U.col(m) = fits[static_cast<std::size_t>(m)].resid;
    if (criterion == WeightCriterion::Cv1) {
        for (Eigen::Index m = 0; m < M; ++m) {
            const auto& h = fits[static_cast<std::size_t>(m)].leverage;
            if ((h.array() >= 1.0 - 1e-12).any())
                throw Error("inference", "LeverageOne", "bootstrap draw has a row with unit leverage");
            U.col(m).array() /= 1.0 - h.array();
        }
        const Eigen::MatrixXd H = U.transpose() * U / static_cast<double>(T);
        return minimize_on_simplex(H, Eigen::VectorXd::Zero(M), cand.dims).w;
    }
    const auto s2 = estimate_sigma2(U.col(cand.largest), static_cast<int>(cand.dims[cand.largest]));
    const CandidateSet c = make_candidate_set(std::move(U), cand.dims, s2.value, cand.labels);
    return solve_weights(c, WeightCriterion::Mallows).w;
}

std::vector<ModelBlocks> blocks_for(const CandidateSet& cand, const HorizonFit* baseline) {
    std::vector<ModelBlocks> out;
    for (const auto& f : cand.fits) out.push_back(make_blocks(*f.design));
    if (baseline) out.push_back(make_blocks(*baseline->design));
    return out;
}

double spread(const std::vector<double>& v) {
    if (v.size() < 2) return kMissing;
    return stats::sample_sd(v);
}

}  // namespace

std::vector<int> bootstrap_picks(std::uint64_t seed, int draw, int n_countries) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(draw) + 1));
    std::vector<int> picks(static_cast<std::size_t>(n_countries));
    for (auto& p : picks) p = static_cast<int>(((rng() >> 32) * static_cast<std::uint64_t>(n_countries)) >> 32);
    return picks;
}

BootstrapDraws bootstrap_candidates(const CandidateSet& cand, const HorizonFit* baseline, const BootstrapOptions& o) {
    if (cand.fits.empty()) throw Error("inference", "NoFits", "the bootstrap needs the fitted candidate models");
    if (o.draws < 2) throw Error("inference", "TooFewDraws", "the bootstrap needs at least 2 draws");
    if (baseline && baseline->design->rows.size() != cand.fits.front().design->rows.size())
        throw Error("inference", "SampleMismatch", "baseline and candidates do not share one sample");
    const auto blocks = blocks_for(cand, baseline);
    const int N = static_cast<int>(cand.fits.front().design->countries.size());
    const auto M = static_cast<Eigen::Index>(cand.size());
    const bool lev = o.criterion == WeightCriterion::Cv1;

    BootstrapDraws out;
    out.weights = Eigen::MatrixXd::Zero(o.draws, M);
    for (Eigen::Index m = 0; m < M; ++m)
        out.coef.push_back(Eigen::MatrixXd::Zero(o.draws, blocks[static_cast<std::size_t>(m)].dim));
    if (baseline) out.baseline = Eigen::VectorXd::Constant(o.draws, kMissing);
    out.ok.assign(static_cast<std::size_t>(o.draws), 0);
    const int base_col = baseline ? baseline->design->index_of(ColumnRole::Policy) : -1;
    if (baseline && base_col < 0) throw Error("inference", "MissingPolicy", "baseline policy column was pruned");

    parallel_for(static_cast<std::size_t>(o.draws), o.threads, [&](std::size_t b) {
        const auto picks = bootstrap_picks(o.seed, static_cast<int>(b), N);
        std::vector<DrawFit> fits;
        for (Eigen::Index m = 0; m < M; ++m) fits.push_back(refit(blocks[static_cast<std::size_t>(m)], picks, lev));
        Eigen::VectorXd w;
        try {
            w = draw_weights(cand, fits, o.criterion);
        } catch (const Error&) {
            return;
        }
        const auto row = static_cast<Eigen::Index>(b);
        out.weights.row(row) = w.transpose();
        for (Eigen::Index m = 0; m < M; ++m)
            out.coef[static_cast<std::size_t>(m)].row(row) = fits[static_cast<std::size_t>(m)].coef.transpose();
        if (baseline) out.baseline[row] = refit(blocks.back(), picks, false).coef[base_col];
        out.ok[b] = 1;
    });
    for (char k : out.ok) out.failed += k ? 0 : 1;
    return out;
}

void bootstrap_points(std::vector<AveragedPoint>& points, const CandidateSet& cand, const BootstrapDraws& draws,
                      const RegimeQuartiles& q) {
    for (auto& p : points) {
        const Stance s = p.regime == to_string(Stance::Loosening) ? Stance::Loosening : Stance::Tightening;
        Eigen::VectorXd v = Eigen::VectorXd::Zero(draws.draws());
        for (int m = 0; m < cand.size(); ++m) {
            const auto& f = cand.fits[static_cast<std::size_t>(m)];
            const Eigen::VectorXd g = effect_gradient(*f.design, regime_for(f.form(), s, q));
            v += draws.weights.col(m).cwiseProduct(draws.coef[static_cast<std::size_t>(m)] * g);
        }
        std::vector<double> kept;
        for (int b = 0; b < draws.draws(); ++b)
            if (draws.ok[static_cast<std::size_t>(b)]) kept.push_back(v[b]);
        p.boot_se = spread(kept);
    }
}

PointTests bootstrap_equality_test(const CandidateSet& cand, const Eigen::VectorXd& w, const HorizonFit& baseline,
                                   const BootstrapDraws& draws) {
    if (draws.baseline.size() != draws.draws())
        throw Error("inference", "MissingBaseline", "bootstrap draws were taken without the baseline");
    PointTests out = equality_test(cand, w, baseline);
    const Eigen::Index T = cand.t_eff();
    Eigen::MatrixXd D = -Eigen::VectorXd::Ones(T) * draws.baseline.transpose();
    for (int m = 0; m < cand.size(); ++m) {
        const auto& d = *cand.fits[static_cast<std::size_t>(m)].design;
        Eigen::MatrixXd G(T, d.dim());
        for (Eigen::Index r = 0; r < T; ++r) G.row(r) = effect_gradient_at_row(d, static_cast<std::size_t>(r)).transpose();
        D += (G * draws.coef[static_cast<std::size_t>(m)].transpose()) * draws.weights.col(m).asDiagonal();
    }
    std::vector<Eigen::Index> kept;
    for (int b = 0; b < draws.draws(); ++b)
        if (draws.ok[static_cast<std::size_t>(b)]) kept.push_back(b);
    if (kept.size() < 2) throw Error("inference", "TooFewDraws", "fewer than 2 usable bootstrap draws");
    for (Eigen::Index r = 0; r < T; ++r) {
        std::vector<double> v;
        v.reserve(kept.size());
        for (Eigen::Index b : kept) v.push_back(D(r, b));
        const double se = spread(v);
        const double diff = out.estimate[static_cast<std::size_t>(r)] - out.reference[static_cast<std::size_t>(r)];
        double stat;
        if (se > 0.0) stat = diff / se;
        else stat = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        out.se[static_cast<std::size_t>(r)] = se;
        out.stat[static_cast<std::size_t>(r)] = stat;
        out.pvalue[static_cast<std::size_t>(r)] = stats::two_sided_p(stat);
    }
    return out;
}

}  // namespace lpma
