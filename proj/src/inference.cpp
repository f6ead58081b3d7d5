#include "lpma/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "lpma/covariance.hpp"
#include "lpma/csv.hpp"
#include "lpma/error.hpp"
#include "lpma/stats.hpp"

namespace lpma {

const char* to_string(Adjustment a) noexcept {
    switch (a) {
        case Adjustment::Bonferroni: return "bonferroni";
        case Adjustment::Holm: return "holm";
        case Adjustment::BenjaminiYekutieli: return "benjamini_yekutieli";
    }
    return "?";
}

Adjustment parse_adjustment(const std::string& text) {
    for (auto a : kAdjustments)
        if (text == to_string(a)) return a;
    throw Error("inference", "UnknownAdjustment", "'" + text + "'");
}

std::vector<double> adjust_pvalues(std::span<const double> p, Adjustment method) {
    const std::size_t m = p.size();
    for (std::size_t i = 0; i < m; ++i)
        if (!(p[i] >= 0.0 && p[i] <= 1.0))
            throw Error("inference", "OutOfRangeP", "p[" + std::to_string(i) + "] = " + std::to_string(p[i]));
    std::vector<double> out(m);
    if (m == 0) return out;
    const double md = static_cast<double>(m);
    if (method == Adjustment::Bonferroni) {
        for (std::size_t i = 0; i < m; ++i) out[i] = std::min(1.0, md * p[i]);
        return out;
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    if (method == Adjustment::Holm) {
        double running = 0.0;
        for (std::size_t j = 0; j < m; ++j) {
            running = std::max(running, std::min(1.0, (md - static_cast<double>(j)) * p[order[j]]));
            out[order[j]] = running;
        }
        return out;
    }
    double cm = 0.0;
    for (std::size_t j = 1; j <= m; ++j) cm += 1.0 / static_cast<double>(j);
    double running = 1.0;
    for (std::size_t j = m; j-- > 0;) {
        running = std::min(running, std::min(1.0, md * cm / static_cast<double>(j + 1) * p[order[j]]));
        out[order[j]] = running;
    }
    return out;
}

double acceptance_proportion(std::span<const double> p, double alpha) {
    if (p.empty()) throw Error("inference", "EmptyInput", "no p-values");
    const auto n = std::count_if(p.begin(), p.end(), [&](double v) { return v > alpha; });
    return static_cast<double>(n) / static_cast<double>(p.size());
}

IrfVerdict irf_verdict(std::span<const double> adjusted, double alpha) {
    IrfVerdict v;
    v.horizons = static_cast<int>(adjusted.size());
    v.rejections = static_cast<int>(std::count_if(adjusted.begin(), adjusted.end(), [&](double p) { return p <= alpha; }));
    v.different = 2 * v.rejections > v.horizons;
    v.any_rejection = v.rejections > 0;
    return v;
}

namespace {

bool is_effect_role(ColumnRole r) {
    return r == ColumnRole::Policy || r == ColumnRole::Interaction || r == ColumnRole::RateSlope ||
           r == ColumnRole::TripleSlope;
}

bool same_rows(const DesignMatrix& a, const DesignMatrix& b) {
    return a.rows.size() == b.rows.size() &&
           std::equal(a.rows.begin(), a.rows.end(), b.rows.begin(),
                      [](const RowId& x, const RowId& y) { return x.country == y.country && x.period == y.period; });
}

PointTests run_test(const CandidateSet& cand, const Eigen::VectorXd& w, const HorizonFit* baseline) {
    if (cand.fits.empty()) throw Error("inference", "NoFits", "tests need the fitted candidate models");
    if (w.size() != cand.size()) throw Error("inference", "DimensionMismatch", "weights and models differ in count");
    const DesignMatrix& d0 = *cand.fits.front().design;
    if (baseline && !same_rows(d0, *baseline->design))
        throw Error("inference", "SampleMismatch", "baseline and candidates do not share one sample");

    struct Block {
        const HorizonFit* fit;
        double weight;
        std::vector<int> cols;
        Eigen::Index offset;
    };
    std::vector<Block> blocks;
    Eigen::Index q = 0;
    for (int m = 0; m < cand.size(); ++m) {
        if (w[m] == 0.0) continue;
        Block b{&cand.fits[m], w[m], {}, q};
        const auto& cols = cand.fits[m].design->columns;
        for (int j = 0; j < static_cast<int>(cols.size()); ++j)
            if (is_effect_role(cols[j].role)) b.cols.push_back(j);
        q += static_cast<Eigen::Index>(b.cols.size());
        blocks.push_back(std::move(b));
    }
    int base_col = -1;
    if (baseline) {
        base_col = baseline->design->index_of(ColumnRole::Policy);
        if (base_col < 0) throw Error("inference", "MissingPolicy", "baseline policy column was pruned");
    }
    const Eigen::Index T = cand.t_eff();
    Eigen::MatrixXd basis(T, q + (baseline ? 1 : 0));
    for (const auto& b : blocks) {
        const auto& f = *b.fit;
        const Eigen::MatrixXd scores = (f.design->X.array().colwise() * f.residuals.array()).matrix();
        for (std::size_t k = 0; k < b.cols.size(); ++k)
            basis.col(b.offset + static_cast<Eigen::Index>(k)) = scores * f.bread.col(b.cols[k]);
    }
    if (baseline) {
        const auto& f = *baseline;
        basis.col(q) = f.design->X * f.bread.col(base_col);
        basis.col(q).array() *= f.residuals.array();
    }
    const int bw = baseline ? baseline->bandwidth : cand.fits.front().bandwidth;
    const Eigen::MatrixXd omega = kernel_crossproduct(basis, d0.rows, bw);

    PointTests out;
    out.horizon = cand.horizon;
    out.points = d0.rows;
    const double ref = baseline ? baseline->coef[base_col] : 0.0;
    Eigen::VectorXd v(basis.cols());
    for (Eigen::Index r = 0; r < T; ++r) {
        double est = 0.0;
        for (const auto& b : blocks) {
            const Eigen::VectorXd g = effect_gradient_at_row(*b.fit->design, static_cast<std::size_t>(r));
            est += b.weight * g.dot(b.fit->coef);
            for (std::size_t k = 0; k < b.cols.size(); ++k)
                v[b.offset + static_cast<Eigen::Index>(k)] = b.weight * g[b.cols[k]];
        }
        if (baseline) v[q] = -1.0;
        const double var = std::max(0.0, v.dot(omega * v));
        const double diff = est - ref;
        const double se = std::sqrt(var);
        double stat;
        if (se > 0.0) stat = diff / se;
        else stat = diff == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), diff);
        out.estimate.push_back(est);
        out.reference.push_back(ref);
        out.se.push_back(se);
        out.stat.push_back(stat);
        out.pvalue.push_back(stats::two_sided_p(stat));
    }
    return out;
}

}  // namespace

PointTests equality_test(const CandidateSet& cand, const Eigen::VectorXd& w, const HorizonFit& baseline) {
    return run_test(cand, w, &baseline);
}

PointTests zero_test(const CandidateSet& cand, const Eigen::VectorXd& w) { return run_test(cand, w, nullptr); }

TestReport build_test_report(const std::map<int, PointTests>& by_horizon, double alpha) {
    TestReport rep;
    rep.alpha = alpha;
    using Key = std::pair<int, int>;
    std::map<Key, std::vector<double>> per_point;
    for (const auto& [h, t] : by_horizon) {
        HorizonSummary s;
        s.horizon = h;
        s.points = static_cast<int>(t.pvalue.size());
        s.prop_accept = t.pvalue.empty() ? kMissing : acceptance_proportion(t.pvalue, alpha);
        s.raw_p_median = t.pvalue.empty() ? kMissing : stats::median(t.pvalue);
        rep.horizons.push_back(std::move(s));
        for (std::size_t i = 0; i < t.points.size(); ++i)
            per_point[{t.points[i].country, t.points[i].period}].push_back(t.pvalue[i]);
    }
    const std::size_t H = by_horizon.size();
    std::vector<std::vector<double>> common;
    for (auto& [k, ps] : per_point)
        if (ps.size() == H) common.push_back(std::move(ps));
    rep.common_points = static_cast<int>(common.size());

    for (auto method : kAdjustments) {
        std::vector<int> rejected(H, 0);
        int different = 0, any = 0;
        for (const auto& ps : common) {
            const auto adj = adjust_pvalues(ps, method);
            for (std::size_t h = 0; h < H; ++h)
                if (adj[h] <= alpha) ++rejected[h];
            const auto v = irf_verdict(adj, alpha);
            different += v.different;
            any += v.any_rejection;
        }
        const double n = static_cast<double>(common.size());
        for (std::size_t h = 0; h < H; ++h)
            rep.horizons[h].adj_reject_frac[method] = common.empty() ? kMissing : rejected[h] / n;
        VerdictSummary vs;
        vs.different_frac = common.empty() ? kMissing : different / n;
        vs.any_rejection_frac = common.empty() ? kMissing : any / n;
        vs.different = !common.empty() && 2 * different > static_cast<int>(common.size());
        rep.verdicts[method] = vs;
    }
    return rep;
}

void write_tests_csv(std::ostream& out, const std::vector<TestReport>& reports, bool header) {
    csv::Writer w(out);
    if (header)
        w.row({"outcome", "policy", "horizon", "prop_accept", "raw_p_summary", "adj_method", "adj_reject_frac", "verdict"});
    for (const auto& r : reports)
        for (const auto& h : r.horizons)
            for (auto method : kAdjustments)
                w.row({r.outcome, r.policy, std::to_string(h.horizon), csv::format_number(h.prop_accept),
                       csv::format_number(h.raw_p_median), to_string(method),
                       csv::format_number(h.adj_reject_frac.at(method)),
                       r.verdicts.at(method).different ? "different" : "not_different"});
}

}  // namespace lpma
