#include <doctest.h>

#include "helpers.hpp"
#include "lpma/analysis.hpp"
#include "lpma/bootstrap.hpp"
#include "lpma/inference.hpp"

using namespace lpma;
using testing::error_code;

namespace {


struct Setup {
    SyntheticPanel sim;
    std::vector<HorizonFit> fits;
    HorizonFit baseline;
    CandidateSet cand;
    MallowsWeights w;

    Setup(int n_periods, std::uint64_t seed, int horizon = 1, double outcome_scale = 1.0)
        : sim(testing::synthetic(ModelForm::A, -0.5, n_periods, seed)) {
        if (outcome_scale != 1.0) {
            std::vector<double> y(sim.panel.column(sim.spec.outcome).begin(), sim.panel.column(sim.spec.outcome).end());
            for (auto& v : y) v *= outcome_scale;
            sim.panel.set_column(sim.spec.outcome, y, Transform::Level);
        }
        for (ModelForm f : kCandidateForms)
            fits.push_back(fit_horizon(make_design(sim.panel, sim.regimes, sim.spec.with_form(f), horizon, {})));
        baseline = fit_horizon(make_design(sim.panel, sim.regimes, sim.spec, horizon, {}));
        cand = make_candidate_set(fits);
        w = solve_weights(cand);
    }
};

RegimeVariables regimes_of(const PanelDataset& p) {
    auto col = [&](const char* n) { return std::vector<double>(p.column(n).begin(), p.column(n).end()); };
    return {col(kRateChangeQ), col(kRateChangeA), col(kIndicatorQ), col(kIndicatorA)};
}

}  // namespace

TEST_CASE("p-value adjustments") {
    const std::vector<double> p{0.01, 0.02, 0.03};
    const auto b = adjust_pvalues(p, Adjustment::Bonferroni);
    const auto h = adjust_pvalues(p, Adjustment::Holm);
    const auto y = adjust_pvalues(p, Adjustment::BenjaminiYekutieli);
    const std::vector<double> eb{0.03, 0.06, 0.09}, eh{0.03, 0.04, 0.04}, ey{0.055, 0.055, 0.055};
    for (int i = 0; i < 3; ++i) {
        CHECK(b[i] == doctest::Approx(eb[i]).epsilon(1e-12));
        CHECK(h[i] == doctest::Approx(eh[i]).epsilon(1e-12));
        CHECK(y[i] == doctest::Approx(ey[i]).epsilon(1e-12));
    }
    std::vector<double> twelve(12, 1.0);
    twelve[0] = 0.1 / 12;
    CHECK(adjust_pvalues(twelve, Adjustment::Bonferroni)[0] == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(adjust_pvalues(twelve, Adjustment::Holm)[0] == doctest::Approx(0.1).epsilon(1e-12));
    const std::vector<double> bad{0.5, 1.5};
    CHECK(error_code([&] { adjust_pvalues(bad, Adjustment::Holm); }) == "inference.OutOfRangeP");
}

TEST_CASE("adjustment properties") {
    std::mt19937_64 g(12);
    std::uniform_real_distribution<double> u;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<double> p(12);
        for (auto& v : p) v = u(g) * u(g);
        for (auto m : kAdjustments) {
            const auto a = adjust_pvalues(p, m);
            for (std::size_t i = 0; i < p.size(); ++i) {
                CHECK(a[i] >= p[i]);
                CHECK(a[i] <= 1.0);
                for (std::size_t j = 0; j < p.size(); ++j)
                    if (p[i] <= p[j]) CHECK(a[i] <= a[j]);
            }
        }
        const auto b = adjust_pvalues(p, Adjustment::Bonferroni), h = adjust_pvalues(p, Adjustment::Holm);
        for (std::size_t i = 0; i < p.size(); ++i) CHECK(h[i] <= b[i]);
    }
}

TEST_CASE("acceptance proportion and verdicts") {
    const std::vector<double> p{0.05, 0.5, 0.2, 0.01};
    CHECK(acceptance_proportion(p) == 0.5);
    const std::vector<double> ones(5, 1.0);
    CHECK(acceptance_proportion(ones) == 1.0);
    CHECK(acceptance_proportion(std::vector<double>{0.1}) == 0.0);

    auto verdict = [](int rejected) {
        std::vector<double> a(12, 0.9);
        for (int i = 0; i < rejected; ++i) a[i] = 0.01;
        return irf_verdict(a);
    };
    CHECK(verdict(12).different);
    CHECK_FALSE(verdict(6).different);
    CHECK(verdict(6).any_rejection);
    CHECK(verdict(7).different);
    CHECK(verdict(7).rejections == 7);
    CHECK_FALSE(verdict(0).any_rejection);
}

TEST_CASE("no interaction and equal slopes gives a zero statistic") {
    Setup s(120, 21);
    const double d1 = s.baseline.coefficient(ColumnRole::Policy);
    for (auto& f : s.fits) {
        for (std::size_t j = 0; j < f.design->columns.size(); ++j) {
            const auto role = f.design->columns[j].role;
            if (role == ColumnRole::Interaction || role == ColumnRole::RateSlope || role == ColumnRole::TripleSlope)
                f.coef(static_cast<Eigen::Index>(j)) = 0.0;
        }
        f.coef(f.design->index_of(ColumnRole::Policy)) = d1;
    }
    const auto cand = make_candidate_set(s.fits);
    const auto t = equality_test(cand, s.w.w, s.baseline);
    REQUIRE(!t.stat.empty());
    for (std::size_t i = 0; i < t.stat.size(); ++i) {
        CHECK(std::fabs(t.stat[i]) <= 1e-9);
        CHECK(t.pvalue[i] == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("test statistics do not depend on the outcome scale") {
    Setup a(100, 31, 2), b(100, 31, 2, 7.0);
    const auto ta = equality_test(a.cand, a.w.w, a.baseline);
    const auto tb = equality_test(b.cand, b.w.w, b.baseline);
    REQUIRE(ta.stat.size() == tb.stat.size());
    for (std::size_t i = 0; i < ta.stat.size(); ++i) {
        CHECK(tb.stat[i] == doctest::Approx(ta.stat[i]).epsilon(1e-8));
        CHECK(tb.estimate[i] == doctest::Approx(7.0 * ta.estimate[i]).epsilon(1e-8));
    }
    const auto z = zero_test(a.cand, a.w.w);
    for (double r : z.reference) CHECK(r == 0.0);
}

TEST_CASE("test report counts points observed at every horizon") {
    std::map<int, PointTests> m;
    for (int h = 1; h <= 3; ++h) {
        PointTests t;
        t.horizon = h;
        for (int k = 0; k < 4 - h + 1; ++k) {
            t.points.push_back({0, k});
            t.pvalue.push_back(k == 0 ? 0.001 : 0.8);
        }
        m[h] = t;
    }
    const auto r = build_test_report(m);
    CHECK(r.common_points == 2);
    CHECK(r.horizons.size() == 3);
    CHECK(r.horizons[0].prop_accept == doctest::Approx(0.75));
    CHECK(r.verdicts.at(Adjustment::Bonferroni).different_frac == doctest::Approx(0.5));
    CHECK_FALSE(r.verdicts.at(Adjustment::Bonferroni).different);
}

TEST_CASE("bootstrap draws equal a brute-force refit on resampled countries") {
    Setup s(60, 41, 2);
    BootstrapOptions o;
    o.draws = 4;
    o.seed = 99;
    const auto draws = bootstrap_candidates(s.cand, &s.baseline, o);
    CHECK(draws.draws() == 4);
    const auto full = attach_regimes(s.sim.panel, s.sim.regimes);
    for (int d = 0; d < 4; ++d) {
        REQUIRE(draws.ok[static_cast<std::size_t>(d)]);
        const auto picks = bootstrap_picks(o.seed, d, full.n_countries());
        const auto panel = full.resample_countries(picks);
        const auto reg = regimes_of(panel);
        std::vector<HorizonFit> fits;
        for (std::size_t m = 0; m < kCandidateForms.size(); ++m) {
            fits.push_back(fit_horizon(make_design(panel, reg, s.sim.spec.with_form(kCandidateForms[m]), 2, {})));
            const auto& orig = *s.fits[m].design;
            for (std::size_t j = 0; j < orig.columns.size(); ++j) {
                if (orig.columns[j].role == ColumnRole::FixedEffect) continue;
                const double brute = fits.back().coefficient(orig.columns[j].name);
                CHECK(draws.coef[m](d, static_cast<Eigen::Index>(j)) == doctest::Approx(brute).epsilon(1e-8));
            }
        }
        const auto w = solve_weights(make_candidate_set(fits)).w;
        for (int m = 0; m < w.size(); ++m) CHECK(std::fabs(draws.weights(d, m) - w(m)) <= 1e-6);
        const auto base = fit_horizon(make_design(panel, reg, s.sim.spec, 2, {}));
        CHECK(draws.baseline(d) == doctest::Approx(base.coefficient(ColumnRole::Policy)).epsilon(1e-8));
    }
    CHECK(error_code([&] {
              BootstrapOptions one = o;
              one.draws = 1;
              bootstrap_candidates(s.cand, &s.baseline, one);
          }) == "inference.TooFewDraws");
}

TEST_CASE("bootstrap picks are deterministic and in range") {
    const auto a = bootstrap_picks(5, 3, 11), b = bootstrap_picks(5, 3, 11);
    CHECK(a == b);
    CHECK(a.size() == 11);
    for (int c : a) CHECK((c >= 0 && c < 11));
    CHECK(bootstrap_picks(5, 4, 11) != a);
}

TEST_CASE("bootstrap equality test reuses the point estimates") {
    Setup s(80, 51, 1);
    BootstrapOptions o;
    o.draws = 19;
    o.seed = 3;
    const auto draws = bootstrap_candidates(s.cand, &s.baseline, o);
    const auto fixed = equality_test(s.cand, s.w.w, s.baseline);
    const auto boot = bootstrap_equality_test(s.cand, s.w.w, s.baseline, draws);
    REQUIRE(boot.estimate.size() == fixed.estimate.size());
    for (std::size_t i = 0; i < boot.estimate.size(); ++i) {
        CHECK(boot.estimate[i] == fixed.estimate[i]);
        CHECK(boot.se[i] > 0.0);
        CHECK((boot.pvalue[i] >= 0.0 && boot.pvalue[i] <= 1.0));
    }
    const auto no_base = bootstrap_candidates(s.cand, nullptr, o);
    CHECK(error_code([&] { bootstrap_equality_test(s.cand, s.w.w, s.baseline, no_base); }) ==
          "inference.MissingBaseline");
}
