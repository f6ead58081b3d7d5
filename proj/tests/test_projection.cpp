#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "lpma/covariance.hpp"
#include "lpma/projection.hpp"
#include "lpma/simulation.hpp"

using namespace lpma;
using testing::error_code;

namespace {

DesignMatrix manual_design(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, int countries = 1) {
    DesignMatrix d;
    d.spec = testing::small_spec();
    d.horizon = 1;
    const int n = static_cast<int>(X.rows());
    for (int c = 0; c < countries; ++c) d.countries.push_back("C" + std::to_string(c));
    d.first_period = {2000, 1};
    const int per = (n + countries - 1) / countries;
    for (int t = 0; t < n; ++t) d.rows.push_back({t / per, t % per});
    d.X = X;
    d.y = y;
    for (int j = 0; j < X.cols(); ++j) d.columns.push_back({"c" + std::to_string(j), ColumnRole::Control});
    d.regimes.d_i_q = d.regimes.d_i_a = d.regimes.ind_q = d.regimes.ind_a = Eigen::VectorXd::Zero(n);
    return d;
}

struct Fixture {
    PanelDataset panel = testing::small_panel(5, 60, 17);
    RegimeVariables regimes = build_regimes(panel, "rate");
};

}  // namespace

TEST_CASE("column counts per form") {
    std::vector<std::string> countries;
    for (int i = 0; i < 11; ++i) countries.push_back("C" + std::to_string(i));
    ModelSpec s = testing::small_spec();
    s.controls = {"a", "b", "c", "d", "e"};
    CHECK(design_columns(s, countries).size() == 23);
    CHECK(design_columns(s.with_form(ModelForm::E), countries).size() == 26);
    for (ModelForm f : kCandidateForms)
        CHECK(design_columns(s.with_form(f), countries).size() == 23 + static_cast<std::size_t>(interaction_count(f)));
}

TEST_CASE("constant policy is rejected") {
    Fixture fx;
    fx.panel.set_column("p", std::vector<double>(fx.panel.column("p").size(), 2.0), Transform::Level);
    CHECK(error_code([&] { build_design(fx.panel, fx.regimes, testing::small_spec(), 1); }) ==
          "projection.AllPolicyVarianceZero");
}

TEST_CASE("exact fit of y on x") {
    Eigen::MatrixXd X(6, 1);
    X << 1, 2, 3, 4, 5, 6;
    const auto f = fit_horizon(manual_design(X, X.col(0)));
    CHECK(f.coef(0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(f.residuals.norm() <= 1e-12);
}

TEST_CASE("least squares matches the normal equations") {
    std::mt19937_64 g(5);
    std::normal_distribution<double> z;
    Eigen::MatrixXd X(50, 4);
    Eigen::VectorXd y(50);
    for (int i = 0; i < 50; ++i) {
        for (int j = 0; j < 4; ++j) X(i, j) = z(g);
        y(i) = z(g);
    }
    const Eigen::VectorXd oracle = (X.transpose() * X).inverse() * (X.transpose() * y);
    const auto f = fit_horizon(manual_design(X, y));
    for (int j = 0; j < 4; ++j) CHECK(std::fabs(f.coef(j) - oracle(j)) <= 1e-8);
    CHECK((X.transpose() * f.residuals).cwiseAbs().maxCoeff() <= 1e-10);
    const Eigen::MatrixXd H = X * (X.transpose() * X).inverse() * X.transpose();
    for (int i = 0; i < 50; ++i) CHECK(f.leverage(i) == doctest::Approx(H(i, i)).epsilon(1e-10));
}

TEST_CASE("an exact duplicate column is pruned without changing the fit") {
    Fixture fx;
    const auto base = fit_horizon(build_design(fx.panel, fx.regimes, testing::small_spec(), 2));
    auto v = std::vector<double>(fx.panel.column("x1").begin(), fx.panel.column("x1").end());
    fx.panel.set_column("x1copy", v, Transform::Level);
    ModelSpec s = testing::small_spec();
    s.controls = {"x1", "x2", "x1copy"};
    const auto d = build_design(fx.panel, fx.regimes, s, 2);
    CHECK(d.dropped.size() == 2);
    CHECK(std::all_of(d.dropped.begin(), d.dropped.end(), [](const std::string& n) { return n.find("x1copy") == 0; }));
    CHECK(d.dim() == base.dim());
    const auto f = fit_horizon(d);
    CHECK((f.residuals - base.residuals).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(f.coefficient(ColumnRole::Policy) == doctest::Approx(base.coefficient(ColumnRole::Policy)).epsilon(1e-10));
}

TEST_CASE("pruning keeps the earliest independent columns") {
    Eigen::MatrixXd X(5, 4);
    X << 1, 2, 3, 1, 1, 0, 1, 2, 1, 5, 6, 1, 1, 1, 2, 0, 1, 3, 4, 7;
    X.col(2) = X.col(0) + X.col(1);
    CHECK(independent_columns(X) == std::vector<int>{0, 1, 3});
}

TEST_CASE("marginal effect examples") {
    Fixture fx;
    auto fa = fit_horizon(build_design(fx.panel, fx.regimes, testing::small_spec(ModelForm::A), 1));
    fa.coef.setZero();
    fa.coef(fa.design->index_of(ColumnRole::Policy)) = 0.5;
    fa.coef(fa.design->index_of(ColumnRole::Interaction)) = -0.2;
    CHECK(irf_point(fa, {"loose", 1.0, std::nullopt}).value == doctest::Approx(0.3));
    CHECK(irf_point(fa, {"tight", 0.0, std::nullopt}).value == doctest::Approx(0.5));

    auto fc = fit_horizon(build_design(fx.panel, fx.regimes, testing::small_spec(ModelForm::C), 1));
    fc.coef.setZero();
    fc.coef(fc.design->index_of(ColumnRole::Policy)) = 0.5;
    fc.coef(fc.design->index_of(ColumnRole::Interaction)) = 0.1;
    const auto q = reference_quartiles();
    CHECK(irf_point(fc, regime_for(ModelForm::C, Stance::Loosening, q)).value == doctest::Approx(0.46));

    auto fe = fit_horizon(build_design(fx.panel, fx.regimes, testing::small_spec(ModelForm::E), 1));
    const double d1 = fe.coefficient(ColumnRole::Policy);
    for (auto role : {ColumnRole::Interaction, ColumnRole::RateSlope, ColumnRole::TripleSlope})
        fe.coef(fe.design->index_of(role)) = 0.0;
    for (Stance s : {Stance::Loosening, Stance::Tightening})
        CHECK(irf_point(fe, regime_for(ModelForm::E, s, q)).value == doctest::Approx(d1).epsilon(1e-14));
}

TEST_CASE("baseline effect does not depend on the regime") {
    Fixture fx;
    const auto f = fit_horizon(build_design(fx.panel, fx.regimes, testing::small_spec(), 3));
    const auto a = irf_point(f, {"x", 1.0, -2.0});
    const auto b = irf_point(f, {"y", 0.0, 5.0});
    CHECK(a.value == b.value);
    CHECK(a.se == b.se);
    CHECK(a.value == f.coefficient(ColumnRole::Policy));
}

TEST_CASE("rescaling the policy rescales its coefficients") {
    Fixture fx;
    const double c = 4.0;
    const auto base = fit_horizon(build_design(fx.panel, fx.regimes, testing::small_spec(ModelForm::B), 2));
    std::vector<double> p(fx.panel.column("p").begin(), fx.panel.column("p").end());
    for (auto& v : p) v *= c;
    fx.panel.set_column("p", p, Transform::Level);
    const auto scaled = fit_horizon(build_design(fx.panel, fx.regimes, testing::small_spec(ModelForm::B), 2));
    CHECK((scaled.residuals - base.residuals).cwiseAbs().maxCoeff() <= 1e-10);
    CHECK(scaled.coefficient(ColumnRole::Policy) * c == doctest::Approx(base.coefficient(ColumnRole::Policy)));
    CHECK(scaled.coefficient(ColumnRole::Interaction) * c == doctest::Approx(base.coefficient(ColumnRole::Interaction)));
    CHECK(scaled.se("p") * c == doctest::Approx(base.se("p")));
}

TEST_CASE("residuals are orthogonal to the design") {
    Fixture fx;
    for (ModelForm f : kAllForms) {
        const auto fit = fit_horizon(build_design(fx.panel, fx.regimes, testing::small_spec(f), 4));
        CHECK((fit.design->X.transpose() * fit.residuals).cwiseAbs().maxCoeff() <= 1e-9);
    }
}

TEST_CASE("all forms share one sample per horizon") {
    Fixture fx;
    for (int h : {1, 6, 12}) {
        const auto rows = build_design(fx.panel, fx.regimes, testing::small_spec(), h).n_rows();
        for (ModelForm f : kCandidateForms) CHECK(build_design(fx.panel, fx.regimes, testing::small_spec(f), h).n_rows() == rows);
    }
}

TEST_CASE("the window restricts base periods") {
    Fixture fx;
    DesignOptions o;
    o.window = PeriodWindow{{1995, 1}, {1999, 4}};
    const auto r = fit_projection(fx.panel, fx.regimes, testing::small_spec(ModelForm::D), {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12}, o);
    CHECK(r.fits.size() == 12);
    for (const auto& [h, f] : r.fits)
        for (std::size_t i = 0; i < f.design->rows.size(); ++i) CHECK(o.window->contains(f.design->base_period(i)));
    CHECK(error_code([&] { fit_projection(fx.panel, fx.regimes, testing::small_spec(), {13}); }) == "projection.InvalidHorizon");
}

TEST_CASE("robust covariance at bandwidth zero is White's estimator") {
    Fixture fx;
    const auto f = fit_horizon(build_design(fx.panel, fx.regimes, testing::small_spec(ModelForm::A), 2), 0);
    const auto& X = f.design->X;
    Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(X.cols(), X.cols());
    for (int i = 0; i < X.rows(); ++i) meat += f.residuals(i) * f.residuals(i) * X.row(i).transpose() * X.row(i);
    const Eigen::MatrixXd bread = (X.transpose() * X).inverse();
    const Eigen::MatrixXd white = bread * meat * bread;
    CHECK((f.robust_cov - white).cwiseAbs().maxCoeff() <= 1e-10 * white.cwiseAbs().maxCoeff());

    for (int L : {0, 2, 5}) {
        const auto c = robust_cov(f, L).matrix;
        CHECK((c - c.transpose()).cwiseAbs().maxCoeff() <= 1e-14 * c.cwiseAbs().maxCoeff());
        CHECK(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(c).eigenvalues().minCoeff() >= -1e-12);
    }
    CHECK(error_code([&] { robust_cov(f, -1); }) == "inference.InvalidBandwidth");
}

TEST_CASE("a long simulated panel recovers the true responses") {
    DgpConfig c;
    c.true_form = ModelForm::A;
    c.delta1 = 1.0;
    c.delta3 = -0.5;
    c.n_periods = 5000;
    c.seed = 42;
    const auto s = generate_dgp(c, 12, 4000);
    std::set<int> hs;
    for (int h = 1; h <= 12; ++h) hs.insert(h);
    const auto r = fit_projection(s.panel, s.regimes, s.spec.with_form(ModelForm::A), hs);
    REQUIRE(r.fits.size() == 12);
    for (const auto& [h, f] : r.fits)
        for (Stance st : {Stance::Loosening, Stance::Tightening}) {
            const auto pt = irf_point(f, regime_for(ModelForm::A, st, s.truth.quartiles));
            const double truth = s.truth.irf.at(h).at(to_string(st));
            CHECK(std::fabs(pt.value - truth) <= 3 * pt.se);
        }
}
