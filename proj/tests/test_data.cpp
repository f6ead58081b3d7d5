#include <doctest.h>

#include <fstream>
#include <sstream>

#include "helpers.hpp"
#include "lpma/panel.hpp"
#include "lpma/stats.hpp"
#include "lpma/transforms.hpp"

using namespace lpma;
using testing::error_code;

namespace {

PanelDataset parse(const std::string& text, PanelSchema schema = {}) {
    std::istringstream in(text);
    return parse_panel(in, schema);
}

}  // namespace

TEST_CASE("load_panel builds one cell per country and quarter") {
    const auto p = parse(
        "country,period,gdp\n"
        "AUS,2000-Q1,1\nAUS,2000-Q2,2\nAUS,2000-Q3,3\n"
        "BEL,2000-Q1,4\nBEL,2000-Q2,5\nBEL,2000-Q3,6\n",
        {{"gdp"}});
    CHECK(p.n_countries() == 2);
    CHECK(p.n_periods() == 3);
    CHECK(p.column("gdp").size() == 6);
    CHECK(p.value("gdp", 1, 2) == 6.0);
    CHECK(p.period(0) == Period{2000, 1});
}

TEST_CASE("load_panel rejects malformed input") {
    CHECK(error_code([] { parse("country,period,gdp\nAUS,2000-Q1,1\nAUS,2000-Q1,2\n"); }) == "data.DuplicateRow");
    CHECK(error_code([] { parse("country,period,gdp\nAUS,2000-Q1,1\n", {{"cpi"}}); }) == "data.MissingColumn");
    CHECK(error_code([] { parse("country,period,gdp\nAUS,2000Q1,1\n"); }) == "data.UnparseablePeriod");
    CHECK(error_code([] { parse("country,period,gdp\nAUS,2000-Q5,1\n"); }) == "data.UnparseablePeriod");
}

TEST_CASE("empty fields and gaps are missing") {
    const auto p = parse("country,period,gdp\nAUS,2000-Q1,1\nAUS,2000-Q2,\nBEL,2000-Q3,6\n");
    CHECK(p.n_periods() == 3);
    CHECK(is_missing(p.value("gdp", 0, 1)));
    CHECK(is_missing(p.value("gdp", 0, 2)));
    CHECK(is_missing(p.value("gdp", 1, 0)));
    CHECK(p.source_rows() == std::vector<int>{2, 1});
}

TEST_CASE("demo panel row counts match the file") {
    const std::string path = std::string(LPMA_SOURCE_DIR) + "/data/demo_panel.csv";
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    std::map<std::string, int> lines;
    while (std::getline(in, line))
        if (!line.empty()) ++lines[line.substr(0, line.find(','))];
    const auto p = load_panel(path);
    REQUIRE(p.n_countries() == static_cast<int>(lines.size()));
    for (int c = 0; c < p.n_countries(); ++c) CHECK(p.source_rows()[c] == lines[p.countries()[c]]);
}

TEST_CASE("write_panel round-trips") {
    const auto p = testing::small_panel(3, 10, 4);
    std::ostringstream out;
    write_panel(out, p);
    const auto q = parse(out.str());
    for (const auto& col : p.column_names())
        for (std::size_t k = 0; k < p.column(col).size(); ++k) CHECK(q.column(col)[k] == p.column(col)[k]);
}

TEST_CASE("log_diff_100 examples") {
    const std::vector<double> a{100, 102};
    const auto r = log_diff_100(a);
    CHECK(is_missing(r[0]));
    CHECK(r[1] == doctest::Approx(1.980263).epsilon(1e-6));
    const std::vector<double> b{100, 102, 101};
    CHECK(log_diff_100(b)[2] == doctest::Approx(-0.985230).epsilon(1e-6));
    const std::vector<double> bad{100, 0};
    CHECK(error_code([&] { log_diff_100(bad); }) == "data.NonPositiveLevel");
    const std::vector<double> gap{100, kMissing, 101, 103};
    const auto g = log_diff_100(gap);
    CHECK(is_missing(g[1]));
    CHECK(is_missing(g[2]));
    CHECK(g[3] == doctest::Approx(100 * std::log(103.0 / 101.0)));
}

TEST_CASE("log_diff_100 is invariant to rescaling the level") {
    std::vector<double> x{3, 4, 2, 9, 7}, y;
    for (double v : x) y.push_back(37.5 * v);
    const auto a = log_diff_100(x), b = log_diff_100(y);
    for (std::size_t t = 1; t < x.size(); ++t) CHECK(a[t] == doctest::Approx(b[t]).epsilon(1e-12));
}

TEST_CASE("regime indicators") {
    PanelDataset p({"X"}, {2000, 1}, 7);
    p.set_column("r", {5, 5, 4, 4.5, 4.5, 3, 3}, Transform::Level);
    const auto g = build_regimes(p, "r");
    CHECK(is_missing(g.d_i_q[0]));
    CHECK(g.d_i_q[1] == 0.0);
    CHECK(g.ind_q[1] == 0.0);
    CHECK(g.ind_q[2] == 1.0);
    CHECK(g.ind_q[3] == 0.0);
    for (int t = 0; t < 4; ++t) {
        CHECK(is_missing(g.d_i_a[t]));
        CHECK(is_missing(g.ind_a[t]));
    }
    CHECK(g.d_i_a[4] == doctest::Approx(-0.5));
    CHECK(g.ind_a[4] == 1.0);
    CHECK(g.ind_a[6] == 1.0);
}

TEST_CASE("HP filter leaves a linear series in the trend") {
    std::vector<double> y;
    for (int t = 0; t < 40; ++t) y.push_back(2.0 + 0.3 * t);
    const auto r = hp_filter(y, 1600);
    for (std::size_t t = 0; t < y.size(); ++t) {
        CHECK(std::fabs(r.cycle[t]) <= 1e-8);
        CHECK(r.trend[t] + r.cycle[t] == doctest::Approx(y[t]).epsilon(1e-14));
    }
}

TEST_CASE("HP filter matches a dense solve") {
    std::mt19937_64 g(11);
    std::normal_distribution<double> z;
    const int n = 60;
    std::vector<double> y(n);
    double lvl = 0;
    for (auto& v : y) v = (lvl += z(g));
    for (double lambda : {1.0, 1600.0, 129600.0}) {
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n - 2, n);
        for (int t = 0; t < n - 2; ++t) {
            D(t, t) = 1;
            D(t, t + 1) = -2;
            D(t, t + 2) = 1;
        }
        const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) + lambda * D.transpose() * D;
        const Eigen::VectorXd tau = A.ldlt().solve(Eigen::Map<const Eigen::VectorXd>(y.data(), n));
        const auto r = hp_filter(y, lambda);
        for (int t = 0; t < n; ++t) CHECK(r.trend[t] == doctest::Approx(tau(t)).epsilon(1e-8));
    }
    CHECK(error_code([&] { hp_filter(y, 0.0); }) == "data.InvalidLambda");
}

TEST_CASE("GDP forecasts switch edition at mid-year") {
    PanelDataset p({"X"}, {2005, 1}, 4);
    p.set_column("gdp", {1, 2, 3, 4}, Transform::Level);
    std::istringstream in(
        "country,edition,target_year,value\n"
        "X,2004-12,2005,1.5\nX,2005-06,2006,2.5\nX,2005-06,2005,9\n");
    const auto f = parse_forecasts(in);
    const auto m = merge_anticipation(p, f);
    CHECK(m.value(kGdpForecast, 0, 0) == 1.5);
    CHECK(m.value(kGdpForecast, 0, 1) == 1.5);
    CHECK(m.value(kGdpForecast, 0, 2) == 2.5);
    CHECK(m.value(kGdpForecast, 0, 3) == 2.5);

    const auto again = merge_anticipation(m, f);
    for (int t = 0; t < 4; ++t) CHECK(again.value(kGdpForecast, 0, t) == m.value(kGdpForecast, 0, t));

    std::vector<ForecastRecord> partial{f[1]};
    CHECK(error_code([&] { merge_anticipation(p, partial); }) == "data.MissingForecast");
    const auto windowed = merge_anticipation(p, partial, PeriodWindow{{2005, 3}, {2005, 4}});
    CHECK(is_missing(windowed.value(kGdpForecast, 0, 0)));
    CHECK(windowed.value(kGdpForecast, 0, 3) == 2.5);
}

TEST_CASE("summary statistics use the n-1 divisor") {
    PanelDataset p({"X"}, {2000, 1}, 5);
    p.set_column("v", {1, 2, kMissing, 4, 5}, Transform::Level);
    const auto rows = summary_stats(p, {"v"});
    REQUIRE(rows.size() == 1);
    CHECK(rows[0].n == 4);
    CHECK(rows[0].mean == doctest::Approx(3.0));
    CHECK(rows[0].sd == doctest::Approx(std::sqrt(10.0 / 3.0)));
}

TEST_CASE("type-7 quantiles") {
    const std::vector<double> v{4, 1, 3, 2};
    CHECK(stats::quantile(v, 0.25) == doctest::Approx(1.75));
    CHECK(stats::median(v) == doctest::Approx(2.5));
    CHECK(stats::normal_quantile(0.975) == doctest::Approx(1.959964).epsilon(1e-6));
}

TEST_CASE("zero-variance columns are flagged per country") {
    PanelDataset p({"X", "Y"}, {2000, 1}, 3);
    p.set_column("v", {1, 1, 1, 1, 2, 3}, Transform::Level);
    const auto z = zero_variance_columns(p, {"v"});
    REQUIRE(z.size() == 1);
    CHECK(z[0].country == "X");
}

TEST_CASE("small transform and regime cases") {
    const std::vector<double> flat{100, 100};
    CHECK(log_diff_100(flat)[1] == 0.0);

    PanelDataset p({"X"}, {2000, 1}, 5);
    p.set_column("r", {3, 3, 3, 3, 2}, Transform::Level);
    const auto g = build_regimes(p, "r");
    CHECK(g.d_i_a[4] == -1.0);
    CHECK(g.ind_a[4] == 1.0);

    PanelDataset q({"X"}, {2000, 1}, 2);
    q.set_column("r", {2.0, 1.5}, Transform::Level);
    const auto h = build_regimes(q, "r");
    CHECK(h.d_i_q[1] == -0.5);
    CHECK(h.ind_q[1] == 1.0);
}

TEST_CASE("HP filter on a constant and a random series") {
    const std::vector<double> c(30, 4.2);
    for (double v : hp_filter(c, 1600).cycle) CHECK(std::fabs(v) <= 1e-10);
    std::mt19937_64 g(3);
    std::normal_distribution<double> z;
    std::vector<double> y(100);
    for (auto& v : y) v = z(g);
    const auto r = hp_filter(y, 1600);
    for (std::size_t t = 0; t < y.size(); ++t) CHECK(std::fabs(r.trend[t] + r.cycle[t] - y[t]) <= 1e-10);
}

TEST_CASE("summary statistics match a direct computation") {
    PanelDataset p({"X"}, {2000, 1}, 3);
    p.set_column("lvl", {100, 102, 101}, Transform::Level);
    const auto t = apply_transforms(p, {{"lvl", Transform::LogDiff100}});
    const auto rows = summary_stats(t, {"lvl"});
    CHECK(rows[0].n == 2);
    CHECK(rows[0].mean == doctest::Approx(0.497517).epsilon(1e-6));

    std::mt19937_64 g(8);
    std::normal_distribution<double> z;
    std::vector<double> v(20);
    for (auto& x : v) x = 5 + 2 * z(g);
    PanelDataset s({"X"}, {2000, 1}, 20);
    s.set_column("v", v, Transform::Level);
    long double sum = 0, ss = 0;
    for (double x : v) sum += x;
    const long double m = sum / 20;
    for (double x : v) ss += (x - m) * (x - m);
    const auto r = summary_stats(s, {"v"})[0];
    CHECK(std::fabs(r.mean - static_cast<double>(m)) <= 1e-9);
    CHECK(std::fabs(r.sd - std::sqrt(static_cast<double>(ss / 19))) <= 1e-9);

    PanelDataset k({"X"}, {2000, 1}, 4);
    k.set_column("v", {2, 2, 2, 2}, Transform::Level);
    CHECK(summary_stats(k, {"v"})[0].sd == 0.0);
}
