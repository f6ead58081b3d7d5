#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpma/panel.hpp"
#include "lpma/projection.hpp"
#include "lpma/simulation.hpp"
#include "lpma/transforms.hpp"

namespace testing {

inline lpma::PanelDataset small_panel(int n_countries, int n_periods, unsigned seed, lpma::Period first = {1990, 1}) {
    std::vector<std::string> names;
    for (int i = 0; i < n_countries; ++i) names.push_back("C" + std::to_string(i));
    lpma::PanelDataset p(names, first, n_periods);
    std::mt19937_64 g(seed);
    std::normal_distribution<double> z;
    for (const char* col : {"y", "p", "x1", "x2"}) {
        std::vector<double> v(static_cast<std::size_t>(n_countries * n_periods));
        for (auto& x : v) x = z(g);
        p.set_column(col, v, lpma::Transform::Level);
    }
    std::vector<double> rate(static_cast<std::size_t>(n_countries * n_periods));
    for (int i = 0; i < n_countries; ++i) {
        double r = 3.0;
        for (int t = 0; t < n_periods; ++t) {
            r += 0.5 * z(g);
            rate[p.cell(i, t)] = r;
        }
    }
    p.set_column("rate", rate, lpma::Transform::Level);
    return p;
}

inline lpma::ModelSpec small_spec(lpma::ModelForm form = lpma::ModelForm::Baseline) {
    lpma::ModelSpec s;
    s.form = form;
    s.outcome = "y";
    s.policy = "p";
    s.controls = {"x1", "x2"};
    return s;
}

inline lpma::SyntheticPanel synthetic(lpma::ModelForm truth, double d3, int n_periods, std::uint64_t seed) {
    lpma::DgpConfig c;
    c.true_form = truth;
    c.delta3 = d3;
    c.n_periods = n_periods;
    c.seed = seed;
    return lpma::generate_dgp(c, 1, 0);
}

}  // namespace testing

#include <functional>

#include "lpma/error.hpp"

namespace testing {

inline std::string error_code(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const lpma::Error& e) {
        return e.qualified_code();
    }
    return "none";
}

}  // namespace testing
