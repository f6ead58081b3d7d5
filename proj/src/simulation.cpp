#include "lpma/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "lpma/csv.hpp"
#include "lpma/error.hpp"
#include "lpma/parallel.hpp"
#include "lpma/rng.hpp"
#include "lpma/stats.hpp"

namespace lpma {

const char* to_string(NoiseKind k) noexcept {
    switch (k) {
        case NoiseKind::Iid: return "iid";
        case NoiseKind::Ma: return "ma";
        case NoiseKind::Heteroskedastic: return "heteroskedastic";
    }
    return "?";
}

NoiseKind parse_noise(const std::string& text) {
    for (auto k : {NoiseKind::Iid, NoiseKind::Ma, NoiseKind::Heteroskedastic})
        if (text == to_string(k)) return k;
    throw Error("simulation", "InvalidConfig", "unknown noise kind '" + text + "'");
}

void DgpConfig::validate() const {
    auto fail = [](const std::string& m) { throw Error("simulation", "InvalidConfig", m); };
    auto stationary = [&](double rho, const char* name) {
        if (!(std::fabs(rho) < 1.0)) fail(std::string(name) + " must satisfy |rho| < 1");
    };
    stationary(rate_rho, "rate_rho");
    stationary(policy_rho, "policy_rho");
    stationary(control_rho, "control_rho");
    stationary(factor_rho, "factor_rho");
    if (!(sigma2 > 0.0)) fail("sigma2 must be > 0");
    if (!(rate_sd > 0.0) || !(policy_sd > 0.0) || !(control_sd > 0.0)) fail("innovation scales must be > 0");
    if (n_countries < 1) fail("n_countries must be >= 1");
    if (n_periods < 8) fail("n_periods must be >= 8");
    if (burn_in < 5) fail("burn_in must be >= 5");
    if (beta.empty() || beta.size() != gamma.size()) fail("beta and gamma must be nonempty and of equal length");
    if (!alpha.empty() && alpha.size() != static_cast<std::size_t>(n_countries)) fail("alpha needs one value per country");
    if (factors < 0) fail("factors must be >= 0");
    if (hetero < 0.0) fail("hetero must be >= 0");
    if (noise == NoiseKind::Ma && ma.empty()) fail("ma noise needs coefficients");
    if (!(alpha_sd >= 0.0) || !(loading_scale >= 0.0)) fail("scales must be >= 0");
}

ModelSpec DgpConfig::model_spec() const {
    ModelSpec s;
    s.outcome = "dy";
    s.policy = "p";
    for (std::size_t k = 0; k < beta.size(); ++k) s.controls.push_back("x" + std::to_string(k + 1));
    return s;
}

namespace {

// delta1 plus the true form's interaction at the given rate changes.
double marginal_effect(const DgpConfig& c, double dq, double da) {
    const double iq = dq < 0.0 ? 1.0 : 0.0;
    const double ia = da < 0.0 ? 1.0 : 0.0;
    switch (c.true_form) {
        case ModelForm::Baseline: return c.delta1;
        case ModelForm::A: return c.delta1 + c.delta3 * iq;
        case ModelForm::B: return c.delta1 + c.delta3 * ia;
        case ModelForm::C: return c.delta1 + c.delta3 * dq;
        case ModelForm::D: return c.delta1 + c.delta3 * da;
        case ModelForm::E: return c.delta1 + c.delta3 * iq + c.delta4 * dq + c.delta5 * dq * iq;
    }
    return c.delta1;
}

std::vector<double> draw_alpha(const DgpConfig& c, std::uint64_t seed) {
    if (!c.alpha.empty()) return c.alpha;
    Rng rng(derive_seed(seed, 0, 1));
    std::normal_distribution<double> z;
    std::vector<double> a(static_cast<std::size_t>(c.n_countries));
    for (auto& v : a) v = c.alpha_sd * z(rng);
    return a;
}

double ar_start(double rho, double sd, std::normal_distribution<double>& z, Rng& rng) {
    return sd / std::sqrt(1.0 - rho * rho) * z(rng);
}

}  // namespace

RegimeQuartiles population_quartiles(const DgpConfig& c) {
    const double s2 = c.rate_sd * c.rate_sd / (1.0 - c.rate_rho * c.rate_rho);
    const double r = c.rate_rho;
    const double va = s2 * (4.0 + 2.0 * (3.0 * r + 2.0 * r * r + r * r * r));
    const double z = stats::normal_quantile(0.75);
    RegimeQuartiles q;
    q.q1_quarterly = c.rate_drift - z * std::sqrt(s2);
    q.q3_quarterly = c.rate_drift + z * std::sqrt(s2);
    q.q1_annual = 4.0 * c.rate_drift - z * std::sqrt(va);
    q.q3_annual = 4.0 * c.rate_drift + z * std::sqrt(va);
    return q;
}

std::map<int, std::map<std::string, double>> true_irf(const DgpConfig& c, int max_horizon, int draws) {
    c.validate();
    if (max_horizon < 1) throw Error("simulation", "InvalidConfig", "max_horizon must be >= 1");
    const int pairs = std::max(1, draws / 2);
    const double mu = c.rate_drift, rho = c.rate_rho;
    const double s2 = c.rate_sd * c.rate_sd / (1.0 - rho * rho);
    Eigen::Matrix4d sigma;
    for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) sigma(a, b) = s2 * std::pow(rho, std::abs(a - b));
    const Eigen::Matrix4d chol = sigma.llt().matrixL();
    const RegimeQuartiles q = population_quartiles(c);

    // Conditioning at t on (dq_t, da_t) per the true form; index 3 is t.
    enum class Kind { None, SignQ, SignA, ValueQ, ValueA };
    Kind kind = Kind::None;
    switch (c.true_form) {
        case ModelForm::Baseline: kind = Kind::None; break;
        case ModelForm::A: kind = Kind::SignQ; break;
        case ModelForm::B: kind = Kind::SignA; break;
        case ModelForm::C:
        case ModelForm::E: kind = Kind::ValueQ; break;
        case ModelForm::D: kind = Kind::ValueA; break;
    }

    std::map<int, std::map<std::string, double>> out;
    Rng rng(derive_seed(c.seed, 0, 4));
    std::normal_distribution<double> z;
    for (Stance stance : {Stance::Loosening, Stance::Tightening}) {
        const bool loose = stance == Stance::Loosening;
        Eigen::Vector4d a = Eigen::Vector4d::Zero();
        double target = 0.0;
        if (kind == Kind::ValueQ || kind == Kind::SignQ) a[3] = 1.0;
        if (kind == Kind::ValueA || kind == Kind::SignA) a.setOnes();
        if (kind == Kind::ValueQ) target = loose ? q.q1_quarterly : q.q3_quarterly;
        if (kind == Kind::ValueA) target = loose ? q.q1_annual : q.q3_annual;
        const Eigen::Vector4d sa = sigma * a;
        const double asa = a.dot(sa);

        std::vector<double> acc(static_cast<std::size_t>(max_horizon), 0.0);
        std::vector<double> eps(static_cast<std::size_t>(max_horizon));
        for (int d = 0; d < pairs; ++d) {
            Eigen::Vector4d x;
            for (;;) {
                Eigen::Vector4d g;
                for (int i = 0; i < 4; ++i) g[i] = z(rng);
                x = Eigen::Vector4d::Constant(mu) + chol * g;
                if (kind == Kind::SignQ || kind == Kind::SignA) {
                    const bool neg = a.dot(x) < 0.0;
                    if (neg != loose) continue;
                } else if (kind == Kind::ValueQ || kind == Kind::ValueA) {
                    x += sa * ((target - a.dot(x)) / asa);
                }
                break;
            }
            for (auto& e : eps) e = z(rng);
            for (double sign : {1.0, -1.0}) {
                double h[4] = {x[0], x[1], x[2], x[3]};
                acc[0] += marginal_effect(c, h[3], h[0] + h[1] + h[2] + h[3]);
                for (int j = 1; j < max_horizon; ++j) {
                    const double next = mu + rho * (h[3] - mu) + c.rate_sd * sign * eps[static_cast<std::size_t>(j)];
                    h[0] = h[1];
                    h[1] = h[2];
                    h[2] = h[3];
                    h[3] = next;
                    acc[static_cast<std::size_t>(j)] += marginal_effect(c, h[3], h[0] + h[1] + h[2] + h[3]);
                }
            }
        }
        for (int k = 1; k <= max_horizon; ++k) {
            const double em = acc[static_cast<std::size_t>(k - 1)] / (2.0 * pairs);
            double v = std::pow(c.policy_rho, k - 1) * em;
            if (k >= 2) v += c.delta2 * std::pow(c.policy_rho, k - 2);
            out[k][to_string(stance)] = v;
        }
    }
    return out;
}

SyntheticPanel generate_dgp(const DgpConfig& c, int max_horizon, int irf_draws) {
    c.validate();
    const int N = c.n_countries, T = c.n_periods, B = c.burn_in, L = B + T, R = c.factors;
    const std::size_t K = c.beta.size();
    SyntheticPanel out;
    out.spec = c.model_spec();
    out.truth.alpha = draw_alpha(c, c.seed);
    out.truth.quartiles = population_quartiles(c);

    std::normal_distribution<double> z;
    Eigen::MatrixXd F = Eigen::MatrixXd::Zero(L, R), Lam = Eigen::MatrixXd::Zero(N, R);
    if (R > 0) {
        Rng fr(derive_seed(c.seed, 0, 2));
        const double sc = std::sqrt(1.0 - c.factor_rho * c.factor_rho);
        for (int r = 0; r < R; ++r) {
            F(0, r) = z(fr);
            for (int t = 1; t < L; ++t) F(t, r) = c.factor_rho * F(t - 1, r) + sc * z(fr);
        }
        Rng lr(derive_seed(c.seed, 0, 3));
        for (int r = 0; r < R; ++r)
            for (int i = 0; i < N; ++i) Lam(i, r) = c.loading_scale * z(lr);
    }
    out.truth.factors = F.bottomRows(T);
    out.truth.loadings = Lam;

    std::vector<std::string> names;
    for (int i = 0; i < N; ++i) names.push_back((i < 9 ? "C0" : "C") + std::to_string(i + 1));
    PanelDataset panel(names, Period{1980, 1}, T);
    const std::size_t cells = static_cast<std::size_t>(N) * T;
    std::vector<double> dy(cells), pol(cells), rate(cells);
    std::vector<std::vector<double>> xs(K, std::vector<double>(cells));
    out.truth.conditional_mean.assign(cells, kMissing);
    out.truth.shock.assign(cells, kMissing);

    const double sigma = std::sqrt(c.sigma2);
    for (int i = 0; i < N; ++i) {
        Rng rng(derive_seed(c.seed, static_cast<std::uint64_t>(i) + 1));
        std::vector<double> lvl(L), p(L), dq(L, 0.0), da(L, 0.0), e(L);
        std::vector<std::vector<double>> x(K, std::vector<double>(L));
        double di = c.rate_drift + ar_start(c.rate_rho, c.rate_sd, z, rng);
        lvl[0] = c.rate_start;
        for (int t = 1; t < L; ++t) {
            di = c.rate_drift + c.rate_rho * (di - c.rate_drift) + c.rate_sd * z(rng);
            lvl[t] = lvl[t - 1] + di;
        }
        p[0] = ar_start(c.policy_rho, c.policy_sd, z, rng);
        for (int t = 1; t < L; ++t) p[t] = c.policy_rho * p[t - 1] + c.policy_sd * z(rng);
        for (std::size_t k = 0; k < K; ++k) {
            x[k][0] = ar_start(c.control_rho, c.control_sd, z, rng);
            for (int t = 1; t < L; ++t) x[k][t] = c.control_rho * x[k][t - 1] + c.control_sd * z(rng);
        }
        if (R > 0 && c.regressor_loading != 0.0)
            for (int t = 0; t < L; ++t) x[0][t] += c.regressor_loading * Lam.row(i).dot(F.row(t));
        const std::size_t q = c.noise == NoiseKind::Ma ? c.ma.size() : 0;
        std::vector<double> innov(static_cast<std::size_t>(L) + q);
        for (auto& v : innov) v = sigma * z(rng);
        for (int t = 0; t < L; ++t) {
            double v = innov[static_cast<std::size_t>(t) + q];
            for (std::size_t j = 0; j < q; ++j) v += c.ma[j] * innov[static_cast<std::size_t>(t) + q - 1 - j];
            e[t] = v;
        }
        // Same arithmetic as the regime builder applies to the stored levels.
        for (int t = 1; t < L; ++t) dq[t] = lvl[t] - lvl[t - 1];
        for (int t = 4; t < L; ++t) da[t] = lvl[t] - lvl[t - 4];

        for (int t = 1; t < L; ++t) {
            const int s = t - 1;
            const int s1 = std::max(0, s - 1);
            double mu = out.truth.alpha[static_cast<std::size_t>(i)] + marginal_effect(c, dq[s], da[s]) * p[s] +
                        c.delta2 * p[s1];
            for (std::size_t k = 0; k < K; ++k) mu += c.beta[k] * x[k][s] + c.gamma[k] * x[k][s1];
            double shock = e[t];
            if (c.noise == NoiseKind::Heteroskedastic || c.hetero > 0.0)
                shock *= std::sqrt(1.0 + c.hetero * x[0][s] * x[0][s]);
            if (R > 0) shock += Lam.row(i).dot(F.row(t));
            if (t < B) continue;
            const std::size_t cell = panel.cell(i, t - B);
            dy[cell] = mu + shock;
            out.truth.conditional_mean[cell] = mu;
            out.truth.shock[cell] = shock;
        }
        for (int t = B; t < L; ++t) {
            const std::size_t cell = panel.cell(i, t - B);
            pol[cell] = p[t];
            rate[cell] = lvl[t];
            for (std::size_t k = 0; k < K; ++k) xs[k][cell] = x[k][t];
        }
    }
    panel.set_column("dy", std::move(dy), Transform::Level);
    panel.set_column("p", std::move(pol), Transform::Level);
    for (std::size_t k = 0; k < K; ++k) panel.set_column("x" + std::to_string(k + 1), std::move(xs[k]), Transform::Level);
    panel.set_column(kSimRate, std::move(rate), Transform::Level);
    panel.set_source_rows(std::vector<int>(static_cast<std::size_t>(N), T));
    out.regimes = build_regimes(panel, kSimRate);
    out.panel = std::move(panel);
    if (irf_draws > 0) out.truth.irf = true_irf(c, max_horizon, irf_draws);
    return out;
}

namespace {

McReplication run_replication(const DgpConfig& base, const McOptions& o, const RegimeQuartiles& quartiles, int index) {
    McReplication rep;
    rep.index = index;
    rep.seed = derive_seed(o.seed, static_cast<std::uint64_t>(index) + 1);
    DgpConfig cfg = base;
    cfg.seed = rep.seed;
    try {
        const int max_h = o.horizons.empty() ? 1 : *o.horizons.rbegin();
        SyntheticPanel sp = generate_dgp(cfg, max_h, 0);
        AnalysisOptions ao = o.analysis;
        ao.quartiles = quartiles;
        ao.factor.seed = derive_seed(rep.seed, 0, 5);
        ao.bootstrap_seed = derive_seed(rep.seed, 0, 7);
        ao.threads = 1;
        if (o.fit_models) {
            for (int h : o.horizons) {
                HorizonAnalysis ha = analyze_horizon(sp.panel, sp.regimes, sp.spec, h, ao);
                rep.weights[h] = std::vector<double>(ha.weights.w.data(), ha.weights.w.data() + ha.weights.w.size());
                for (const auto& pt : ha.points) {
                    for (std::size_t m = 0; m < pt.per_model.size(); ++m)
                        rep.irf.push_back({h, pt.regime, ha.candidates.labels[m], pt.per_model[m].value,
                                           pt.per_model[m].se});
                    rep.irf.push_back({h, pt.regime, "avg", pt.value, pt.se});
                }
                if (ha.equality) {
                    const auto& pv = ha.equality->pvalue;
                    rep.reject_rate[h] = pv.empty() ? kMissing : 1.0 - acceptance_proportion(pv, o.alpha);
                }
                if (ha.boot_equality) {
                    const auto& pv = ha.boot_equality->pvalue;
                    rep.reject_rate_boot[h] = pv.empty() ? kMissing : 1.0 - acceptance_proportion(pv, o.alpha);
                }
                const auto& cand = ha.candidates;
                const auto& d = *cand.fits.front().design;
                if (h == 1 && o.identity) {
                    const Eigen::Index T = cand.t_eff();
                    Eigen::VectorXd u(T), mu(T);
                    for (Eigen::Index r = 0; r < T; ++r) {
                        const auto& row = d.rows[static_cast<std::size_t>(r)];
                        const std::size_t cell = sp.panel.cell(row.country, row.period + 1);
                        u[r] = sp.truth.shock[cell];
                        mu[r] = sp.truth.conditional_mean[cell];
                    }
                    const Eigen::VectorXd fitted = d.y - cand.residuals * ha.weights.w;
                    const double Td = static_cast<double>(T);
                    const double loss = (mu - fitted).squaredNorm() / Td;
                    rep.identity = mallows_criterion(ha.weights.w, cand) - u.squaredNorm() / Td - loss;
                }
                if (h == 1 && o.msfe) {
                    DgpConfig fresh = cfg;
                    fresh.alpha = sp.truth.alpha;
                    fresh.seed = derive_seed(rep.seed, 0, 6);
                    SyntheticPanel sp2 = generate_dgp(fresh, 1, 0);
                    Eigen::VectorXd avg;
                    for (std::size_t m = 0; m < cand.fits.size(); ++m) {
                        const auto& f = cand.fits[m];
                        auto d2 = make_design(sp2.panel, sp2.regimes, sp.spec.with_form(f.form()), 1, ao.design);
                        const Eigen::VectorXd yhat = predict(f, *d2);
                        if (avg.size() == 0) avg = Eigen::VectorXd::Zero(yhat.size());
                        if (yhat.size() != avg.size())
                            throw Error("simulation", "SampleMismatch", "fresh-panel designs differ in rows");
                        avg += ha.weights.w[static_cast<Eigen::Index>(m)] * yhat;
                        rep.msfe_models.push_back((d2->y - yhat).squaredNorm() / static_cast<double>(yhat.size()));
                        if (m + 1 == cand.fits.size())
                            rep.msfe_avg = (d2->y - avg).squaredNorm() / static_cast<double>(avg.size());
                    }
                }
            }
        }
        if (o.factor_r_max >= 0) {
            auto design = make_design(sp.panel, sp.regimes, sp.spec, 1, ao.design);
            const auto sel = select_factor_number(design, o.factor_r_max, ao.factor);
            rep.factors_selected = sel.r;
            for (const auto& f : sel.fits)
                for (std::size_t k = 1; k < f.ssr_path.size(); ++k)
                    if (f.ssr_path[k] > f.ssr_path[k - 1]) rep.ssr_monotone = false;
        }
    } catch (const std::exception& e) {
        rep.ok = false;
        rep.error = e.what();
    }
    return rep;
}

}  // namespace

McReport run_monte_carlo(const DgpConfig& config, const McOptions& o) {
    config.validate();
    if (o.replications < 2) throw Error("simulation", "InvalidConfig", "replications must be >= 2");
    if ((o.identity || o.msfe) && !o.horizons.count(1))
        throw Error("simulation", "InvalidConfig", "identity and msfe experiments need horizon 1");
    for (int h : o.horizons)
        if (h < 1 || h > 12) throw Error("simulation", "InvalidConfig", "horizons must lie in 1..12");

    McReport rep;
    rep.config = config;
    rep.config.alpha = draw_alpha(config, o.seed);
    rep.options = o;
    const RegimeQuartiles quartiles = population_quartiles(config);
    if (o.fit_models) {
        DgpConfig tc = rep.config;
        tc.seed = o.seed;
        rep.truth = true_irf(tc, o.horizons.empty() ? 1 : *o.horizons.rbegin(), o.irf_draws);
        for (ModelForm f : o.analysis.forms) rep.labels.push_back(to_string(f));
    }

    rep.reps.resize(static_cast<std::size_t>(o.replications));
    parallel_for(rep.reps.size(), o.threads,
                 [&](std::size_t i) { rep.reps[i] = run_replication(rep.config, o, quartiles, static_cast<int>(i)); });

    std::vector<const McReplication*> ok;
    for (const auto& r : rep.reps)
        if (r.ok) ok.push_back(&r);
        else ++rep.failed;
    rep.failure_rate = static_cast<double>(rep.failed) / o.replications;
    rep.passed = rep.failure_rate <= 0.01;
    const double n = static_cast<double>(ok.size());
    if (ok.empty()) return rep;

    std::map<std::tuple<int, std::string, std::string>, std::vector<const McIrfRow*>> groups;
    for (const auto* r : ok)
        for (const auto& row : r->irf) groups[{row.horizon, row.regime, row.model}].push_back(&row);
    const double zc = stats::normal_quantile(0.95);
    for (const auto& [key, rows] : groups) {
        McSummaryRow s;
        std::tie(s.horizon, s.regime, s.model) = key;
        s.truth = rep.truth.at(s.horizon).at(s.regime);
        std::vector<double> v;
        double sq = 0.0;
        int covered = 0, with_se = 0;
        for (const auto* r : rows) {
            v.push_back(r->value);
            sq += (r->value - s.truth) * (r->value - s.truth);
            if (!is_missing(r->se)) {
                ++with_se;
                if (std::fabs(r->value - s.truth) <= zc * r->se) ++covered;
            }
        }
        s.n = static_cast<int>(v.size());
        s.mean = stats::mean(v);
        s.bias = s.mean - s.truth;
        s.sd = s.n > 1 ? stats::sample_sd(v) : 0.0;
        s.mc_se = s.sd / std::sqrt(static_cast<double>(s.n));
        s.rmse = std::sqrt(sq / s.n);
        if (with_se > 0) s.coverage = static_cast<double>(covered) / with_se;
        rep.irf_summary.push_back(s);
    }

    for (int h : o.fit_models ? o.horizons : std::set<int>{}) {
        std::vector<double> mw;
        for (const auto* r : ok) {
            const auto& w = r->weights.at(h);
            if (mw.empty()) mw.assign(w.size(), 0.0);
            for (std::size_t m = 0; m < w.size(); ++m) mw[m] += w[m] / n;
        }
        rep.mean_weights[h] = mw;
        std::vector<double> rr;
        for (const auto* r : ok)
            if (auto it = r->reject_rate.find(h); it != r->reject_rate.end()) rr.push_back(it->second);
        if (!rr.empty()) rep.rejection[h] = stats::mean(rr);
        std::vector<double> rb;
        for (const auto* r : ok)
            if (auto it = r->reject_rate_boot.find(h); it != r->reject_rate_boot.end()) rb.push_back(it->second);
        if (!rb.empty()) rep.rejection_boot[h] = stats::mean(rb);
    }
    if (o.identity) {
        std::vector<double> v;
        for (const auto* r : ok) v.push_back(r->identity);
        rep.identity_mean = stats::mean(v);
        rep.identity_se = stats::sample_sd(v) / std::sqrt(n);
    }
    if (o.msfe) {
        std::vector<double> a;
        for (const auto* r : ok) a.push_back(r->msfe_avg);
        rep.msfe_avg = stats::mean(a);
        rep.msfe_models.assign(ok.front()->msfe_models.size(), 0.0);
        for (const auto* r : ok)
            for (std::size_t m = 0; m < r->msfe_models.size(); ++m) rep.msfe_models[m] += r->msfe_models[m] / n;
    }
    if (o.factor_r_max >= 0)
        for (const auto* r : ok) {
            ++rep.factor_counts[r->factors_selected];
            rep.ssr_monotone = rep.ssr_monotone && r->ssr_monotone;
        }
    return rep;
}

nlohmann::json to_json(const DgpConfig& c) {
    nlohmann::json j;
    j["true_form"] = to_string(c.true_form);
    j["delta"] = {c.delta1, c.delta2, c.delta3, c.delta4, c.delta5};
    j["beta"] = c.beta;
    j["gamma"] = c.gamma;
    j["alpha"] = c.alpha;
    j["alpha_sd"] = c.alpha_sd;
    j["n_countries"] = c.n_countries;
    j["n_periods"] = c.n_periods;
    j["burn_in"] = c.burn_in;
    j["noise"] = {{"kind", to_string(c.noise)}, {"sigma2", c.sigma2}, {"ma", c.ma}, {"hetero", c.hetero}};
    j["factors"] = {{"r", c.factors},
                    {"loading_scale", c.loading_scale},
                    {"rho", c.factor_rho},
                    {"regressor_loading", c.regressor_loading}};
    j["rate"] = {{"rho", c.rate_rho}, {"sd", c.rate_sd}, {"drift", c.rate_drift}, {"start", c.rate_start}};
    j["policy"] = {{"rho", c.policy_rho}, {"sd", c.policy_sd}};
    j["controls"] = {{"rho", c.control_rho}, {"sd", c.control_sd}};
    j["seed"] = c.seed;
    return j;
}

DgpConfig dgp_from_json(const nlohmann::json& j) {
    DgpConfig c;
    try {
        if (j.contains("true_form")) c.true_form = parse_form(j.at("true_form").get<std::string>());
        if (j.contains("delta")) {
            const auto d = j.at("delta").get<std::vector<double>>();
            double* slots[] = {&c.delta1, &c.delta2, &c.delta3, &c.delta4, &c.delta5};
            if (d.size() > 5) throw Error("simulation", "InvalidConfig", "delta has at most 5 entries");
            for (std::size_t k = 0; k < d.size(); ++k) *slots[k] = d[k];
        }
        auto get = [&](const nlohmann::json& o, const char* key, auto& dst) {
            if (o.contains(key)) dst = o.at(key).get<std::decay_t<decltype(dst)>>();
        };
        get(j, "beta", c.beta);
        get(j, "gamma", c.gamma);
        get(j, "alpha", c.alpha);
        get(j, "alpha_sd", c.alpha_sd);
        get(j, "n_countries", c.n_countries);
        get(j, "n_periods", c.n_periods);
        get(j, "burn_in", c.burn_in);
        get(j, "seed", c.seed);
        if (j.contains("noise")) {
            const auto& n = j.at("noise");
            if (n.contains("kind")) c.noise = parse_noise(n.at("kind").get<std::string>());
            get(n, "sigma2", c.sigma2);
            get(n, "ma", c.ma);
            get(n, "hetero", c.hetero);
        }
        if (j.contains("factors")) {
            const auto& f = j.at("factors");
            get(f, "r", c.factors);
            get(f, "loading_scale", c.loading_scale);
            get(f, "rho", c.factor_rho);
            get(f, "regressor_loading", c.regressor_loading);
        }
        if (j.contains("rate")) {
            const auto& r = j.at("rate");
            get(r, "rho", c.rate_rho);
            get(r, "sd", c.rate_sd);
            get(r, "drift", c.rate_drift);
            get(r, "start", c.rate_start);
        }
        if (j.contains("policy")) {
            get(j.at("policy"), "rho", c.policy_rho);
            get(j.at("policy"), "sd", c.policy_sd);
        }
        if (j.contains("controls")) {
            get(j.at("controls"), "rho", c.control_rho);
            get(j.at("controls"), "sd", c.control_sd);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("simulation", "InvalidConfig", e.what());
    }
    c.validate();
    return c;
}

nlohmann::json to_json(const McReport& r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = to_json(r.config);
    const auto& o = r.options;
    j["options"] = {{"replications", o.replications},
                    {"seed", o.seed},
                    {"horizons", std::vector<int>(o.horizons.begin(), o.horizons.end())},
                    {"identity", o.identity},
                    {"msfe", o.msfe},
                    {"factor_r_max", o.factor_r_max},
                    {"irf_draws", o.irf_draws},
                    {"alpha", o.alpha},
                    {"tests", o.analysis.tests},
                    {"bootstrap", o.analysis.bootstrap}};
    j["failed"] = r.failed;
    j["failure_rate"] = r.failure_rate;
    j["passed"] = r.passed;
    j["labels"] = r.labels;
    auto& reps = j["replications"] = nlohmann::json::array();
    for (const auto& x : r.reps) {
        nlohmann::json e = {{"index", x.index}, {"seed", x.seed}, {"ok", x.ok}};
        if (!x.ok) e["error"] = x.error;
        nlohmann::json w = nlohmann::json::object();
        for (const auto& [h, v] : x.weights) w[std::to_string(h)] = v;
        e["weights"] = w;
        if (!is_missing(x.identity)) e["identity"] = x.identity;
        if (!is_missing(x.msfe_avg)) {
            e["msfe_avg"] = x.msfe_avg;
            e["msfe_models"] = x.msfe_models;
        }
        nlohmann::json rr = nlohmann::json::object();
        for (const auto& [h, v] : x.reject_rate) rr[std::to_string(h)] = v;
        e["reject_rate"] = rr;
        if (!x.reject_rate_boot.empty()) {
            nlohmann::json rb = nlohmann::json::object();
            for (const auto& [h, v] : x.reject_rate_boot) rb[std::to_string(h)] = v;
            e["reject_rate_boot"] = rb;
        }
        if (x.factors_selected >= 0) e["factors_selected"] = x.factors_selected;
        reps.push_back(std::move(e));
    }
    auto& s = j["summary"];
    nlohmann::json truth = nlohmann::json::object();
    for (const auto& [h, m] : r.truth) truth[std::to_string(h)] = m;
    s["truth"] = truth;
    auto& irf = s["irf"] = nlohmann::json::array();
    for (const auto& x : r.irf_summary)
        irf.push_back({{"horizon", x.horizon}, {"regime", x.regime}, {"model", x.model}, {"truth", x.truth},
                       {"mean", x.mean}, {"bias", x.bias}, {"sd", x.sd}, {"mc_se", x.mc_se}, {"rmse", x.rmse},
                       {"coverage", is_missing(x.coverage) ? nlohmann::json() : nlohmann::json(x.coverage)},
                       {"n", x.n}});
    nlohmann::json mw = nlohmann::json::object();
    for (const auto& [h, v] : r.mean_weights) mw[std::to_string(h)] = v;
    s["mean_weights"] = mw;
    if (!is_missing(r.identity_mean)) s["identity"] = {{"mean", r.identity_mean}, {"mc_se", r.identity_se}};
    if (!is_missing(r.msfe_avg)) s["msfe"] = {{"averaged", r.msfe_avg}, {"models", r.msfe_models}};
    nlohmann::json rej = nlohmann::json::object();
    for (const auto& [h, v] : r.rejection) rej[std::to_string(h)] = v;
    s["rejection"] = rej;
    if (!r.rejection_boot.empty()) {
        nlohmann::json rb = nlohmann::json::object();
        for (const auto& [h, v] : r.rejection_boot) rb[std::to_string(h)] = v;
        s["rejection_boot"] = rb;
    }
    nlohmann::json fc = nlohmann::json::object();
    for (const auto& [k, v] : r.factor_counts) fc[std::to_string(k)] = v;
    s["factor_counts"] = fc;
    s["ssr_monotone"] = r.ssr_monotone;
    return j;
}

void write_mc_tables(const McReport& r, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    {
        std::ofstream f(dir / "replications.csv");
        csv::Writer w(f);
        w.row({"replication", "seed", "ok", "identity", "msfe_avg", "factors_selected", "error"});
        for (const auto& x : r.reps)
            w.row({std::to_string(x.index), std::to_string(x.seed), x.ok ? "true" : "false",
                   csv::format_number(x.identity), csv::format_number(x.msfe_avg),
                   x.factors_selected >= 0 ? std::to_string(x.factors_selected) : "", x.error});
    }
    {
        std::ofstream f(dir / "mc_weights.csv");
        csv::Writer w(f);
        w.row({"replication", "horizon", "model", "weight"});
        for (const auto& x : r.reps)
            for (const auto& [h, v] : x.weights)
                for (std::size_t m = 0; m < v.size(); ++m)
                    w.row({std::to_string(x.index), std::to_string(h), r.labels.at(m), csv::format_number(v[m])});
    }
    {
        std::ofstream f(dir / "irf_summary.csv");
        csv::Writer w(f);
        w.row({"horizon", "regime", "model", "truth", "mean", "bias", "sd", "mc_se", "rmse", "coverage", "n"});
        for (const auto& x : r.irf_summary)
            w.row({std::to_string(x.horizon), x.regime, x.model, csv::format_number(x.truth),
                   csv::format_number(x.mean), csv::format_number(x.bias), csv::format_number(x.sd),
                   csv::format_number(x.mc_se), csv::format_number(x.rmse), csv::format_number(x.coverage),
                   std::to_string(x.n)});
    }
}

PanelDataset demo_panel(std::uint64_t seed, int n_countries, int n_periods) {
    static const char* kNames[] = {"AT", "BE", "DE", "ES", "FI", "FR", "GR", "IE", "IT", "NL", "PT",
                                   "CY", "EE", "LU", "LV", "MT", "SI", "SK"};
    if (n_countries < 1 || n_countries > 18) throw Error("simulation", "InvalidConfig", "demo supports 1..18 countries");
    if (n_periods < 20) throw Error("simulation", "InvalidConfig", "demo needs at least 20 quarters");
    std::vector<std::string> names(kNames, kNames + n_countries);
    PanelDataset panel(names, Period{1985, 1}, n_periods);
    const std::size_t cells = static_cast<std::size_t>(n_countries) * n_periods;
    std::vector<double> gdp(cells), cpi(cells), reer(cells), unemp(cells), rate(cells), rr(cells), almp(cells), epl(cells);
    std::normal_distribution<double> z;
    for (int i = 0; i < n_countries; ++i) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i) + 1));
        double lg = std::log(100.0), lp = std::log(100.0), le = std::log(100.0), lu = std::log(8.0 + i % 4);
        double r = 6.0 + 0.5 * (i % 3), dr = 0.0;
        double lrr = std::log(50.0 + i), la = std::log(20.0 + 2 * i), lepl = std::log(2.0 + 0.1 * i);
        double g = 0.5, infl = 0.6, da = 0.0, drr = 0.0;
        const int burn = 40;
        for (int t = -burn; t < n_periods; ++t) {
            const double ind = dr < 0.0 ? 1.0 : 0.0;
            dr = 0.3 * dr - 0.02 * (r - 3.0) + 0.35 * z(rng);
            r += dr;
            const double da_new = 0.4 * da + 2.0 * z(rng);
            const double drr_new = 0.3 * drr + 1.0 * z(rng);
            g = 0.45 + 0.3 * (g - 0.45) + (0.03 + 0.02 * ind) * da + 0.01 * drr - 0.05 * dr + 0.6 * z(rng);
            infl = 0.5 + 0.5 * (infl - 0.5) + 0.08 * g + 0.3 * z(rng);
            da = da_new;
            drr = drr_new;
            lg += g / 100.0;
            lp += infl / 100.0;
            le += (0.2 * z(rng) + 0.1 * (infl - 0.5)) / 100.0;
            lu += (-0.8 * (g - 0.45) + 1.5 * z(rng)) / 100.0;
            la += da / 100.0;
            lrr += drr / 100.0;
            if (rng() % 16 == 0) lepl += 0.05 * z(rng);
            if (t < 0) continue;
            const std::size_t k = panel.cell(i, t);
            gdp[k] = std::exp(lg);
            cpi[k] = std::exp(lp);
            reer[k] = std::exp(le);
            unemp[k] = std::exp(lu);
            rate[k] = r;
            rr[k] = std::exp(lrr);
            almp[k] = std::exp(la);
            epl[k] = std::exp(lepl);
        }
    }
    panel.set_column("gdp", std::move(gdp), Transform::Level);
    panel.set_column("cpi", std::move(cpi), Transform::Level);
    panel.set_column("reer", std::move(reer), Transform::Level);
    panel.set_column("unemployment", std::move(unemp), Transform::Level);
    panel.set_column("short_rate", std::move(rate), Transform::Level);
    panel.set_column("rr", std::move(rr), Transform::Level);
    panel.set_column("almp", std::move(almp), Transform::Level);
    panel.set_column("epl", std::move(epl), Transform::Level);
    panel.set_source_rows(std::vector<int>(static_cast<std::size_t>(n_countries), n_periods));
    return panel;
}

}  // namespace lpma
