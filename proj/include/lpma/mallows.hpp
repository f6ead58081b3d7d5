#pragma once

#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpma/projection.hpp"

namespace lpma {

// Candidate models fitted on one common sample at one horizon.
struct CandidateSet {
    int horizon = 0;
    std::vector<std::string> labels;
    std::vector<HorizonFit> fits;  // empty when built from raw residuals
    Eigen::MatrixXd residuals;     // T_eff x M
    Eigen::VectorXd dims;
    double sigma2_hat = 0.0;
    int largest = 0;  // index of the model sigma2_hat comes from
    bool degenerate = false;

    int t_eff() const noexcept { return static_cast<int>(residuals.rows()); }
    int size() const noexcept { return static_cast<int>(residuals.cols()); }
};

struct Sigma2Estimate {
    double value = 0.0;
    bool degenerate = false;  // zero residual variance: the penalty vanishes
};

// (T_eff - dim)^{-1} sum u_t^2 of the given fit.
Sigma2Estimate estimate_sigma2(const Eigen::VectorXd& residuals, int dim);
Sigma2Estimate estimate_sigma2(const HorizonFit& largest_fit);

// Index of the largest model: most columns, ties resolved toward the later
// (more interaction terms) entry.
int largest_model(const Eigen::VectorXd& dims);

CandidateSet make_candidate_set(std::vector<HorizonFit> fits);
CandidateSet make_candidate_set(Eigen::MatrixXd residuals, Eigen::VectorXd dims, double sigma2_hat,
                                std::vector<std::string> labels = {});

// C_T(w) = (1/T) sum_t (sum_m w_m u_tm)^2 + (2 sigma2/T) sum_m w_m dim_m,
// held as w'Hw + c'w.
struct QuadraticCriterion {
    Eigen::MatrixXd H;
    Eigen::VectorXd c;
    double operator()(const Eigen::VectorXd& w) const { return w.dot(H * w) + c.dot(w); }
};

QuadraticCriterion mallows_quadratic(const CandidateSet& cand);
double mallows_criterion(const Eigen::VectorXd& w, const CandidateSet& cand);

enum class WeightSolver { ActiveSetEnumeration, ProjectedGradient };
const char* to_string(WeightSolver s) noexcept;

struct SimplexSolution {
    Eigen::VectorXd w;
    double value = 0.0;
    WeightSolver solver = WeightSolver::ActiveSetEnumeration;
    std::vector<std::string> diagnostics;
    int iterations = 0;
};

inline constexpr int kEnumerationLimit = 8;

// Exact minimizer of w'Hw + c'w over the probability simplex. Up to
// `enumeration_limit` models every support is solved through its KKT system;
// above it, accelerated projected gradient runs to a 1e-10 duality gap.
// `tie_dims` orders supports with equal objective (smaller total first).
SimplexSolution minimize_on_simplex(const Eigen::MatrixXd& H, const Eigen::VectorXd& c, const Eigen::VectorXd& tie_dims,
                                    int enumeration_limit = kEnumerationLimit);

// Euclidean projection onto the probability simplex.
Eigen::VectorXd project_to_simplex(const Eigen::VectorXd& v);

enum class WeightCriterion { Mallows, Cv1 };

struct MallowsWeights {
    int horizon = 0;
    std::vector<std::string> labels;
    Eigen::VectorXd w;
    double criterion_value = 0.0;
    std::vector<int> active_set;
    WeightSolver solver = WeightSolver::ActiveSetEnumeration;
    WeightCriterion criterion = WeightCriterion::Mallows;
    std::vector<std::string> diagnostics;
};

MallowsWeights solve_weights(const CandidateSet& cand, WeightCriterion criterion = WeightCriterion::Mallows,
                             int enumeration_limit = kEnumerationLimit);

// Leave-one-out residuals u_t / (1 - h_tt), T_eff x M.
Eigen::MatrixXd loo_residuals(const CandidateSet& cand);
double cv1_criterion(const Eigen::VectorXd& w, const CandidateSet& cand);
double cv1_criterion(const Eigen::VectorXd& w, const Eigen::MatrixXd& loo);

struct AveragedPoint {
    int horizon = 0;
    std::string regime;
    double value = 0.0;
    double se = kMissing;       // conditional on the weights
    double boot_se = kMissing;  // country-block bootstrap, when requested
    std::vector<IrfPoint> per_model;
};

struct AveragedIrf {
    std::vector<std::string> labels;
    std::vector<AveragedPoint> points;  // ordered by (horizon, regime)
};

// Convex combination of per-model points (one vector per horizon, one entry
// per model, identical regime labels). Standard errors are left missing.
AveragedPoint average_points(const MallowsWeights& w, const std::vector<IrfPoint>& per_model);
AveragedIrf averaged_irf(const std::map<int, MallowsWeights>& weights,
                         const std::map<int, std::vector<std::vector<IrfPoint>>>& points);

// Standard error of sum_m w_m g_m'b_m from the stacked per-row influence of
// every model's coefficients, weights held fixed.
double averaged_se(const CandidateSet& cand, const Eigen::VectorXd& w,
                   const std::vector<RegimeDescriptor>& per_model_regime);

// Loosening and tightening averages with conditional standard errors.
std::vector<AveragedPoint> average_horizon(const CandidateSet& cand, const MallowsWeights& w,
                                           const RegimeQuartiles& q);

}  // namespace lpma
