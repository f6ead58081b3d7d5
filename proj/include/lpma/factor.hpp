#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpma/mallows.hpp"
#include "lpma/projection.hpp"

namespace lpma {

struct FactorOptions {
    int max_iterations = 500;
    double tolerance = 1e-9;  // relative SSR change
    int random_starts = 5;
    std::uint64_t seed = 0;
    bool strict_balance = false;  // throw Unbalanced instead of dropping cells
    unsigned threads = 1;
};

struct FactorFit {
    HorizonFit fit;           // coefficients and defactored residuals, given F
    Eigen::MatrixXd factors;  // T x r, F'F/T = I
    Eigen::MatrixXd loadings; // N x r, L'L diagonal
    int r = 0;
    double ssr = 0.0;
    std::vector<double> ssr_path;
    int iterations = 0;
    bool converged = true;
    int best_start = 0;  // 0 is the principal-components start
    std::vector<std::string> dropped_cells;  // "country period" removed to balance the panel

    int n_countries() const noexcept { return static_cast<int>(loadings.rows()); }
    int n_periods() const noexcept { return static_cast<int>(factors.rows()); }
    int dim() const noexcept { return fit.dim() + r; }
};

// Restrict a design to the periods every represented country observes.
// Returns the balanced design and the removed cells.
std::shared_ptr<const DesignMatrix> balance_design(const DesignMatrix& design, std::vector<std::string>* dropped,
                                                   bool strict = false);

// y_it = x_it'b + l_i'f_t + e_it by alternating least squares and principal
// components, best of several starts. r = 0 is the ordinary fit.
FactorFit estimate_interactive(std::shared_ptr<const DesignMatrix> design, int r, const FactorOptions& options = {});

// IC_p1 = ln(SSR/NT) + r (N+T)/(NT) ln(NT/(N+T)).
double bai_ng_icp1(double ssr, int n, int t, int r);

struct FactorSelection {
    int r = 0;
    std::vector<double> criterion;  // by r = 0..r_max
    std::vector<FactorFit> fits;
};

FactorSelection select_factor_number(std::shared_ptr<const DesignMatrix> design, int r_max,
                                     const FactorOptions& options = {});

// Candidate set on defactored residuals; dims count r factor columns.
CandidateSet make_factor_candidate_set(std::vector<FactorFit> fits);

struct FactorDiagnostic {
    int horizon = 0;
    std::string model;
    int r = 0;
    double ssr = 0.0;
    int iterations = 0;
    bool converged = true;
};

struct FactorAveraging {
    std::map<int, MallowsWeights> weights;
    AveragedIrf irf;
    std::vector<FactorDiagnostic> diagnostics;
    std::map<int, CandidateSet> candidates;
};

// Per horizon: select r for each candidate design (or use `fixed_r` when
// >= 0), then weight and average as in the factor-free pipeline.
FactorAveraging averaged_irf_with_factors(
    const std::map<int, std::vector<std::shared_ptr<const DesignMatrix>>>& designs, const RegimeQuartiles& q,
    int r_max, int fixed_r = -1, const FactorOptions& options = {});

void write_factor_diagnostics_csv(std::ostream& out, const std::vector<FactorDiagnostic>& rows, bool header = true);

}  // namespace lpma
