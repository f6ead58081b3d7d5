#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lpma/projection.hpp"

namespace lpma {

// Bartlett-weighted long-run cross-product of score columns, computed within
// each country up to `bandwidth` quarters and summed across countries:
//   sum_i sum_{t,s} (1 - |t-s|/(L+1))_+ a_{it} b_{is}'.
// Rows must be sorted by (country, period).
Eigen::MatrixXd kernel_crossproduct(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::span<const RowId> rows,
                                    int bandwidth);
inline Eigen::MatrixXd kernel_crossproduct(const Eigen::MatrixXd& scores, std::span<const RowId> rows, int bandwidth) {
    return kernel_crossproduct(scores, scores, rows, bandwidth);
}

// Per-row influence of the coefficient vector: row t = u_t x_t' (X'X)^{-1}.
Eigen::MatrixXd influence(const HorizonFit& fit);

struct RobustCov {
    std::vector<std::string> names;
    Eigen::MatrixXd matrix;
    int bandwidth = 0;

    double at(const std::string& a, const std::string& b) const;
};

// Panel Newey-West sandwich; bandwidth 0 is White's estimator.
RobustCov robust_cov(const HorizonFit& fit, int bandwidth);
Eigen::MatrixXd robust_cov_matrix(const DesignMatrix& design, const Eigen::VectorXd& residuals,
                                  const Eigen::MatrixXd& bread, int bandwidth);

// Symmetrize and floor negative eigenvalues at zero.
Eigen::MatrixXd psd_floor(const Eigen::MatrixXd& m);

int max_rows_per_country(std::span<const RowId> rows);

}  // namespace lpma
