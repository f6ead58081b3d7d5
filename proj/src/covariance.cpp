#include "lpma/covariance.hpp"

#include <algorithm>

#include "lpma/error.hpp"

namespace lpma {

int max_rows_per_country(std::span<const RowId> rows) {
    int best = 0, run = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        run = (r > 0 && rows[r].country == rows[r - 1].country) ? run + 1 : 1;
        best = std::max(best, run);
    }
    return best;
}

Eigen::MatrixXd kernel_crossproduct(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, std::span<const RowId> rows,
                                    int bandwidth) {
    if (bandwidth < 0) throw Error("inference", "InvalidBandwidth", "bandwidth must be >= 0");
    if (a.rows() != static_cast<Eigen::Index>(rows.size()) || b.rows() != a.rows())
        throw Error("inference", "DimensionMismatch", "score rows do not match row identifiers");
    Eigen::MatrixXd out = a.transpose() * b;
    if (bandwidth == 0) return out;

    std::vector<Eigen::Index> lead, lag;
    for (int ell = 1; ell <= bandwidth; ++ell) {
        lead.clear();
        lag.clear();
        // Rows are sorted by (country, period); walk a second pointer ell quarters behind.
        std::size_t j = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            const int want = rows[i].period - ell;
            while (j < i && (rows[j].country < rows[i].country ||
                             (rows[j].country == rows[i].country && rows[j].period < want)))
                ++j;
            if (j < i && rows[j].country == rows[i].country && rows[j].period == want) {
                lead.push_back(static_cast<Eigen::Index>(i));
                lag.push_back(static_cast<Eigen::Index>(j));
            }
        }
        if (lead.empty()) continue;
        const double w = 1.0 - static_cast<double>(ell) / static_cast<double>(bandwidth + 1);
        const Eigen::MatrixXd gamma = a(lead, Eigen::all).transpose() * b(lag, Eigen::all) +
                                      a(lag, Eigen::all).transpose() * b(lead, Eigen::all);
        out += w * gamma;
    }
    return out;
}

Eigen::MatrixXd influence(const HorizonFit& fit) {
    const auto& X = fit.design->X;
    return (X.array().colwise() * fit.residuals.array()).matrix() * fit.bread;
}

Eigen::MatrixXd psd_floor(const Eigen::MatrixXd& m) {
    const Eigen::MatrixXd s = 0.5 * (m + m.transpose());
    if (s.rows() == 0) return s;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.eigenvalues().minCoeff() >= 0.0) return s;
    const Eigen::VectorXd ev = eig.eigenvalues().cwiseMax(0.0);
    return eig.eigenvectors() * ev.asDiagonal() * eig.eigenvectors().transpose();
}

Eigen::MatrixXd robust_cov_matrix(const DesignMatrix& design, const Eigen::VectorXd& residuals,
                                  const Eigen::MatrixXd& bread, int bandwidth) {
    if (bandwidth < 0) throw Error("inference", "InvalidBandwidth", "bandwidth must be >= 0");
    if (bandwidth > 0 && bandwidth >= max_rows_per_country(design.rows))
        throw Error("inference", "BandwidthExceedsSample",
                    "bandwidth " + std::to_string(bandwidth) + " but at most " +
                        std::to_string(max_rows_per_country(design.rows)) + " rows per country");
    const Eigen::MatrixXd scores = (design.X.array().colwise() * residuals.array()).matrix();
    const Eigen::MatrixXd meat = kernel_crossproduct(scores, design.rows, bandwidth);
    return psd_floor(bread * meat * bread);
}

RobustCov robust_cov(const HorizonFit& fit, int bandwidth) {
    RobustCov out;
    for (const auto& c : fit.design->columns) out.names.push_back(c.name);
    out.matrix = robust_cov_matrix(*fit.design, fit.residuals, fit.bread, bandwidth);
    out.bandwidth = bandwidth;
    return out;
}

double RobustCov::at(const std::string& a, const std::string& b) const {
    auto ia = std::find(names.begin(), names.end(), a);
    auto ib = std::find(names.begin(), names.end(), b);
    if (ia == names.end() || ib == names.end())
        throw Error("inference", "UnknownCoefficient", "'" + (ia == names.end() ? a : b) + "'");
    return matrix(ia - names.begin(), ib - names.begin());
}

}  // namespace lpma
