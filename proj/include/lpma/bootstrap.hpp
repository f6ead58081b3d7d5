#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "lpma/inference.hpp"
#include "lpma/mallows.hpp"

namespace lpma {

inline constexpr int kDefaultBootstrapDraws = 199;

struct BootstrapOptions {
    int draws = kDefaultBootstrapDraws;
    std::uint64_t seed = 0;
    WeightCriterion criterion = WeightCriterion::Mallows;
    unsigned threads = 1;
};

// Country-block bootstrap: countries are drawn with replacement and every
// candidate model, the weights and the baseline are refitted on each draw.
// Fixed-effect columns are partialled out within each country, so a draw
// only sums per-country moment blocks.
struct BootstrapDraws {
    Eigen::MatrixXd weights;             // draws x M
    std::vector<Eigen::MatrixXd> coef;   // per model, draws x dim; fixed-effect entries are zero
    Eigen::VectorXd baseline;            // policy coefficient per draw, empty without a baseline
    std::vector<char> ok;                // draws whose weights could be solved
    int failed = 0;

    int draws() const noexcept { return static_cast<int>(weights.rows()); }
};

BootstrapDraws bootstrap_candidates(const CandidateSet& cand, const HorizonFit* baseline, const BootstrapOptions& options);

// Country indices drawn for bootstrap replicate `draw`.
std::vector<int> bootstrap_picks(std::uint64_t seed, int draw, int n_countries);

// Fills boot_se of the loosening/tightening averages from the draws.
void bootstrap_points(std::vector<AveragedPoint>& points, const CandidateSet& cand, const BootstrapDraws& draws,
                      const RegimeQuartiles& q);

// Equality test whose standard error is the spread of the refitted
// difference across draws, so weight uncertainty is included.
PointTests bootstrap_equality_test(const CandidateSet& cand, const Eigen::VectorXd& w, const HorizonFit& baseline,
                                   const BootstrapDraws& draws);

}  // namespace lpma
