#pragma once

#include <array>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "lpma/mallows.hpp"
#include "lpma/projection.hpp"

namespace lpma {

inline constexpr double kDefaultAlpha = 0.1;

enum class Adjustment { Bonferroni, Holm, BenjaminiYekutieli };
inline constexpr std::array<Adjustment, 3> kAdjustments{Adjustment::Bonferroni, Adjustment::Holm,
                                                        Adjustment::BenjaminiYekutieli};
const char* to_string(Adjustment a) noexcept;
Adjustment parse_adjustment(const std::string& text);

std::vector<double> adjust_pvalues(std::span<const double> p, Adjustment method);

// Fraction of p-values strictly above alpha.
double acceptance_proportion(std::span<const double> p, double alpha = kDefaultAlpha);

struct IrfVerdict {
    bool different = false;      // rejections in a strict majority of horizons
    bool any_rejection = false;
    int rejections = 0;
    int horizons = 0;
};

IrfVerdict irf_verdict(std::span<const double> adjusted, double alpha = kDefaultAlpha);

// Per-(i,t) test results at one horizon. `estimate` is the averaged marginal
// effect at the row's regime values, `reference` the baseline delta1 (0 for
// the zero test).
struct PointTests {
    int horizon = 0;
    std::vector<RowId> points;
    std::vector<double> estimate, reference, se, stat, pvalue;
};

// H0: averaged effect at (i,t) equals the baseline delta1. The standard error
// comes from the stacked influence of every candidate model and the baseline
// on the common sample, weights held fixed.
PointTests equality_test(const CandidateSet& cand, const Eigen::VectorXd& w, const HorizonFit& baseline);
// H0: averaged effect at (i,t) is zero.
PointTests zero_test(const CandidateSet& cand, const Eigen::VectorXd& w);

struct HorizonSummary {
    int horizon = 0;
    int points = 0;
    double prop_accept = 0.0;
    double raw_p_median = 0.0;
    std::map<Adjustment, double> adj_reject_frac;
};

struct VerdictSummary {
    double different_frac = 0.0;     // share of points with a majority of adjusted rejections
    double any_rejection_frac = 0.0;
    bool different = false;          // strict majority of points are different
};

struct TestReport {
    std::string outcome, policy, window;
    double alpha = kDefaultAlpha;
    int common_points = 0;  // points observed at every horizon
    std::vector<HorizonSummary> horizons;
    std::map<Adjustment, VerdictSummary> verdicts;
};

// Adjusts across horizons within each (i,t) point observed at all horizons;
// acceptance proportions use every point at each horizon.
TestReport build_test_report(const std::map<int, PointTests>& by_horizon, double alpha = kDefaultAlpha);

void write_tests_csv(std::ostream& out, const std::vector<TestReport>& reports, bool header = true);

}  // namespace lpma
