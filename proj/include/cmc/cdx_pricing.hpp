#pragma once

// CDX tranche cashflows per scenario, fair-spread calibration and
// loss-distribution statistics. All quantities are viewed from the risk
// buyer's side of the funded contract: positive returns are profits.

#include <span>
#include <string>
#include <vector>

#include "cmc/simulation.hpp"

namespace cmc {

struct CdxTranche {
    std::string name;
    std::vector<int> members; // 0-based firm indices into the scenario set
    double attach = 0.0;      // alpha in [0,1)
    double detach = 0.0;      // beta in (0,1], attach < detach
    double spread = 0.0;      // per-year rate
    int maturity = 0;         // whole years
    double recovery = 0.0;    // fraction recovered on default
    double notional0 = 1.0;   // N(C,0)
    double upfront = 0.0;     // optional upfront payment fraction of N(C,0)
};

// Per-period risk-free rates i_t and discount factors r_t, t = 1..horizon.
struct RateCurve {
    std::vector<double> rates;
    std::vector<double> discounts;

    int horizon() const { return static_cast<int>(rates.size()); }

    // Flat rate; discounts compound the same rate unless a separate
    // discount rate is given.
    static RateCurve flat(double rate, int horizon);
    static RateCurve flat(double rate, double discount_rate, int horizon);
};

std::vector<std::string> validate_curve(const RateCurve& curve);
std::vector<std::string> validate_tranche(const CdxTranche& tranche, int n_firms);

// L_C^t = D_t / |A_C|.
double loss_fraction(int defaults, const CdxTranche& tranche);

// Remaining tranche notional N(C,t) given the index loss fraction:
// N(C,0) below the attachment point, zero above the detachment point,
// linear in between.
double tranche_notional(const CdxTranche& tranche, double loss_frac);

// Discounted return of one scenario. default_path holds cumulative default
// counts among the tranche members for t = 0..>=maturity.
double discounted_return(const CdxTranche& tranche, std::span<const int> default_path,
                         const RateCurve& curve);

struct ReturnDistribution {
    std::vector<double> returns; // one per scenario, equally weighted
};

ReturnDistribution scenario_returns(const CdxTranche& tranche, const ScenarioSet& set,
                                    const RateCurve& curve);

double expected_return(const CdxTranche& tranche, const ScenarioSet& set,
                       const RateCurve& curve);

// Spread S* with E[R(C)] = 0, found by bisection on a geometrically
// expanded bracket around [-1, 1]. Throws NoBracket when the tranche is
// wiped out at t = 1 in every scenario (the spread does not matter then).
double fair_spread(const CdxTranche& tranche, const ScenarioSet& set, const RateCurve& curve,
                   double tol = 1e-8);

struct HistogramBin {
    double left = 0.0;
    double right = 0.0;
    long long count = 0;
};

struct RiskStats {
    double mean = 0.0; // mean loss
    double var = 0.0;  // VaR_alpha of the loss
    double cvar = 0.0; // CVaR_alpha of the loss
    std::vector<HistogramBin> histogram;
};

// Statistics of the loss variable (negated return). The quantile is the
// left-closed generalized inverse F^-1(x) = inf{t : F(t) >= x}; CVaR is
// the Rockafellar-Uryasev tail expectation, attained at a = VaR for
// empirical distributions.
RiskStats risk_stats(const ReturnDistribution& dist, double alpha, int bins = 50);

double empirical_var(std::span<const double> losses, double alpha);
double empirical_cvar(std::span<const double> losses, double alpha);

std::string risk_stats_to_json(const RiskStats& stats, double alpha);
void write_histogram_csv(const RiskStats& stats, std::ostream& out);

} // namespace cmc
