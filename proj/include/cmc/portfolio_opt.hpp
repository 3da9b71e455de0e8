#pragma once

// Mean-CVaR portfolio selection over a menu of tranche return
// distributions, solved through the Rockafellar-Uryasev linear program on
// the scenario losses.

#include <span>
#include <string>
#include <vector>

#include "cmc/lp.hpp"

namespace cmc {

struct CvarProblem {
    int n_scenarios = 0;
    int n_assets = 0;
    std::vector<double> returns; // n_scenarios x n_assets, row-major
    double target_mean = 0.0;
    std::vector<double> lower; // per-asset weight bounds
    std::vector<double> upper;
    double alpha = 0.9;

    double ret(int scenario, int asset) const {
        return returns[static_cast<std::size_t>(scenario) * n_assets + asset];
    }
};

// Exact RU linearization. Variables (w_1..w_d, a, z_1..z_n); objective
// a + 1/((1-alpha) n) sum z_s; rows: mean >= mu, sum w = 1, then one
// z_s >= loss_s(w) - a row per scenario. Throws Infeasible when the weight
// bounds cannot satisfy the budget constraint.
LinearProgram build_lp(const CvarProblem& problem);

struct CvarSolution {
    std::vector<double> weights;
    double achieved_mean = 0.0;
    double var = 0.0;  // portfolio loss VaR_alpha
    double cvar = 0.0; // portfolio loss CVaR_alpha
    double lp_objective = 0.0;
    double optimality_gap = 0.0; // |lp_objective - recomputed CVaR|
    std::string status;
};

// Solves the mean-CVaR program. Small scenario counts go through the full
// LP; large ones use exact delayed row generation over the scenario
// constraints (the master LPs stay dense-solver sized). Throws Infeasible /
// Unbounded when the LP is.
CvarSolution optimize_portfolio(const CvarProblem& problem);

struct FrontierPoint {
    double target_mean = 0.0;
    bool feasible = false;
    CvarSolution solution; // valid when feasible
    std::string note;      // failure reason otherwise
};

// Re-solves along a grid of target means; infeasible points are recorded
// and the sweep continues.
std::vector<FrontierPoint> efficient_frontier(const CvarProblem& problem,
                                              std::span<const double> mean_grid);

} // namespace cmc
