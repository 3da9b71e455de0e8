#pragma once

// Maximum likelihood estimation of the coupling matrix Q and the tendency
// distribution from rating-history panels, with the transition matrix P
// taken as given (estimated separately by counting).

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cmc/types.hpp"

namespace cmc {

// Observed (or synthetic) panel of rating classes. ratings(firm, t) with
// firm 0-based and t in 1..n_periods; 0 marks a masked (unrated) cell.
struct RatingPanel {
    int n_firms = 0;
    int n_periods = 0;
    int m_nondefault = 0;
    int n_sectors = 0;
    std::vector<int> ratings; // n_firms * n_periods, 0 = masked
    std::vector<int> sectors; // n_firms, 1-based
    std::vector<std::string> firm_ids;

    int at(int firm, int t) const { return ratings[static_cast<std::size_t>(firm) * n_periods + (t - 1)]; }
    void set(int firm, int t, int rating) {
        ratings[static_cast<std::size_t>(firm) * n_periods + (t - 1)] = rating;
    }
    bool masked(int firm, int t) const { return at(firm, t) == 0; }
};

// Entry ranges, sector ranges, absorption of the default class.
std::vector<std::string> validate_panel(const RatingPanel& panel);

// I^t(s, m1, m2): number of firms in sector s moving from class m1 to m2
// in period t (t = 2..n_periods; transitions with a masked endpoint are
// excluded).
class TransitionCounts {
  public:
    TransitionCounts() = default;
    TransitionCounts(int n_periods, int m_nondefault, int n_sectors);

    int n_periods() const { return t_; }
    int m_nondefault() const { return m_; }
    int n_sectors() const { return s_; }

    long long at(int t, int s, int m1, int m2) const { return counts_[index(t, s, m1, m2)]; }
    void add(int t, int s, int m1, int m2, long long n = 1) { counts_[index(t, s, m1, m2)] += n; }

    long long aggregate(int m1, int m2) const; // over t and s
    long long row_total(int m1) const;         // over t, s, m2
    long long cell_total(int m1, int s) const; // over t, m2; identifiability of q_{m1,s}
    long long total() const;

  private:
    std::size_t index(int t, int s, int m1, int m2) const {
        return ((static_cast<std::size_t>(t - 2) * s_ + (s - 1)) * m_ + (m1 - 1)) * (m_ + 1) +
               (m2 - 1);
    }
    int t_ = 0, m_ = 0, s_ = 0;
    std::vector<long long> counts_;
};

TransitionCounts count_transitions(const RatingPanel& panel);

// Row-wise relative frequencies. Throws EmptyRow when a non-default class
// has no outgoing observations.
TransitionMatrix estimate_transition_matrix(const TransitionCounts& counts);

// Log of the modified likelihood factor f' for one (t, s, m1, m2) group
// given the tendency bit of class m1. Returns 0 when the group is empty;
// returns -infinity when the parameters give the observed group
// probability 0 (q = 0 on an idiosyncratic-only move).
double group_factor(const TransitionCounts& counts, int t, int s, int m1, int m2,
                    int chi_bit_m1, const CouplingMatrix& q, const TransitionMatrix& p);

// Modified log-likelihood L' (the likelihood with the constant product of
// p_{m1,m2}^I factors dropped). Periods combine over tendency vectors with
// log-sum-exp. Returns -infinity when the panel is impossible under params.
double log_likelihood(const RatingPanel& panel, const ModelParams& params);
double log_likelihood(const TransitionCounts& counts, const ModelParams& params);

// Projects a raw nonnegative weight vector onto the constraint set
// {mass >= 0, sum = 1, marginal_i = p_plus_i} by clipping followed by
// iterative proportional scaling. Feasible inputs are returned unchanged.
TendencyDistribution repair_tendency(std::span<const double> raw, std::span<const double> p_plus,
                                     double tol = 1e-8, int max_sweeps = 500);

struct OptimizerConfig {
    int population = 60;     // differential evolution population size
    int iterations = 600;    // generations per restart
    int restarts = 2;
    std::uint64_t seed = 1;
    double penalty_weight = 1e6; // applied to residual constraint violation
    double tolerance = 1e-10;    // convergence tolerance on the objective
};

struct EstimationResult {
    ModelParams params;  // fitted Q and chi; P as supplied
    double loglik = 0.0; // L' at the optimum

    // diagnostics
    long long evaluations = 0;
    int iterations_used = 0;
    int restarts_used = 0;
    double constraint_residual = 0.0;
    std::vector<std::pair<int, int>> unidentified; // (m, s) cells with no observed transitions
    bool budget_exhausted = false;
    std::vector<double> best_trace; // best objective per generation, nondecreasing
};

// Maximizes L' over Q in [0,1]^(M*S) and the tendency distribution subject
// to its marginal constraints. Deterministic for a given config.seed; the
// best value seen is returned even when the budget runs out.
EstimationResult estimate_parameters(const RatingPanel& panel, const TransitionMatrix& p,
                                     const OptimizerConfig& config);

std::string estimation_result_to_json(const EstimationResult& result);

} // namespace cmc
