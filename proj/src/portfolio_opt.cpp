#include "cmc/portfolio_opt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "cmc/cdx_pricing.hpp"
#include "cmc/errors.hpp"

namespace cmc {

namespace {

void check_problem(const CvarProblem& p) {
    if (p.n_scenarios < 1 || p.n_assets < 1)
        throw std::invalid_argument("CvarProblem: need at least one scenario and one asset");
    if (p.returns.size() != static_cast<std::size_t>(p.n_scenarios) * p.n_assets)
        throw std::invalid_argument("CvarProblem: return matrix size mismatch");
    if (static_cast<int>(p.lower.size()) != p.n_assets ||
        static_cast<int>(p.upper.size()) != p.n_assets)
        throw std::invalid_argument("CvarProblem: bounds size mismatch");
    if (!(p.alpha > 0.0 && p.alpha < 1.0))
        throw std::invalid_argument("CvarProblem: alpha outside (0,1)");
    double lo_sum = 0.0, hi_sum = 0.0;
    for (int i = 0; i < p.n_assets; ++i) {
        if (p.lower[i] > p.upper[i])
            throw Infeasible("CvarProblem: lower bound above upper bound for asset " +
                             std::to_string(i));
        lo_sum += p.lower[i];
        hi_sum += p.upper[i];
    }
    if (lo_sum > 1.0 + 1e-12 || hi_sum < 1.0 - 1e-12)
        throw Infeasible("CvarProblem: weight bounds cannot satisfy the budget constraint");
}

std::vector<double> asset_means(const CvarProblem& p) {
    std::vector<double> mu(p.n_assets, 0.0);
    for (int s = 0; s < p.n_scenarios; ++s)
        for (int i = 0; i < p.n_assets; ++i)
            mu[i] += p.ret(s, i);
    for (double& v : mu)
        v /= p.n_scenarios;
    return mu;
}

// Same LP as build_lp but restricted to a subset of scenario rows; used by
// the row-generation loop. The z variables of omitted scenarios are simply
// absent (they would sit at zero).
LinearProgram build_lp_subset(const CvarProblem& p, std::span<const int> scenarios) {
    const int d = p.n_assets;
    const int n = static_cast<int>(scenarios.size());
    const double tail_weight = 1.0 / ((1.0 - p.alpha) * p.n_scenarios);

    LinearProgram lp;
    lp.n_vars = d + 1 + n;
    lp.objective.assign(lp.n_vars, 0.0);
    lp.objective[d] = 1.0; // the CVaR auxiliary a
    for (int k = 0; k < n; ++k)
        lp.objective[d + 1 + k] = tail_weight;

    lp.lower.assign(lp.n_vars, 0.0);
    lp.upper.assign(lp.n_vars, LinearProgram::kInf);
    for (int i = 0; i < d; ++i) {
        lp.lower[i] = p.lower[i];
        lp.upper[i] = p.upper[i];
    }
    lp.lower[d] = -LinearProgram::kInf; // a is free

    const auto mu = asset_means(p);
    LpRow mean_row;
    mean_row.rel = Relation::GreaterEq;
    mean_row.rhs = p.target_mean;
    for (int i = 0; i < d; ++i)
        mean_row.coeffs.emplace_back(i, mu[i]);
    lp.rows.push_back(std::move(mean_row));

    LpRow budget;
    budget.rel = Relation::Eq;
    budget.rhs = 1.0;
    for (int i = 0; i < d; ++i)
        budget.coeffs.emplace_back(i, 1.0);
    lp.rows.push_back(std::move(budget));

    for (int k = 0; k < n; ++k) {
        const int s = scenarios[k];
        LpRow row; // loss_s(w) - a - z_s <= 0 with loss = -return
        row.rel = Relation::LessEq;
        row.rhs = 0.0;
        for (int i = 0; i < d; ++i)
            row.coeffs.emplace_back(i, -p.ret(s, i));
        row.coeffs.emplace_back(d, -1.0);
        row.coeffs.emplace_back(d + 1 + k, -1.0);
        lp.rows.push_back(std::move(row));
    }
    return lp;
}

} // namespace

LinearProgram build_lp(const CvarProblem& problem) {
    check_problem(problem);
    std::vector<int> all(problem.n_scenarios);
    std::iota(all.begin(), all.end(), 0);
    return build_lp_subset(problem, all);
}

CvarSolution optimize_portfolio(const CvarProblem& problem) {
    check_problem(problem);
    const int d = problem.n_assets;
    const int n = problem.n_scenarios;

    LpSolution sol;
    if (n <= 2000) {
        sol = solve_lp(build_lp(problem));
        if (sol.status == LpStatus::Infeasible)
            throw Infeasible("optimize_portfolio: LP infeasible (target mean unattainable?)");
        if (sol.status == LpStatus::Unbounded)
            throw Unbounded("optimize_portfolio: LP unbounded");
    } else {
        // Delayed row generation. Seed the active set with more than
        // (1-alpha)*n scenarios (the master is unbounded in a otherwise),
        // ranked by equal-weight portfolio loss.
        std::vector<double> eq_loss(n, 0.0);
        for (int s = 0; s < n; ++s) {
            double r = 0.0;
            for (int i = 0; i < d; ++i)
                r += problem.ret(s, i);
            eq_loss[s] = -r / d;
        }
        const int k0 = std::min<int>(
            n, static_cast<int>(std::ceil((1.0 - problem.alpha) * n)) + std::max(3 * d, 50));
        std::vector<int> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return eq_loss[a] > eq_loss[b]; });
        std::vector<int> active(order.begin(), order.begin() + k0);
        std::sort(active.begin(), active.end());
        std::vector<bool> in_active(n, false);
        for (int s : active)
            in_active[s] = true;

        for (int round = 0;; ++round) {
            sol = solve_lp(build_lp_subset(problem, active));
            if (sol.status == LpStatus::Infeasible)
                throw Infeasible(
                    "optimize_portfolio: LP infeasible (target mean unattainable?)");
            if (sol.status == LpStatus::Unbounded)
                throw Unbounded("optimize_portfolio: LP unbounded");
            const double a = sol.x[d];
            bool added = false;
            for (int s = 0; s < n; ++s) {
                if (in_active[s])
                    continue;
                double loss = 0.0;
                for (int i = 0; i < d; ++i)
                    loss -= sol.x[i] * problem.ret(s, i);
                if (loss > a + 1e-12) {
                    active.push_back(s);
                    in_active[s] = true;
                    added = true;
                }
            }
            if (!added)
                break;
            if (round > 100)
                throw Error("optimize_portfolio: row generation failed to settle");
        }
    }

    CvarSolution out;
    out.weights.assign(sol.x.begin(), sol.x.begin() + d);
    out.lp_objective = sol.objective;
    out.status = "optimal";

    std::vector<double> losses(n, 0.0);
    const auto mu = asset_means(problem);
    for (int i = 0; i < d; ++i)
        out.achieved_mean += out.weights[i] * mu[i];
    for (int s = 0; s < n; ++s) {
        double loss = 0.0;
        for (int i = 0; i < d; ++i)
            loss -= out.weights[i] * problem.ret(s, i);
        losses[s] = loss;
    }
    out.var = empirical_var(losses, problem.alpha);
    out.cvar = empirical_cvar(losses, problem.alpha);
    out.optimality_gap = std::abs(out.lp_objective - out.cvar);
    return out;
}

std::vector<FrontierPoint> efficient_frontier(const CvarProblem& problem,
                                              std::span<const double> mean_grid) {
    std::vector<FrontierPoint> frontier;
    frontier.reserve(mean_grid.size());
    for (double mu : mean_grid) {
        FrontierPoint point;
        point.target_mean = mu;
        CvarProblem p = problem;
        p.target_mean = mu;
        try {
            point.solution = optimize_portfolio(p);
            point.feasible = true;
        } catch (const Infeasible& e) {
            point.note = e.what();
        } catch (const Unbounded& e) {
            point.note = e.what();
        }
        frontier.push_back(std::move(point));
    }
    return frontier;
}

} // namespace cmc
