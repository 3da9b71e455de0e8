#include "cmc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "cmc/errors.hpp"

namespace cmc {

namespace {

constexpr double kPivotTol = 1e-9;
constexpr double kCostTol = 1e-9;
constexpr double kInf = LinearProgram::kInf;

// How each original variable maps into the nonnegative standard-form
// columns: x = offset + sign * x[col] (- x[col_neg] for free variables).
struct VarMap {
    int col = -1;
    int col_neg = -1; // second column of a free split
    double sign = 1.0;
    double offset = 0.0;
};

struct Tableau {
    int m = 0;
    int n_cols = 0;
    std::vector<double> a; // m x (n_cols + 1), last column is the rhs
    std::vector<int> basis;
    std::vector<double> d1, d2; // reduced-cost rows (phase 1 / 2), size n_cols + 1
    std::vector<bool> artificial;

    double& at(int r, int c) { return a[static_cast<std::size_t>(r) * (n_cols + 1) + c]; }
    double at(int r, int c) const { return a[static_cast<std::size_t>(r) * (n_cols + 1) + c]; }

    void pivot(int r, int e) {
        const double piv = at(r, e);
        const double inv = 1.0 / piv;
        double* row = &a[static_cast<std::size_t>(r) * (n_cols + 1)];
        for (int c = 0; c <= n_cols; ++c)
            row[c] *= inv;
        row[e] = 1.0;
        for (int i = 0; i < m; ++i) {
            if (i == r)
                continue;
            const double f = at(i, e);
            if (f == 0.0)
                continue;
            double* other = &a[static_cast<std::size_t>(i) * (n_cols + 1)];
            for (int c = 0; c <= n_cols; ++c)
                other[c] -= f * row[c];
            other[e] = 0.0;
        }
        for (auto* d : {&d1, &d2}) {
            const double f = (*d)[e];
            if (f == 0.0)
                continue;
            for (int c = 0; c <= n_cols; ++c)
                (*d)[c] -= f * row[c];
            (*d)[e] = 0.0;
        }
        basis[r] = e;
    }
};

// Entering column under the active pricing rule; -1 when optimal.
int pick_entering(const Tableau& t, const std::vector<double>& d, bool bland,
                  const std::vector<bool>& banned) {
    int best = -1;
    double best_val = -kCostTol;
    for (int c = 0; c < t.n_cols; ++c) {
        if (banned[c])
            continue;
        const double v = d[c];
        if (v < -kCostTol) {
            if (bland)
                return c;
            if (v < best_val) {
                best_val = v;
                best = c;
            }
        }
    }
    return best;
}

// Leaving row by the ratio test; ties break toward the smallest basis
// column index (Bland-compatible). -1 when the column is unbounded.
int pick_leaving(const Tableau& t, int e) {
    int best = -1;
    double best_ratio = kInf;
    for (int r = 0; r < t.m; ++r) {
        const double coef = t.at(r, e);
        if (coef <= kPivotTol)
            continue;
        const double ratio = t.at(r, t.n_cols) / coef;
        if (ratio < best_ratio - 1e-12 ||
            (ratio < best_ratio + 1e-12 && (best == -1 || t.basis[r] < t.basis[best]))) {
            best_ratio = ratio;
            best = r;
        }
    }
    return best;
}

enum class LoopResult { Optimal, Unbounded };

LoopResult simplex_loop(Tableau& t, std::vector<double>& d, const std::vector<bool>& banned,
                        long long& iterations, long long max_iterations) {
    bool bland = false;
    long long stalled = 0;
    double last_obj = d[t.n_cols];
    while (true) {
        const int e = pick_entering(t, d, bland, banned);
        if (e < 0)
            return LoopResult::Optimal;
        const int r = pick_leaving(t, e);
        if (r < 0)
            return LoopResult::Unbounded;
        t.pivot(r, e);
        ++iterations;
        if (iterations > max_iterations)
            throw Error("solve_lp: iteration limit exceeded");
        if (d[t.n_cols] > last_obj + 1e-12) {
            last_obj = d[t.n_cols];
            stalled = 0;
        } else if (++stalled > 2 * (t.m + t.n_cols) + 100) {
            bland = true; // anti-cycling
        }
    }
}

} // namespace

LpSolution solve_lp(const LinearProgram& lp) {
    if (lp.n_vars < 1)
        throw std::invalid_argument("solve_lp: no variables");
    if (static_cast<int>(lp.objective.size()) != lp.n_vars ||
        static_cast<int>(lp.lower.size()) != lp.n_vars ||
        static_cast<int>(lp.upper.size()) != lp.n_vars)
        throw std::invalid_argument("solve_lp: objective/bounds size mismatch");
    for (const auto& row : lp.rows)
        for (const auto& [v, coef] : row.coeffs) {
            if (v < 0 || v >= lp.n_vars)
                throw std::invalid_argument("solve_lp: row references unknown variable");
            (void)coef;
        }

    // --- standard-form variable mapping -----------------------------------
    std::vector<VarMap> vmap(lp.n_vars);
    int n_struct = 0;
    std::vector<std::pair<int, double>> upper_rows; // (variable, shifted bound)
    for (int j = 0; j < lp.n_vars; ++j) {
        const double lo = lp.lower[j];
        const double hi = lp.upper[j];
        if (lo > hi)
            return {LpStatus::Infeasible, {}, 0.0, 0};
        if (lo == hi) {
            vmap[j].offset = lo; // fixed variable, no column
            continue;
        }
        if (lo > -kInf) {
            vmap[j] = {n_struct++, -1, 1.0, lo};
            if (hi < kInf)
                upper_rows.emplace_back(j, hi - lo);
        } else if (hi < kInf) {
            vmap[j] = {n_struct++, -1, -1.0, hi};
        } else {
            vmap[j].col = n_struct++;
            vmap[j].col_neg = n_struct++;
        }
    }

    // --- assemble rows in transformed coordinates -------------------------
    struct DenseRow {
        std::vector<double> coef;
        Relation rel;
        double rhs;
    };
    std::vector<DenseRow> rows;
    rows.reserve(lp.rows.size() + upper_rows.size());
    for (const auto& row : lp.rows) {
        DenseRow dr{std::vector<double>(n_struct, 0.0), row.rel, row.rhs};
        for (const auto& [v, coef] : row.coeffs) {
            const VarMap& vm = vmap[v];
            dr.rhs -= coef * vm.offset;
            if (vm.col >= 0)
                dr.coef[vm.col] += coef * vm.sign;
            if (vm.col_neg >= 0)
                dr.coef[vm.col_neg] -= coef;
        }
        rows.push_back(std::move(dr));
    }
    for (const auto& [v, bound] : upper_rows) {
        DenseRow dr{std::vector<double>(n_struct, 0.0), Relation::LessEq, bound};
        dr.coef[vmap[v].col] = 1.0;
        rows.push_back(std::move(dr));
    }

    const int m = static_cast<int>(rows.size());
    if (m == 0) {
        // Only bounds: minimize each variable toward its cheaper end.
        LpSolution sol;
        sol.status = LpStatus::Optimal;
        sol.x.resize(lp.n_vars);
        for (int j = 0; j < lp.n_vars; ++j) {
            const double c = lp.objective[j];
            if (c > 0.0)
                sol.x[j] = lp.lower[j];
            else if (c < 0.0)
                sol.x[j] = lp.upper[j];
            else
                sol.x[j] = lp.lower[j] > -kInf ? lp.lower[j] : std::min(lp.upper[j], 0.0);
            if (!std::isfinite(sol.x[j]))
                return {LpStatus::Unbounded, {}, 0.0, 0};
            sol.objective += c * sol.x[j];
        }
        return sol;
    }

    // Slack / artificial layout.
    int n_slack = 0, n_art = 0;
    for (auto& row : rows) {
        if (row.rhs < 0.0) {
            for (double& c : row.coef)
                c = -c;
            row.rhs = -row.rhs;
            row.rel = row.rel == Relation::LessEq
                          ? Relation::GreaterEq
                          : (row.rel == Relation::GreaterEq ? Relation::LessEq : Relation::Eq);
        }
        if (row.rel != Relation::Eq)
            ++n_slack;
        if (row.rel != Relation::LessEq)
            ++n_art;
    }

    Tableau t;
    t.m = m;
    t.n_cols = n_struct + n_slack + n_art;
    t.a.assign(static_cast<std::size_t>(m) * (t.n_cols + 1), 0.0);
    t.basis.assign(m, -1);
    t.artificial.assign(t.n_cols, false);
    t.d1.assign(t.n_cols + 1, 0.0);
    t.d2.assign(t.n_cols + 1, 0.0);

    int slack_at = n_struct;
    int art_at = n_struct + n_slack;
    for (int r = 0; r < m; ++r) {
        for (int c = 0; c < n_struct; ++c)
            t.at(r, c) = rows[r].coef[c];
        t.at(r, t.n_cols) = rows[r].rhs;
        if (rows[r].rel == Relation::LessEq) {
            t.at(r, slack_at) = 1.0;
            t.basis[r] = slack_at++;
        } else if (rows[r].rel == Relation::GreaterEq) {
            t.at(r, slack_at) = -1.0;
            ++slack_at;
            t.at(r, art_at) = 1.0;
            t.artificial[art_at] = true;
            t.basis[r] = art_at++;
        } else {
            t.at(r, art_at) = 1.0;
            t.artificial[art_at] = true;
            t.basis[r] = art_at++;
        }
    }

    // Phase-2 costs in transformed coordinates. The constant from offsets is
    // re-added when the objective is evaluated on the original variables.
    for (int j = 0; j < lp.n_vars; ++j) {
        const VarMap& vm = vmap[j];
        if (vm.col >= 0)
            t.d2[vm.col] += lp.objective[j] * vm.sign;
        if (vm.col_neg >= 0)
            t.d2[vm.col_neg] -= lp.objective[j];
    }
    // Phase-1 costs: one per artificial; reduced costs subtract the rows
    // whose basis is artificial.
    for (int r = 0; r < m; ++r) {
        if (!t.artificial[t.basis[r]])
            continue;
        for (int c = 0; c <= t.n_cols; ++c)
            t.d1[c] -= t.at(r, c);
    }
    for (int c = 0; c < t.n_cols; ++c)
        if (t.artificial[c])
            t.d1[c] += 1.0;

    LpSolution sol;
    const long long max_iter = 200LL * (m + t.n_cols) + 20000;
    std::vector<bool> no_ban(t.n_cols, false);

    // Phase 1.
    if (art_at > n_struct + n_slack) {
        if (simplex_loop(t, t.d1, no_ban, sol.iterations, max_iter) == LoopResult::Unbounded)
            throw Error("solve_lp: phase-1 unbounded (internal error)");
        double infeas = -t.d1[t.n_cols]; // phase-1 objective value
        double scale = 1.0;
        for (int r = 0; r < m; ++r)
            scale = std::max(scale, std::abs(t.at(r, t.n_cols)));
        if (infeas > 1e-7 * scale) {
            sol.status = LpStatus::Infeasible;
            return sol;
        }
        // Pivot remaining artificials out of the basis where possible.
        for (int r = 0; r < m; ++r) {
            if (!t.artificial[t.basis[r]])
                continue;
            for (int c = 0; c < t.n_cols; ++c) {
                if (t.artificial[c])
                    continue;
                if (std::abs(t.at(r, c)) > kPivotTol) {
                    t.pivot(r, c);
                    break;
                }
            }
            // A row with no usable pivot is redundant; its artificial stays
            // basic at zero and never changes because the row is all zeros.
        }
    }

    std::vector<bool> ban_art = t.artificial;

    // Phase 2.
    if (simplex_loop(t, t.d2, ban_art, sol.iterations, max_iter) == LoopResult::Unbounded) {
        sol.status = LpStatus::Unbounded;
        return sol;
    }

    // Recover the original variables.
    std::vector<double> xcols(t.n_cols, 0.0);
    for (int r = 0; r < m; ++r)
        xcols[t.basis[r]] = t.at(r, t.n_cols);
    sol.x.resize(lp.n_vars);
    sol.objective = 0.0;
    for (int j = 0; j < lp.n_vars; ++j) {
        const VarMap& vm = vmap[j];
        double v = vm.offset;
        if (vm.col >= 0)
            v += vm.sign * xcols[vm.col];
        if (vm.col_neg >= 0)
            v -= xcols[vm.col_neg];
        sol.x[j] = v;
        sol.objective += lp.objective[j] * v;
    }
    sol.status = LpStatus::Optimal;
    return sol;
}

} // namespace cmc
