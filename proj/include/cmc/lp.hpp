#pragma once

// Small dense linear-programming layer: a sparse problem description and a
// self-contained two-phase simplex solver. The interface is a seam; any
// solver meeting the 1e-8 objective contract can be substituted.

#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace cmc {

enum class Relation { LessEq, Eq, GreaterEq };

struct LpRow {
    std::vector<std::pair<int, double>> coeffs; // (variable, coefficient)
    Relation rel = Relation::LessEq;
    double rhs = 0.0;
};

// minimize objective . x  subject to rows and variable bounds.
struct LinearProgram {
    int n_vars = 0;
    std::vector<double> objective;
    std::vector<LpRow> rows;
    std::vector<double> lower; // -infinity when unbounded below
    std::vector<double> upper; // +infinity when unbounded above

    static constexpr double kInf = std::numeric_limits<double>::infinity();
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    std::vector<double> x;
    double objective = 0.0;
    long long iterations = 0;
};

// Dense two-phase simplex. Dantzig pricing with an automatic switch to
// Bland's rule when the objective stalls, which prevents cycling.
LpSolution solve_lp(const LinearProgram& lp);

} // namespace cmc
