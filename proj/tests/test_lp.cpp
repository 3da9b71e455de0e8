#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cmc/lp.hpp"
#include "cmc/rng.hpp"

using namespace cmc;

namespace {

constexpr double kInf = LinearProgram::kInf;

LinearProgram make_lp(int n) {
    LinearProgram lp;
    lp.n_vars = n;
    lp.objective.assign(n, 0.0);
    lp.lower.assign(n, -kInf);
    lp.upper.assign(n, kInf);
    return lp;
}

// Exhaustive vertex oracle for 2-variable LPs: intersect every pair of
// constraint lines (rows at equality plus active bounds), keep feasible
// points, take the best objective.
double vertex_oracle_2d(const LinearProgram& lp) {
    struct Line {
        double a, b, c; // a x + b y = c
    };
    std::vector<Line> lines;
    for (const auto& row : lp.rows) {
        double a = 0, b = 0;
        for (const auto& [v, coef] : row.coeffs)
            (v == 0 ? a : b) += coef;
        lines.push_back({a, b, row.rhs});
    }
    for (int v = 0; v < 2; ++v) {
        if (lp.lower[v] > -kInf)
            lines.push_back({v == 0 ? 1.0 : 0.0, v == 0 ? 0.0 : 1.0, lp.lower[v]});
        if (lp.upper[v] < kInf)
            lines.push_back({v == 0 ? 1.0 : 0.0, v == 0 ? 0.0 : 1.0, lp.upper[v]});
    }
    const auto feasible = [&](double x, double y) {
        for (const auto& row : lp.rows) {
            double lhs = 0;
            for (const auto& [v, coef] : row.coeffs)
                lhs += coef * (v == 0 ? x : y);
            if (row.rel == Relation::LessEq && lhs > row.rhs + 1e-7)
                return false;
            if (row.rel == Relation::GreaterEq && lhs < row.rhs - 1e-7)
                return false;
            if (row.rel == Relation::Eq && std::abs(lhs - row.rhs) > 1e-7)
                return false;
        }
        return x >= lp.lower[0] - 1e-7 && x <= lp.upper[0] + 1e-7 && y >= lp.lower[1] - 1e-7 &&
               y <= lp.upper[1] + 1e-7;
    };
    double best = kInf;
    for (std::size_t i = 0; i < lines.size(); ++i)
        for (std::size_t j = i + 1; j < lines.size(); ++j) {
            const double det = lines[i].a * lines[j].b - lines[j].a * lines[i].b;
            if (std::abs(det) < 1e-10)
                continue;
            const double x = (lines[i].c * lines[j].b - lines[j].c * lines[i].b) / det;
            const double y = (lines[i].a * lines[j].c - lines[j].a * lines[i].c) / det;
            if (feasible(x, y))
                best = std::min(best, lp.objective[0] * x + lp.objective[1] * y);
        }
    return best;
}

} // namespace

TEST_CASE("minimize a single bounded variable") {
    auto lp = make_lp(1);
    lp.objective = {1.0};
    LpRow row;
    row.coeffs = {{0, 1.0}};
    row.rel = Relation::GreaterEq;
    row.rhs = 3.0;
    lp.rows.push_back(row);
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(3.0).epsilon(1e-10));
    CHECK(sol.x[0] == doctest::Approx(3.0));
}

TEST_CASE("contradictory rows are infeasible") {
    auto lp = make_lp(1);
    lp.objective = {1.0};
    LpRow ge{{{0, 1.0}}, Relation::GreaterEq, 3.0};
    LpRow le{{{0, 1.0}}, Relation::LessEq, 2.0};
    lp.rows = {ge, le};
    CHECK(solve_lp(lp).status == LpStatus::Infeasible);
}

TEST_CASE("descent directions without bounds are unbounded") {
    auto lp = make_lp(1);
    lp.objective = {-1.0};
    lp.lower[0] = 0.0;
    CHECK(solve_lp(lp).status == LpStatus::Unbounded);
}

TEST_CASE("equalities with free variables") {
    // min x + 2y st x + y = 2, x - y >= -4
    auto lp = make_lp(2);
    lp.objective = {1.0, 2.0};
    lp.rows.push_back({{{0, 1.0}, {1, 1.0}}, Relation::Eq, 2.0});
    lp.rows.push_back({{{0, 1.0}, {1, -1.0}}, Relation::GreaterEq, -4.0});
    // Substituting y = 2 - x gives objective 4 - x with x free above, so
    // the problem is unbounded until x gets an upper bound.
    REQUIRE(solve_lp(lp).status == LpStatus::Unbounded);

    auto lp2 = lp;
    lp2.upper[0] = 5.0;
    const auto sol2 = solve_lp(lp2);
    REQUIRE(sol2.status == LpStatus::Optimal);
    CHECK(sol2.objective == doctest::Approx(-1.0).epsilon(1e-9)); // x=5, y=-3
    CHECK(sol2.x[0] == doctest::Approx(5.0));
    CHECK(sol2.x[1] == doctest::Approx(-3.0));
}

TEST_CASE("fixed variables are substituted") {
    auto lp = make_lp(2);
    lp.objective = {1.0, 1.0};
    lp.lower[0] = lp.upper[0] = 2.5;
    lp.lower[1] = 0.0;
    lp.rows.push_back({{{0, 1.0}, {1, 1.0}}, Relation::GreaterEq, 4.0});
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(2.5));
    CHECK(sol.x[1] == doctest::Approx(1.5));
    CHECK(sol.objective == doctest::Approx(4.0).epsilon(1e-10));
}

TEST_CASE("bounds-only problems short-circuit") {
    auto lp = make_lp(3);
    lp.objective = {1.0, -2.0, 0.0};
    lp.lower = {-1.0, -kInf, -kInf};
    lp.upper = {kInf, 4.0, kInf};
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.x[0] == doctest::Approx(-1.0));
    CHECK(sol.x[1] == doctest::Approx(4.0));
    CHECK(sol.objective == doctest::Approx(-9.0));
}

TEST_CASE("degenerate constraints do not cycle") {
    // Redundant copies of the binding facet x + y <= 1.
    auto lp = make_lp(2);
    lp.objective = {-1.0, -1.0};
    lp.lower = {0.0, 0.0};
    lp.upper = {kInf, kInf};
    lp.rows.push_back({{{0, 1.0}, {1, 1.0}}, Relation::LessEq, 1.0});
    lp.rows.push_back({{{0, 2.0}, {1, 2.0}}, Relation::LessEq, 2.0});
    lp.rows.push_back({{{0, 1.0}, {1, 2.0}}, Relation::LessEq, 2.0});
    lp.rows.push_back({{{0, 2.0}, {1, 1.0}}, Relation::LessEq, 2.0});
    const auto sol = solve_lp(lp);
    REQUIRE(sol.status == LpStatus::Optimal);
    CHECK(sol.objective == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("random 2-variable LPs match the vertex oracle") {
    Rng rng(2468);
    int solved = 0;
    for (int trial = 0; trial < 200; ++trial) {
        auto lp = make_lp(2);
        lp.objective = {rng.uniform01() * 2 - 1, rng.uniform01() * 2 - 1};
        lp.lower = {rng.uniform01() * -2, rng.uniform01() * -2};
        lp.upper = {lp.lower[0] + 0.5 + rng.uniform01() * 3,
                    lp.lower[1] + 0.5 + rng.uniform01() * 3};
        const int n_rows = 1 + static_cast<int>(rng.uniform01() * 4);
        for (int r = 0; r < n_rows; ++r) {
            LpRow row;
            row.coeffs = {{0, rng.uniform01() * 2 - 1}, {1, rng.uniform01() * 2 - 1}};
            row.rel = rng.uniform01() < 0.5 ? Relation::LessEq : Relation::GreaterEq;
            row.rhs = rng.uniform01() * 2 - 1;
            lp.rows.push_back(row);
        }
        const auto sol = solve_lp(lp);
        const double oracle = vertex_oracle_2d(lp);
        if (sol.status == LpStatus::Optimal) {
            ++solved;
            REQUIRE(std::isfinite(oracle));
            CHECK(sol.objective == doctest::Approx(oracle).epsilon(5e-6));
        } else if (sol.status == LpStatus::Infeasible) {
            CHECK(!std::isfinite(oracle));
        }
    }
    CHECK(solved > 50); // the generator must produce plenty of solvable cases
}
