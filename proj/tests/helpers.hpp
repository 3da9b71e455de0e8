#pragma once

// Shared fixtures and independent oracles for the test suites.

#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "cmc/estimation.hpp"
#include "cmc/ratings_core.hpp"
#include "cmc/rng.hpp"
#include "cmc/simulation.hpp"
#include "cmc/types.hpp"

namespace cmc::test {

// Five-class transition matrix in the shape reported for S&P histories
// clubbed to six classes. Rows are renormalized because the published
// 4-decimal figures are off by ~1e-4.
inline TransitionMatrix five_class_p() {
    std::vector<double> p = {
        0.9191, 0.0753, 0.0044, 0.0009, 0.0001, 0.0001, //
        0.0335, 0.8958, 0.0657, 0.0036, 0.0006, 0.0009, //
        0.0080, 0.0674, 0.8554, 0.0665, 0.0011, 0.0016, //
        0.0039, 0.0092, 0.0794, 0.8678, 0.0244, 0.0153, //
        0.0023, 0.0034, 0.0045, 0.1759, 0.6009, 0.2131, //
    };
    for (int i = 0; i < 5; ++i) {
        double sum = 0.0;
        for (int j = 0; j < 6; ++j)
            sum += p[i * 6 + j];
        for (int j = 0; j < 6; ++j)
            p[i * 6 + j] /= sum;
    }
    return {5, std::move(p)};
}

// Comonotone coupling of the tendency bits (single driving uniform).
inline std::vector<double> comonotone_masses(std::span<const double> p_plus) {
    const int m = static_cast<int>(p_plus.size());
    std::vector<double> breaks(p_plus.begin(), p_plus.end());
    breaks.push_back(0.0);
    breaks.push_back(1.0);
    std::sort(breaks.begin(), breaks.end());
    std::vector<double> mass(std::size_t{1} << m, 0.0);
    for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
        const double width = breaks[seg + 1] - breaks[seg];
        if (width <= 0.0)
            continue;
        const double u = 0.5 * (breaks[seg] + breaks[seg + 1]);
        std::uint32_t c = 0;
        for (int i = 0; i < m; ++i)
            if (u <= p_plus[i])
                c |= (1u << i);
        mass[c] += width;
    }
    return mass;
}

// Tendency law as a blend of the independent product measure and the
// comonotone coupling; both satisfy the marginal constraints, so any blend
// does as well. blend = 0 gives independence.
inline TendencyDistribution blended_chi(const TransitionMatrix& p, double blend) {
    const auto p_plus = tendency_probabilities(p);
    const auto indep = TendencyDistribution::independent(p_plus).masses();
    const auto como = comonotone_masses(p_plus);
    std::vector<double> mass(indep.size());
    for (std::size_t c = 0; c < mass.size(); ++c)
        mass[c] = (1.0 - blend) * indep[c] + blend * como[c];
    return {p.rows(), std::move(mass)};
}

inline ModelParams make_params(const TransitionMatrix& p, int sectors, double q_fill,
                               double blend = 0.0) {
    ModelParams params;
    params.scale.m_nondefault = p.rows();
    params.p = p;
    params.q = CouplingMatrix(p.rows(), sectors,
                              std::vector<double>(static_cast<std::size_t>(p.rows()) * sectors,
                                                  q_fill));
    params.chi = blended_chi(p, blend);
    return params;
}

// Random strictly positive transition matrix (all entries >= floor after
// normalization keeps every conditional law non-degenerate).
inline TransitionMatrix random_p(int m, Rng& rng, double floor = 0.02) {
    std::vector<double> p(static_cast<std::size_t>(m) * (m + 1));
    for (int i = 0; i < m; ++i) {
        double sum = 0.0;
        for (int j = 0; j <= m; ++j) {
            const double v = floor + rng.uniform01();
            p[i * (m + 1) + j] = v;
            sum += v;
        }
        for (int j = 0; j <= m; ++j)
            p[i * (m + 1) + j] /= sum;
    }
    return {m, std::move(p)};
}

inline ModelParams random_params(int m, int sectors, Rng& rng, double blend_max = 0.9) {
    ModelParams params;
    params.scale.m_nondefault = m;
    params.p = random_p(m, rng);
    std::vector<double> q(static_cast<std::size_t>(m) * sectors);
    for (double& v : q)
        v = 0.05 + 0.9 * rng.uniform01();
    params.q = CouplingMatrix(m, sectors, std::move(q));
    params.chi = blended_chi(params.p, blend_max * rng.uniform01());
    return params;
}

inline std::vector<FirmState> make_universe(int n_firms, int m, int sectors, Rng& rng) {
    std::vector<FirmState> firms(n_firms);
    for (int f = 0; f < n_firms; ++f) {
        firms[f].rating = 1 + static_cast<int>(rng.uniform01() * m);
        firms[f].sector = 1 + f % sectors;
    }
    return firms;
}

// Panel drawn from the model itself (the marginal law equals P regardless
// of the coupling).
inline RatingPanel simulate_panel(const ModelParams& params, std::span<const FirmState> initial,
                                  int periods, std::uint64_t seed) {
    RatingPanel panel;
    panel.n_firms = static_cast<int>(initial.size());
    panel.n_periods = periods;
    panel.m_nondefault = params.m();
    panel.n_sectors = params.sectors();
    panel.ratings.resize(static_cast<std::size_t>(panel.n_firms) * periods);
    panel.sectors.resize(panel.n_firms);
    std::vector<FirmState> states(initial.begin(), initial.end());
    for (int f = 0; f < panel.n_firms; ++f) {
        panel.sectors[f] = states[f].sector;
        panel.set(f, 1, states[f].rating);
    }
    Rng rng = Rng(seed).split(0xfeedULL);
    for (int t = 2; t <= periods; ++t) {
        const auto next = step_joint(params, states, rng);
        for (int f = 0; f < panel.n_firms; ++f) {
            panel.set(f, t, next[f]);
            states[f].rating = next[f];
        }
    }
    return panel;
}

// Brute-force log path probability: sum over periods of the exact joint
// one-step probability (enumeration over tendency vectors and mixing
// indicators inside joint_step_probability).
inline double log_path_probability(const ModelParams& params, const RatingPanel& panel) {
    double total = 0.0;
    for (int t = 2; t <= panel.n_periods; ++t) {
        std::vector<FirmState> from(panel.n_firms);
        std::vector<int> to(panel.n_firms);
        for (int f = 0; f < panel.n_firms; ++f) {
            from[f] = {panel.at(f, t - 1), panel.sectors[f]};
            to[f] = panel.at(f, t);
        }
        total += std::log(joint_step_probability(params, from, to));
    }
    return total;
}

// The constant dropped in L': sum of I^t(s,m1,m2) * log p_{m1,m2}.
inline double dropped_log_terms(const TransitionCounts& counts, const TransitionMatrix& p) {
    double total = 0.0;
    for (int t = 2; t <= counts.n_periods(); ++t)
        for (int s = 1; s <= counts.n_sectors(); ++s)
            for (int m1 = 1; m1 <= counts.m_nondefault(); ++m1)
                for (int m2 = 1; m2 <= counts.m_nondefault() + 1; ++m2) {
                    const long long n = counts.at(t, s, m1, m2);
                    if (n > 0)
                        total += static_cast<double>(n) * std::log(p.at(m1, m2));
                }
    return total;
}

// Rockafellar-Uryasev objective scanned over all kink candidates; the
// independent CVaR oracle.
inline double cvar_by_scan(std::span<const double> losses, double alpha) {
    const double n = static_cast<double>(losses.size());
    double best = std::numeric_limits<double>::infinity();
    for (double a : losses) {
        double excess = 0.0;
        for (double l : losses)
            excess += std::max(l - a, 0.0);
        best = std::min(best, a + excess / ((1.0 - alpha) * n));
    }
    return best;
}

inline double mean_of(std::span<const double> v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

} // namespace cmc::test
