#include "cmc/ratings_core.hpp"

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <stdexcept>

#include "cmc/errors.hpp"
#include "cmc/rng.hpp"

namespace cmc {

namespace {

constexpr double kRowSumTol = 1e-12;
constexpr double kTotalMassTol = 1e-10;

std::string fmt(const char* format, ...) {
    char buf[256];
    va_list args;
    va_start(args, format);
    std::vsnprintf(buf, sizeof(buf), format, args);
    va_end(args);
    return buf;
}

void check_state(const ModelParams& params, const FirmState& st) {
    if (st.rating < 1 || st.rating > params.m() + 1)
        throw std::invalid_argument(fmt("firm rating %d out of 1..%d", st.rating, params.m() + 1));
    if (st.sector < 1 || st.sector > params.sectors())
        throw std::invalid_argument(fmt("firm sector %d out of 1..%d", st.sector, params.sectors()));
}

} // namespace

std::vector<std::string> validate(const ModelParams& params, double marginal_tol) {
    std::vector<std::string> report;
    const int m = params.scale.m_nondefault;
    if (m < 1) {
        report.push_back("scale: m_nondefault must be >= 1");
        return report;
    }
    if (params.p.rows() != m) {
        report.push_back(fmt("P: %d rows, expected M = %d", params.p.rows(), m));
        return report;
    }
    for (int i = 1; i <= m; ++i) {
        double sum = 0.0;
        for (int j = 1; j <= m + 1; ++j) {
            const double v = params.p.at(i, j);
            if (!(v >= 0.0 && v <= 1.0))
                report.push_back(fmt("P(%d,%d) = %g outside [0,1]", i, j, v));
            sum += v;
        }
        if (std::abs(sum - 1.0) > kRowSumTol)
            report.push_back(fmt("P row %d: sum %.17g differs from 1 by more than 1e-12", i, sum));
    }
    if (params.q.rows() != m)
        report.push_back(fmt("Q: %d rows, expected M = %d", params.q.rows(), m));
    else {
        for (int i = 1; i <= m; ++i)
            for (int s = 1; s <= params.q.sectors(); ++s) {
                const double v = params.q.at(i, s);
                if (!(v >= 0.0 && v <= 1.0))
                    report.push_back(fmt("Q(%d,%d) = %g outside [0,1]", i, s, v));
            }
    }
    if (params.chi.m_nondefault() != m) {
        report.push_back(fmt("chi: defined for M = %d, expected %d", params.chi.m_nondefault(), m));
        return report;
    }
    for (std::uint32_t c = 0; c < params.chi.n_outcomes(); ++c)
        if (!(params.chi.mass(c) >= 0.0))
            report.push_back(fmt("chi mass[%u] = %g is negative or NaN", c, params.chi.mass(c)));
    const double total = params.chi.total_mass();
    if (std::abs(total - 1.0) > kTotalMassTol)
        report.push_back(fmt("chi: total mass %.17g differs from 1 by more than 1e-10", total));
    for (int i = 1; i <= m; ++i) {
        const double marg = params.chi.marginal(i);
        const double target = params.p.p_plus(i);
        if (std::abs(marg - target) > marginal_tol)
            report.push_back(fmt("chi marginal %d: %.12g differs from p_plus %.12g beyond %g", i,
                                 marg, target, marginal_tol));
    }
    return report;
}

std::vector<double> tendency_probabilities(const TransitionMatrix& p) {
    std::vector<double> out(p.rows());
    for (int i = 1; i <= p.rows(); ++i)
        out[i - 1] = p.p_plus(i);
    return out;
}

std::vector<double> conditional_magnitude(const TransitionMatrix& p, int from_class,
                                          int tendency) {
    if (from_class < 1 || from_class > p.rows())
        throw std::invalid_argument("conditional_magnitude: from_class out of range");
    const int n = p.cols();
    std::vector<double> out(n, 0.0);
    if (tendency == 1) {
        const double denom = p.p_plus(from_class);
        if (denom <= 0.0)
            throw DegenerateTendency(fmt("class %d: p_plus = 0, non-deteriorating move has "
                                         "probability 0",
                                         from_class));
        for (int j = 1; j <= from_class; ++j)
            out[j - 1] = p.at(from_class, j) / denom;
    } else {
        const double denom = p.p_minus(from_class);
        if (denom <= 0.0)
            throw DegenerateTendency(fmt("class %d: p_minus = 0, deteriorating move has "
                                         "probability 0",
                                         from_class));
        for (int j = from_class + 1; j <= n; ++j)
            out[j - 1] = p.at(from_class, j) / denom;
    }
    return out;
}

double mixture_default_probability(const ModelParams& params, const FirmState& state,
                                   std::uint32_t chi_bar) {
    check_state(params, state);
    const int m = state.rating;
    if (m == params.m() + 1)
        return 1.0; // already defaulted
    const int dflt = params.m() + 1;
    const double pd = params.p.at(m, dflt);
    const double q = params.q.at(m, state.sector);
    double prob = pd * q;
    if (!TendencyDistribution::bit(chi_bar, m)) {
        const double pm = params.p.p_minus(m);
        if (pm <= 0.0)
            throw DegenerateTendency(fmt("class %d: p_minus = 0 but chi_%d = 0", m, m));
        prob += (1.0 - q) * pd / pm;
    }
    return prob;
}

std::vector<int> step_joint(const ModelParams& params, std::span<const FirmState> states,
                            Rng& rng) {
    const int dflt = params.m() + 1;
    for (const auto& st : states)
        check_state(params, st);

    const std::uint32_t chi = params.chi.sample(rng);

    std::vector<int> next(states.size());
    for (std::size_t n = 0; n < states.size(); ++n) {
        const int m = states[n].rating;
        if (m == dflt) { // absorbing
            next[n] = dflt;
            continue;
        }
        const double q = params.q.at(m, states[n].sector);
        if (rng.bernoulli(q)) {
            next[n] = static_cast<int>(rng.categorical(params.p.row(m))) + 1;
        } else {
            const auto mag = conditional_magnitude(params.p, m,
                                                   TendencyDistribution::bit(chi, m) ? 1 : 0);
            next[n] = static_cast<int>(rng.categorical(mag)) + 1;
        }
    }
    return next;
}

double joint_step_probability(const ModelParams& params, std::span<const FirmState> states,
                              std::span<const int> outcomes) {
    if (states.size() != outcomes.size())
        throw std::invalid_argument("joint_step_probability: size mismatch");
    const int m_classes = params.m();
    if (m_classes > 6)
        throw TooLarge("joint_step_probability: M > 6");
    const int dflt = m_classes + 1;

    // Defaulted firms stay defaulted with probability 1; enumeration only
    // covers the live firms.
    std::vector<std::size_t> live;
    for (std::size_t n = 0; n < states.size(); ++n) {
        check_state(params, states[n]);
        if (outcomes[n] < 1 || outcomes[n] > dflt)
            throw std::invalid_argument("joint_step_probability: outcome class out of range");
        if (states[n].rating == dflt) {
            if (outcomes[n] != dflt)
                return 0.0;
        } else {
            live.push_back(n);
        }
    }
    if (live.size() > 12)
        throw TooLarge("joint_step_probability: more than 12 non-defaulted firms");

    const std::size_t n_delta = std::size_t{1} << live.size();
    double prob = 0.0;
    for (std::uint32_t chi = 0; chi < params.chi.n_outcomes(); ++chi) {
        const double pc = params.chi.mass(chi);
        if (pc <= 0.0)
            continue;
        double inner = 0.0;
        for (std::size_t dmask = 0; dmask < n_delta; ++dmask) {
            double term = 1.0;
            for (std::size_t k = 0; k < live.size() && term > 0.0; ++k) {
                const auto& st = states[live[k]];
                const int x = outcomes[live[k]];
                const double q = params.q.at(st.rating, st.sector);
                if ((dmask >> k) & 1u) {
                    term *= q * params.p.at(st.rating, x);
                } else {
                    const double w = 1.0 - q;
                    if (w <= 0.0) {
                        term = 0.0;
                        break;
                    }
                    const bool up = TendencyDistribution::bit(chi, st.rating);
                    const double denom = up ? params.p.p_plus(st.rating)
                                            : params.p.p_minus(st.rating);
                    if (denom <= 0.0)
                        throw DegenerateTendency(
                            fmt("class %d: conditioning event for chi bit %d has probability 0",
                                st.rating, up ? 1 : 0));
                    const bool allowed = up ? x <= st.rating : x > st.rating;
                    term *= allowed ? w * params.p.at(st.rating, x) / denom : 0.0;
                }
            }
            inner += term;
        }
        prob += pc * inner;
    }
    return prob;
}

} // namespace cmc
