#include "cmc/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cmc/errors.hpp"
#include "cmc/ratings_core.hpp"
#include "cmc/rng.hpp"

namespace cmc {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

} // namespace

// ---------------------------------------------------------------------------
// Panels and counts
// ---------------------------------------------------------------------------

std::vector<std::string> validate_panel(const RatingPanel& panel) {
    std::vector<std::string> report;
    const int dflt = panel.m_nondefault + 1;
    if (panel.n_firms < 0 || panel.n_periods < 1 || panel.m_nondefault < 1 ||
        panel.n_sectors < 1) {
        report.push_back("panel: dimensions must be positive");
        return report;
    }
    if (panel.ratings.size() != static_cast<std::size_t>(panel.n_firms) * panel.n_periods ||
        panel.sectors.size() != static_cast<std::size_t>(panel.n_firms)) {
        report.push_back("panel: storage size does not match dimensions");
        return report;
    }
    for (int f = 0; f < panel.n_firms; ++f) {
        if (panel.sectors[f] < 1 || panel.sectors[f] > panel.n_sectors)
            report.push_back("firm " + std::to_string(f) + ": sector out of range");
        bool defaulted = false;
        for (int t = 1; t <= panel.n_periods; ++t) {
            const int r = panel.at(f, t);
            if (r < 0 || r > dflt) {
                report.push_back("firm " + std::to_string(f) + ", t=" + std::to_string(t) +
                                 ": rating " + std::to_string(r) + " out of range");
                continue;
            }
            if (defaulted && r != 0 && r != dflt)
                report.push_back("firm " + std::to_string(f) + ", t=" + std::to_string(t) +
                                 ": leaves the default class");
            if (r == dflt)
                defaulted = true;
        }
    }
    return report;
}

TransitionCounts::TransitionCounts(int n_periods, int m_nondefault, int n_sectors)
    : t_(n_periods), m_(m_nondefault), s_(n_sectors) {
    if (t_ < 1 || m_ < 1 || s_ < 1)
        throw std::invalid_argument("TransitionCounts: dimensions must be positive");
    counts_.assign(static_cast<std::size_t>(std::max(t_ - 1, 0)) * s_ * m_ * (m_ + 1), 0);
}

long long TransitionCounts::aggregate(int m1, int m2) const {
    long long total = 0;
    for (int t = 2; t <= t_; ++t)
        for (int s = 1; s <= s_; ++s)
            total += at(t, s, m1, m2);
    return total;
}

long long TransitionCounts::row_total(int m1) const {
    long long total = 0;
    for (int m2 = 1; m2 <= m_ + 1; ++m2)
        total += aggregate(m1, m2);
    return total;
}

long long TransitionCounts::cell_total(int m1, int s) const {
    long long total = 0;
    for (int t = 2; t <= t_; ++t)
        for (int m2 = 1; m2 <= m_ + 1; ++m2)
            total += at(t, s, m1, m2);
    return total;
}

long long TransitionCounts::total() const {
    return std::accumulate(counts_.begin(), counts_.end(), 0LL);
}

TransitionCounts count_transitions(const RatingPanel& panel) {
    const auto report = validate_panel(panel);
    if (!report.empty())
        throw std::invalid_argument("count_transitions: invalid panel: " + report.front());
    TransitionCounts counts(panel.n_periods, panel.m_nondefault, panel.n_sectors);
    const int dflt = panel.m_nondefault + 1;
    for (int f = 0; f < panel.n_firms; ++f) {
        for (int t = 2; t <= panel.n_periods; ++t) {
            const int from = panel.at(f, t - 1);
            const int to = panel.at(f, t);
            if (from == 0 || to == 0 || from == dflt)
                continue;
            counts.add(t, panel.sectors[f], from, to);
        }
    }
    return counts;
}

TransitionMatrix estimate_transition_matrix(const TransitionCounts& counts) {
    const int m = counts.m_nondefault();
    std::vector<double> p(static_cast<std::size_t>(m) * (m + 1));
    for (int m1 = 1; m1 <= m; ++m1) {
        const long long total = counts.row_total(m1);
        if (total == 0)
            throw EmptyRow("class " + std::to_string(m1) +
                           " has no outgoing observations; coarsen the class scheme");
        for (int m2 = 1; m2 <= m + 1; ++m2)
            p[(m1 - 1) * (m + 1) + (m2 - 1)] =
                static_cast<double>(counts.aggregate(m1, m2)) / static_cast<double>(total);
    }
    return {m, std::move(p)};
}

// ---------------------------------------------------------------------------
// Likelihood
// ---------------------------------------------------------------------------

double group_factor(const TransitionCounts& counts, int t, int s, int m1, int m2,
                    int chi_bit_m1, const CouplingMatrix& q, const TransitionMatrix& p) {
    const long long n = counts.at(t, s, m1, m2);
    if (n == 0)
        return 0.0;
    const double qv = q.at(m1, s);
    if (m1 >= m2 && chi_bit_m1 == 1) {
        const double pp = p.p_plus(m1);
        if (pp <= 0.0)
            throw DegenerateTendency("group_factor: p_plus = 0 for class " + std::to_string(m1));
        return n * std::log((qv * (pp - 1.0) + 1.0) / pp);
    }
    if (m1 < m2 && chi_bit_m1 == 0) {
        const double pm = p.p_minus(m1);
        if (pm <= 0.0)
            throw DegenerateTendency("group_factor: p_minus = 0 for class " + std::to_string(m1));
        return n * std::log((qv * (pm - 1.0) + 1.0) / pm);
    }
    // Idiosyncratic-only moves: probability q per firm. log(0) = -inf is the
    // intended sentinel when qv == 0 and the group is nonempty.
    return n * std::log(qv);
}

namespace {

// Per (period, sector, class) totals of non-deteriorating (up) and
// deteriorating (down) moves. f' depends on (m1, m2) only through this
// split, which makes likelihood evaluation O(T*(S*M + 2^M * M)).
struct GroupCounts {
    int periods = 0; // T - 1
    int s = 0;
    int m = 0;
    std::vector<double> up, down;

    std::size_t idx(int ti, int sec, int m1) const {
        return (static_cast<std::size_t>(ti) * s + sec) * m + m1;
    }
};

GroupCounts aggregate_groups(const TransitionCounts& counts) {
    GroupCounts g;
    g.periods = counts.n_periods() - 1;
    g.s = counts.n_sectors();
    g.m = counts.m_nondefault();
    g.up.assign(static_cast<std::size_t>(std::max(g.periods, 0)) * g.s * g.m, 0.0);
    g.down = g.up;
    for (int t = 2; t <= counts.n_periods(); ++t)
        for (int s = 1; s <= g.s; ++s)
            for (int m1 = 1; m1 <= g.m; ++m1)
                for (int m2 = 1; m2 <= g.m + 1; ++m2) {
                    const long long n = counts.at(t, s, m1, m2);
                    if (n == 0)
                        continue;
                    auto& slot = (m2 <= m1 ? g.up : g.down)[g.idx(t - 2, s - 1, m1 - 1)];
                    slot += static_cast<double>(n);
                }
    return g;
}

double count_term(double count, double log_value) {
    return count > 0.0 ? count * log_value : 0.0;
}

double loglik_from_groups(const GroupCounts& g, const TransitionMatrix& p,
                          const CouplingMatrix& q, const TendencyDistribution& chi) {
    const int m = g.m;
    const int s = g.s;

    // Case factors depend on (m1, s) and the tendency bit only.
    std::vector<double> log_q(static_cast<std::size_t>(m) * s);
    std::vector<double> log_up(log_q.size()); // m1 >= m2, chi = 1
    std::vector<double> log_dn(log_q.size()); // m1 < m2, chi = 0
    for (int m1 = 1; m1 <= m; ++m1) {
        const double pp = p.p_plus(m1);
        const double pm = p.p_minus(m1);
        for (int sec = 1; sec <= s; ++sec) {
            const double qv = q.at(m1, sec);
            const std::size_t k = static_cast<std::size_t>(m1 - 1) * s + (sec - 1);
            log_q[k] = std::log(qv);
            log_up[k] = pp > 0.0 ? std::log((qv * (pp - 1.0) + 1.0) / pp)
                                 : std::numeric_limits<double>::quiet_NaN();
            log_dn[k] = pm > 0.0 ? std::log((qv * (pm - 1.0) + 1.0) / pm)
                                 : std::numeric_limits<double>::quiet_NaN();
        }
    }

    const auto& masses = chi.masses();
    std::vector<double> a_up(m), a_dn(m); // per-class log factors given the bit
    std::vector<double> ys;
    ys.reserve(masses.size());

    double total = 0.0;
    for (int ti = 0; ti < g.periods; ++ti) {
        std::fill(a_up.begin(), a_up.end(), 0.0);
        std::fill(a_dn.begin(), a_dn.end(), 0.0);
        for (int m1 = 0; m1 < m; ++m1)
            for (int sec = 0; sec < s; ++sec) {
                const double u = g.up[g.idx(ti, sec, m1)];
                const double d = g.down[g.idx(ti, sec, m1)];
                if (u == 0.0 && d == 0.0)
                    continue;
                const std::size_t k = static_cast<std::size_t>(m1) * s + sec;
                a_up[m1] += count_term(u, log_up[k]) + count_term(d, log_q[k]);
                a_dn[m1] += count_term(d, log_dn[k]) + count_term(u, log_q[k]);
            }

        double y_max = kNegInf;
        ys.clear();
        for (std::uint32_t c = 0; c < masses.size(); ++c) {
            if (masses[c] <= 0.0)
                continue;
            double y = std::log(masses[c]);
            for (int m1 = 0; m1 < m; ++m1)
                y += ((c >> m1) & 1u) ? a_up[m1] : a_dn[m1];
            if (std::isnan(y) || y == std::numeric_limits<double>::infinity())
                throw DegenerateTendency(
                    "log_likelihood: positive tendency mass on a probability-0 conditioning "
                    "event for class data present in the panel");
            ys.push_back(y);
            y_max = std::max(y_max, y);
        }
        if (y_max == kNegInf)
            return kNegInf;
        double acc = 0.0;
        for (double y : ys)
            if (y != kNegInf)
                acc += std::exp(y - y_max);
        total += y_max + std::log(acc);
    }
    return total;
}

} // namespace

double log_likelihood(const TransitionCounts& counts, const ModelParams& params) {
    if (counts.m_nondefault() != params.m() || counts.n_sectors() != params.sectors())
        throw std::invalid_argument("log_likelihood: counts dimensions do not match params");
    return loglik_from_groups(aggregate_groups(counts), params.p, params.q, params.chi);
}

double log_likelihood(const RatingPanel& panel, const ModelParams& params) {
    return log_likelihood(count_transitions(panel), params);
}

// ---------------------------------------------------------------------------
// Tendency repair
// ---------------------------------------------------------------------------

namespace {

double tendency_residual(std::span<const double> mass, std::span<const double> p_plus) {
    double total = 0.0;
    for (double v : mass)
        total += v;
    double r = std::abs(total - 1.0);
    const int m = static_cast<int>(p_plus.size());
    for (int i = 0; i < m; ++i) {
        double marg = 0.0;
        for (std::size_t c = 0; c < mass.size(); ++c)
            if ((c >> i) & 1u)
                marg += mass[c];
        r = std::max(r, std::abs(marg - p_plus[i]));
    }
    return r;
}

} // namespace

TendencyDistribution repair_tendency(std::span<const double> raw, std::span<const double> p_plus,
                                     double tol, int max_sweeps) {
    const int m = static_cast<int>(p_plus.size());
    if (m < 1 || m > TendencyDistribution::kMaxClasses)
        throw std::invalid_argument("repair_tendency: M out of supported range");
    const std::size_t k = std::size_t{1} << m;
    if (raw.size() != k)
        throw std::invalid_argument("repair_tendency: raw vector must have 2^M entries");
    for (double v : p_plus)
        if (std::isnan(v) || v < 0.0 || v > 1.0)
            throw Infeasible("repair_tendency: p_plus entries must lie in [0,1]");
    for (double v : raw)
        if (std::isnan(v))
            throw Infeasible("repair_tendency: NaN in raw weights");

    // Feasible inputs pass through unchanged.
    bool nonneg = std::all_of(raw.begin(), raw.end(), [](double v) { return v >= 0.0; });
    if (nonneg && tendency_residual(raw, p_plus) <= 1e-12)
        return {m, std::vector<double>(raw.begin(), raw.end())};

    std::vector<double> h(raw.begin(), raw.end());
    for (double& v : h)
        v = std::max(v, 0.0);
    double total = std::accumulate(h.begin(), h.end(), 0.0);
    if (total <= 0.0)
        h = TendencyDistribution::independent(p_plus).masses();

    double residual = std::numeric_limits<double>::infinity();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (int i = 0; i < m; ++i) {
            double s1 = 0.0, s0 = 0.0;
            for (std::size_t c = 0; c < k; ++c)
                ((c >> i) & 1u ? s1 : s0) += h[c];
            const double t1 = p_plus[i];
            const double t0 = 1.0 - t1;
            if (s1 > 0.0) {
                const double f = t1 / s1;
                for (std::size_t c = 0; c < k; ++c)
                    if ((c >> i) & 1u)
                        h[c] *= f;
            } else if (t1 > 0.0) {
                const double fill = t1 / static_cast<double>(k / 2);
                for (std::size_t c = 0; c < k; ++c)
                    if ((c >> i) & 1u)
                        h[c] = fill;
            }
            if (s0 > 0.0) {
                const double f = t0 / s0;
                for (std::size_t c = 0; c < k; ++c)
                    if (!((c >> i) & 1u))
                        h[c] *= f;
            } else if (t0 > 0.0) {
                const double fill = t0 / static_cast<double>(k / 2);
                for (std::size_t c = 0; c < k; ++c)
                    if (!((c >> i) & 1u))
                        h[c] = fill;
            }
        }
        residual = tendency_residual(h, p_plus);
        if (residual <= tol)
            return {m, std::move(h)};
        // Zero patterns can block the scaling; blending with the strictly
        // feasible product measure restores convergence.
        if (sweep == max_sweeps / 2) {
            const auto prod = TendencyDistribution::independent(p_plus).masses();
            for (std::size_t c = 0; c < k; ++c)
                h[c] = 0.5 * h[c] + 0.5 * prod[c];
        }
    }
    // Last resort: the product measure satisfies the constraints exactly.
    return TendencyDistribution::independent(p_plus);
}

// ---------------------------------------------------------------------------
// Parameter estimation (differential evolution + pattern-search polish)
// ---------------------------------------------------------------------------

namespace {

// Comonotone coupling of the tendency bits: all bits driven by a single
// uniform variate, chi_i = 1{u <= p_plus_i}. Used as a high-dependence
// starting candidate.
std::vector<double> comonotone_masses(std::span<const double> p_plus) {
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

struct Objective {
    const GroupCounts* groups;
    const TransitionMatrix* p;
    std::vector<double> p_plus;
    int m, s;
    double penalty_weight;
    mutable long long evaluations = 0;

    std::size_t dim() const { return static_cast<std::size_t>(m) * s + (std::size_t{1} << m); }

    ModelParams decode(std::span<const double> x, double* residual_out = nullptr) const {
        std::vector<double> qv(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(m) * s);
        for (double& v : qv)
            v = std::clamp(v, 0.0, 1.0);
        std::vector<double> raw(x.begin() + static_cast<std::ptrdiff_t>(m) * s, x.end());
        for (double& v : raw)
            v = std::clamp(v, 0.0, 1.0);
        ModelParams params;
        params.scale.m_nondefault = m;
        params.p = *p;
        params.q = CouplingMatrix(m, s, std::move(qv));
        params.chi = repair_tendency(raw, p_plus, 1e-10, 300);
        if (residual_out)
            *residual_out = tendency_residual(params.chi.masses(), p_plus);
        return params;
    }

    double operator()(std::span<const double> x) const {
        ++evaluations;
        double residual = 0.0;
        const ModelParams params = decode(x, &residual);
        const double ll = loglik_from_groups(*groups, *p, params.q, params.chi);
        return ll - penalty_weight * residual;
    }
};

} // namespace

EstimationResult estimate_parameters(const RatingPanel& panel, const TransitionMatrix& p,
                                     const OptimizerConfig& config) {
    if (config.population < 5 || config.iterations < 1 || config.restarts < 1)
        throw std::invalid_argument("estimate_parameters: budgets must be positive");
    if (config.tolerance <= 0.0)
        throw std::invalid_argument("estimate_parameters: tolerance must be positive");
    if (p.rows() != panel.m_nondefault)
        throw std::invalid_argument("estimate_parameters: P dimension does not match panel");

    const TransitionCounts counts = count_transitions(panel);
    const GroupCounts groups = aggregate_groups(counts);
    const int m = panel.m_nondefault;
    const int s = panel.n_sectors;

    Objective obj;
    obj.groups = &groups;
    obj.p = &p;
    obj.p_plus = tendency_probabilities(p);
    obj.m = m;
    obj.s = s;
    obj.penalty_weight = config.penalty_weight;

    const std::size_t dim = obj.dim();
    const std::size_t n_q = static_cast<std::size_t>(m) * s;

    const auto indep = TendencyDistribution::independent(obj.p_plus).masses();
    const auto como = comonotone_masses(obj.p_plus);
    auto seeded = [&](double qfill, const std::vector<double>& chi_raw) {
        std::vector<double> x(dim);
        std::fill(x.begin(), x.begin() + n_q, qfill);
        std::copy(chi_raw.begin(), chi_raw.end(), x.begin() + n_q);
        return x;
    };

    std::vector<double> best;
    double best_value = kNegInf;
    EstimationResult result;
    const int stall_window = 80;

    for (int restart = 0; restart < config.restarts; ++restart) {
        Rng rng = Rng(config.seed).split(1000 + static_cast<std::uint64_t>(restart));

        std::vector<std::vector<double>> pop;
        pop.reserve(config.population);
        if (restart == 0) {
            pop.push_back(seeded(0.5, indep));
            pop.push_back(seeded(0.9, indep));
            pop.push_back(seeded(0.15, indep));
            pop.push_back(seeded(0.5, como));
        }
        while (pop.size() < static_cast<std::size_t>(config.population)) {
            std::vector<double> x(dim);
            for (double& v : x)
                v = rng.uniform01();
            pop.push_back(std::move(x));
        }

        std::vector<double> fitness(pop.size());
        for (std::size_t i = 0; i < pop.size(); ++i) {
            fitness[i] = obj(pop[i]);
            if (fitness[i] > best_value) {
                best_value = fitness[i];
                best = pop[i];
            }
        }

        const double f_weight = 0.7;
        const double cr = 0.9;
        int last_improvement = 0;
        bool stalled = false;
        std::vector<double> trial(dim);
        for (int gen = 0; gen < config.iterations; ++gen) {
            for (std::size_t i = 0; i < pop.size(); ++i) {
                std::size_t a, b, c;
                do
                    a = static_cast<std::size_t>(rng.uniform01() * pop.size());
                while (a == i);
                do
                    b = static_cast<std::size_t>(rng.uniform01() * pop.size());
                while (b == i || b == a);
                do
                    c = static_cast<std::size_t>(rng.uniform01() * pop.size());
                while (c == i || c == a || c == b);
                const std::size_t j_rand = static_cast<std::size_t>(rng.uniform01() * dim);
                for (std::size_t j = 0; j < dim; ++j) {
                    if (j == j_rand || rng.uniform01() < cr)
                        trial[j] = std::clamp(pop[a][j] + f_weight * (pop[b][j] - pop[c][j]),
                                              0.0, 1.0);
                    else
                        trial[j] = pop[i][j];
                }
                const double f = obj(trial);
                if (f > fitness[i]) {
                    pop[i] = trial;
                    fitness[i] = f;
                    if (f > best_value + config.tolerance)
                        last_improvement = gen;
                    if (f > best_value) {
                        best_value = f;
                        best = trial;
                    }
                }
            }
            result.best_trace.push_back(best_value);
            ++result.iterations_used;
            if (gen - last_improvement > stall_window) {
                stalled = true;
                break;
            }
        }
        result.restarts_used = restart + 1;
        result.budget_exhausted = !stalled;
    }

    // Deterministic compass-search polish around the best genome.
    {
        std::vector<double> x = best;
        double step = 0.05;
        long long budget = 6000;
        while (step > 1e-7 && budget > 0) {
            bool improved = false;
            for (std::size_t j = 0; j < dim && budget > 0; ++j) {
                for (double dir : {step, -step}) {
                    const double old = x[j];
                    const double cand = std::clamp(old + dir, 0.0, 1.0);
                    if (cand == old)
                        continue;
                    x[j] = cand;
                    const double f = obj(x);
                    --budget;
                    if (f > best_value) {
                        best_value = f;
                        best = x;
                        improved = true;
                        break;
                    }
                    x[j] = old;
                }
            }
            if (!improved)
                step *= 0.5;
        }
    }

    double residual = 0.0;
    result.params = obj.decode(best, &residual);
    result.loglik = loglik_from_groups(groups, p, result.params.q, result.params.chi);
    result.evaluations = obj.evaluations;
    result.constraint_residual = residual;
    for (int m1 = 1; m1 <= m; ++m1)
        for (int sec = 1; sec <= s; ++sec)
            if (counts.cell_total(m1, sec) == 0)
                result.unidentified.emplace_back(m1, sec);
    return result;
}

std::string estimation_result_to_json(const EstimationResult& result) {
    nlohmann::json j;
    j["M"] = result.params.m();
    j["S"] = result.params.sectors();
    j["Q"] = result.params.q.data();
    j["chi"] = result.params.chi.masses();
    j["loglik"] = result.loglik;
    nlohmann::json diag;
    diag["evaluations"] = result.evaluations;
    diag["iterations"] = result.iterations_used;
    diag["restarts"] = result.restarts_used;
    diag["constraint_residual"] = result.constraint_residual;
    diag["budget_exhausted"] = result.budget_exhausted;
    nlohmann::json unid = nlohmann::json::array();
    for (const auto& [cls, sec] : result.unidentified)
        unid.push_back({cls, sec});
    diag["unidentified_cells"] = unid;
    j["diagnostics"] = diag;
    return j.dump(2);
}

} // namespace cmc
