#include "cmc/cdx_pricing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cmc/errors.hpp"

namespace cmc {

RateCurve RateCurve::flat(double rate, int horizon) { return flat(rate, rate, horizon); }

RateCurve RateCurve::flat(double rate, double discount_rate, int horizon) {
    if (horizon < 1)
        throw std::invalid_argument("RateCurve::flat: horizon must be >= 1");
    RateCurve curve;
    curve.rates.assign(horizon, rate);
    curve.discounts.resize(horizon);
    for (int t = 1; t <= horizon; ++t)
        curve.discounts[t - 1] = std::pow(1.0 + discount_rate, -t);
    return curve;
}

std::vector<std::string> validate_curve(const RateCurve& curve) {
    std::vector<std::string> report;
    if (curve.rates.size() != curve.discounts.size())
        report.push_back("curve: rates and discounts differ in length");
    for (std::size_t t = 0; t < curve.rates.size(); ++t)
        if (!(curve.rates[t] > -1.0))
            report.push_back("curve: rate at t=" + std::to_string(t + 1) + " not > -1");
    double prev = 1.0;
    for (std::size_t t = 0; t < curve.discounts.size(); ++t) {
        const double d = curve.discounts[t];
        if (!(d > 0.0 && d <= 1.0))
            report.push_back("curve: discount at t=" + std::to_string(t + 1) +
                             " outside (0,1]");
        if (d > prev + 1e-12)
            report.push_back("curve: discount increases at t=" + std::to_string(t + 1));
        prev = d;
    }
    return report;
}

std::vector<std::string> validate_tranche(const CdxTranche& tranche, int n_firms) {
    std::vector<std::string> report;
    const std::string where = "tranche '" + tranche.name + "': ";
    if (tranche.members.empty())
        report.push_back(where + "no members");
    for (int f : tranche.members)
        if (f < 0 || f >= n_firms)
            report.push_back(where + "member " + std::to_string(f) + " outside universe");
    if (!(tranche.attach >= 0.0 && tranche.attach < 1.0))
        report.push_back(where + "attachment outside [0,1)");
    if (!(tranche.detach > 0.0 && tranche.detach <= 1.0))
        report.push_back(where + "detachment outside (0,1]");
    if (!(tranche.attach < tranche.detach))
        report.push_back(where + "attachment not below detachment");
    if (tranche.maturity < 1)
        report.push_back(where + "maturity must be >= 1 year");
    if (!(tranche.recovery >= 0.0 && tranche.recovery <= 1.0))
        report.push_back(where + "recovery outside [0,1]");
    if (!(tranche.notional0 > 0.0))
        report.push_back(where + "notional must be positive");
    return report;
}

double loss_fraction(int defaults, const CdxTranche& tranche) {
    const int n = static_cast<int>(tranche.members.size());
    if (n == 0)
        throw std::invalid_argument("loss_fraction: tranche has no members");
    if (defaults < 0 || defaults > n)
        throw std::invalid_argument("loss_fraction: default count outside 0..|A|");
    return static_cast<double>(defaults) / static_cast<double>(n);
}

double tranche_notional(const CdxTranche& tranche, double loss_frac) {
    if (!(loss_frac >= 0.0 && loss_frac <= 1.0))
        throw std::invalid_argument("tranche_notional: loss fraction outside [0,1]");
    if (loss_frac < tranche.attach)
        return tranche.notional0;
    if (loss_frac > tranche.detach)
        return 0.0;
    return tranche.notional0 * (tranche.detach - loss_frac) / (tranche.detach - tranche.attach);
}

double discounted_return(const CdxTranche& tranche, std::span<const int> default_path,
                         const RateCurve& curve) {
    const int maturity = tranche.maturity;
    if (curve.horizon() < maturity)
        throw CurveTooShort("discounted_return: curve covers " +
                            std::to_string(curve.horizon()) + " periods, tranche matures at " +
                            std::to_string(maturity));
    if (static_cast<int>(default_path.size()) < maturity + 1)
        throw std::invalid_argument("discounted_return: default path shorter than maturity");

    const double n0 = tranche.notional0;
    const double rec = tranche.recovery;
    double ret = tranche.upfront * n0 - n0;
    double notional_t = n0;
    for (int t = 1; t <= maturity; ++t) {
        notional_t = tranche_notional(tranche, loss_fraction(default_path[t], tranche));
        const double i_t = curve.rates[t - 1];
        const double r_t = curve.discounts[t - 1];
        // Spread and risk-free interest accrue on the surviving notional;
        // recovered amounts are held by the issuer and earn the risk-free
        // rate until maturity.
        ret += r_t * (notional_t * (tranche.spread + i_t) + rec * (n0 - notional_t) * i_t);
    }
    // Final settlement: surviving notional plus accumulated recoveries.
    ret += curve.discounts[maturity - 1] * (notional_t + rec * (n0 - notional_t));
    return ret;
}

ReturnDistribution scenario_returns(const CdxTranche& tranche, const ScenarioSet& set,
                                    const RateCurve& curve) {
    const auto report = validate_tranche(tranche, set.n_firms());
    if (!report.empty())
        throw std::invalid_argument("scenario_returns: " + report.front());
    const DefaultCounts dc = default_counts(set, tranche.members);
    ReturnDistribution dist;
    dist.returns.resize(set.n_scenarios);
    for (int k = 0; k < set.n_scenarios; ++k)
        dist.returns[k] = discounted_return(tranche, dc.path(k), curve);
    return dist;
}

double expected_return(const CdxTranche& tranche, const ScenarioSet& set,
                       const RateCurve& curve) {
    const auto dist = scenario_returns(tranche, set, curve);
    return std::accumulate(dist.returns.begin(), dist.returns.end(), 0.0) /
           static_cast<double>(dist.returns.size());
}

double fair_spread(const CdxTranche& tranche, const ScenarioSet& set, const RateCurve& curve,
                   double tol) {
    // E[R] is affine and increasing in the spread: the spread pays on the
    // discounted surviving notional. Bisection still does the root work so
    // the tolerance contract is explicit.
    CdxTranche probe = tranche;
    probe.spread = 0.0;
    const DefaultCounts dc = default_counts(set, tranche.members);
    const auto report = validate_tranche(probe, set.n_firms());
    if (!report.empty())
        throw std::invalid_argument("fair_spread: " + report.front());

    double base = 0.0;    // mean return at spread 0
    double annuity = 0.0; // mean discounted surviving notional
    for (int k = 0; k < set.n_scenarios; ++k) {
        base += discounted_return(probe, dc.path(k), curve);
        for (int t = 1; t <= probe.maturity; ++t)
            annuity += curve.discounts[t - 1] *
                       tranche_notional(probe, loss_fraction(dc.at(k, t), probe));
    }
    base /= set.n_scenarios;
    annuity /= set.n_scenarios;
    if (annuity <= 0.0)
        throw NoBracket("fair_spread: tranche '" + tranche.name +
                        "' is wiped out immediately in every scenario");

    const auto mean_return = [&](double s) { return base + s * annuity; };
    const double target = tol * tranche.notional0;
    double lo = -1.0, hi = 1.0;
    while (mean_return(lo) > 0.0)
        lo *= 2.0;
    while (mean_return(hi) < 0.0)
        hi *= 2.0;
    double mid = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200; ++iter) {
        mid = 0.5 * (lo + hi);
        const double v = mean_return(mid);
        if (std::abs(v) <= target)
            break;
        (v < 0.0 ? lo : hi) = mid;
    }
    return mid;
}

// ---------------------------------------------------------------------------
// Loss statistics
// ---------------------------------------------------------------------------

double empirical_var(std::span<const double> losses, double alpha) {
    if (losses.empty())
        throw std::invalid_argument("empirical_var: empty distribution");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("empirical_var: alpha outside (0,1)");
    std::vector<double> sorted(losses.begin(), losses.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    // Smallest k with k/n >= alpha. The small slack keeps rounding noise in
    // alpha*n (e.g. 0.9 * 10 = 9.000000000000002) from bumping the index.
    std::size_t k =
        static_cast<std::size_t>(std::ceil(alpha * static_cast<double>(n) - 1e-9));
    k = std::max<std::size_t>(k, 1);
    k = std::min(k, n);
    return sorted[k - 1];
}

double empirical_cvar(std::span<const double> losses, double alpha) {
    const double var = empirical_var(losses, alpha);
    const double n = static_cast<double>(losses.size());
    double excess = 0.0;
    for (double l : losses)
        excess += std::max(l - var, 0.0);
    return var + excess / ((1.0 - alpha) * n);
}

RiskStats risk_stats(const ReturnDistribution& dist, double alpha, int bins) {
    if (dist.returns.empty())
        throw std::invalid_argument("risk_stats: empty distribution");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("risk_stats: alpha outside (0,1)");
    if (bins < 1)
        throw std::invalid_argument("risk_stats: need at least one bin");

    std::vector<double> losses(dist.returns.size());
    std::transform(dist.returns.begin(), dist.returns.end(), losses.begin(),
                   [](double r) { return -r; });

    RiskStats stats;
    stats.mean = std::accumulate(losses.begin(), losses.end(), 0.0) /
                 static_cast<double>(losses.size());
    stats.var = empirical_var(losses, alpha);
    stats.cvar = empirical_cvar(losses, alpha);

    const auto [mn_it, mx_it] = std::minmax_element(losses.begin(), losses.end());
    const double mn = *mn_it, mx = *mx_it;
    if (mx <= mn) {
        stats.histogram.push_back({mn, mx, static_cast<long long>(losses.size())});
        return stats;
    }
    stats.histogram.resize(bins);
    const double width = (mx - mn) / bins;
    for (int b = 0; b < bins; ++b) {
        stats.histogram[b].left = mn + b * width;
        stats.histogram[b].right = (b + 1 == bins) ? mx : mn + (b + 1) * width;
    }
    for (double l : losses) {
        int b = static_cast<int>((l - mn) / width);
        b = std::clamp(b, 0, bins - 1);
        ++stats.histogram[b].count;
    }
    return stats;
}

std::string risk_stats_to_json(const RiskStats& stats, double alpha) {
    nlohmann::json j;
    j["alpha"] = alpha;
    j["mean_loss"] = stats.mean;
    j["mean_return"] = -stats.mean;
    j["var"] = stats.var;
    j["cvar"] = stats.cvar;
    nlohmann::json hist = nlohmann::json::array();
    for (const auto& bin : stats.histogram)
        hist.push_back({{"left", bin.left}, {"right", bin.right}, {"count", bin.count}});
    j["histogram"] = hist;
    return j.dump(2);
}

void write_histogram_csv(const RiskStats& stats, std::ostream& out) {
    out << "bin_left,bin_right,count\n";
    out.precision(17);
    for (const auto& bin : stats.histogram)
        out << bin.left << ',' << bin.right << ',' << bin.count << '\n';
}

} // namespace cmc
