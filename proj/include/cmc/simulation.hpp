#pragma once

// Monte Carlo generation of equally weighted joint rating paths, plus
// persistence of scenario sets.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cmc/types.hpp"

namespace cmc {

// Equally weighted joint rating paths for a fixed firm universe. Paths are
// stored for t = 1..horizon; t = 0 is the initial state vector.
struct ScenarioSet {
    int n_scenarios = 0;
    int horizon = 0;
    int m_nondefault = 0;              // class M+1 is the default class
    std::vector<FirmState> firms;      // states at t = 0
    std::vector<std::string> firm_ids; // optional
    std::uint64_t seed = 0;
    std::uint64_t params_fingerprint = 0;
    std::vector<std::uint8_t> paths; // [scenario][t = 1..horizon][firm]

    int n_firms() const { return static_cast<int>(firms.size()); }
    int rating(int scenario, int t, int firm) const {
        if (t == 0)
            return firms[firm].rating;
        return paths[(static_cast<std::size_t>(scenario) * horizon + (t - 1)) * firms.size() +
                     firm];
    }
};

// Iterates the one-step joint law over the horizon. Scenario k draws from
// the substream split(seed, k), so results are reproducible and the first
// k scenarios do not depend on n_scenarios.
ScenarioSet simulate(const ModelParams& params, std::span<const FirmState> initial, int horizon,
                     int n_scenarios, std::uint64_t seed);

// Cumulative default counts D^t per scenario, t = 0..horizon, over the
// given member firms (0-based indices into the scenario set's universe).
struct DefaultCounts {
    int n_scenarios = 0;
    int horizon = 0;
    std::vector<int> counts; // n_scenarios * (horizon + 1)

    int at(int scenario, int t) const {
        return counts[static_cast<std::size_t>(scenario) * (horizon + 1) + t];
    }
    std::span<const int> path(int scenario) const {
        return {counts.data() + static_cast<std::size_t>(scenario) * (horizon + 1),
                static_cast<std::size_t>(horizon + 1)};
    }
};

DefaultCounts default_counts(const ScenarioSet& set, std::span<const int> members);

// Binary format: magic "CMCS1", u32 metadata length, JSON metadata
// {n_scenarios, T, firms, seed, params fingerprint}, payload of one byte
// per cell in scenario-major, time-major, firm-minor order.
void save_scenarios(const ScenarioSet& set, const std::string& path);
ScenarioSet load_scenarios(const std::string& path);

// CSV export: scenario,t,firm_id,rating (t = 0..horizon).
void export_scenarios_csv(const ScenarioSet& set, std::ostream& out);

} // namespace cmc
