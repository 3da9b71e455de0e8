#include "cmc/simulation.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <ostream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cmc/errors.hpp"
#include "cmc/hash.hpp"
#include "cmc/ratings_core.hpp"
#include "cmc/rng.hpp"

namespace cmc {

namespace {

constexpr char kMagic[5] = {'C', 'M', 'C', 'S', '1'};

std::string default_firm_id(int firm) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "F%04d", firm);
    return buf;
}

} // namespace

ScenarioSet simulate(const ModelParams& params, std::span<const FirmState> initial, int horizon,
                     int n_scenarios, std::uint64_t seed) {
    if (horizon < 1)
        throw std::invalid_argument("simulate: horizon must be >= 1");
    if (n_scenarios < 1)
        throw std::invalid_argument("simulate: need at least one scenario");
    if (initial.empty())
        throw std::invalid_argument("simulate: empty firm universe");

    ScenarioSet set;
    set.n_scenarios = n_scenarios;
    set.horizon = horizon;
    set.m_nondefault = params.m();
    set.firms.assign(initial.begin(), initial.end());
    set.seed = seed;
    set.params_fingerprint = params_fingerprint(params);
    set.paths.resize(static_cast<std::size_t>(n_scenarios) * horizon * initial.size());

    const Rng root(seed);
    std::vector<FirmState> states(initial.begin(), initial.end());
    for (int k = 0; k < n_scenarios; ++k) {
        Rng rng = root.split(static_cast<std::uint64_t>(k));
        states.assign(initial.begin(), initial.end());
        for (int t = 1; t <= horizon; ++t) {
            const auto next = step_joint(params, states, rng);
            auto* row = set.paths.data() +
                        (static_cast<std::size_t>(k) * horizon + (t - 1)) * initial.size();
            for (std::size_t n = 0; n < next.size(); ++n) {
                row[n] = static_cast<std::uint8_t>(next[n]);
                states[n].rating = next[n];
            }
        }
    }
    return set;
}

DefaultCounts default_counts(const ScenarioSet& set, std::span<const int> members) {
    for (int f : members)
        if (f < 0 || f >= set.n_firms())
            throw UnknownFirm("default_counts: firm index " + std::to_string(f) +
                              " outside universe of " + std::to_string(set.n_firms()));
    if (set.m_nondefault < 1)
        throw std::invalid_argument("default_counts: scenario set lacks the class count");
    const int dflt_class = set.m_nondefault + 1;

    DefaultCounts dc;
    dc.n_scenarios = set.n_scenarios;
    dc.horizon = set.horizon;
    dc.counts.resize(static_cast<std::size_t>(set.n_scenarios) * (set.horizon + 1));
    for (int k = 0; k < set.n_scenarios; ++k) {
        for (int t = 0; t <= set.horizon; ++t) {
            int n_def = 0;
            for (int f : members)
                if (set.rating(k, t, f) == dflt_class)
                    ++n_def;
            dc.counts[static_cast<std::size_t>(k) * (set.horizon + 1) + t] = n_def;
        }
    }
    return dc;
}

void save_scenarios(const ScenarioSet& set, const std::string& path) {
    nlohmann::json meta;
    meta["n_scenarios"] = set.n_scenarios;
    meta["T"] = set.horizon;
    meta["M"] = set.m_nondefault;
    nlohmann::json firms = nlohmann::json::array();
    for (const auto& st : set.firms)
        firms.push_back({{"rating", st.rating}, {"sector", st.sector}});
    meta["firms"] = firms;
    if (!set.firm_ids.empty())
        meta["firm_ids"] = set.firm_ids;
    meta["seed"] = set.seed;
    meta["params_fingerprint"] = to_hex(set.params_fingerprint);
    const std::string meta_str = meta.dump();

    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("save_scenarios: cannot open '" + path + "' for writing");
    out.write(kMagic, sizeof(kMagic));
    const std::uint32_t len = static_cast<std::uint32_t>(meta_str.size());
    unsigned char len_bytes[4] = {static_cast<unsigned char>(len & 0xff),
                                  static_cast<unsigned char>((len >> 8) & 0xff),
                                  static_cast<unsigned char>((len >> 16) & 0xff),
                                  static_cast<unsigned char>((len >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(len_bytes), 4);
    out.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
    out.write(reinterpret_cast<const char*>(set.paths.data()),
              static_cast<std::streamsize>(set.paths.size()));
    if (!out)
        throw DataError("save_scenarios: write to '" + path + "' failed");
}

ScenarioSet load_scenarios(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("load_scenarios: cannot open '" + path + "'");
    char magic[5];
    if (!in.read(magic, 5) || std::memcmp(magic, kMagic, 5) != 0)
        throw FormatError("load_scenarios: '" + path + "': bad magic at offset 0");
    unsigned char len_bytes[4];
    if (!in.read(reinterpret_cast<char*>(len_bytes), 4))
        throw FormatError("load_scenarios: '" + path + "': truncated metadata length at offset 5");
    const std::uint32_t len = static_cast<std::uint32_t>(len_bytes[0]) |
                              (static_cast<std::uint32_t>(len_bytes[1]) << 8) |
                              (static_cast<std::uint32_t>(len_bytes[2]) << 16) |
                              (static_cast<std::uint32_t>(len_bytes[3]) << 24);
    std::string meta_str(len, '\0');
    if (!in.read(meta_str.data(), len))
        throw FormatError("load_scenarios: '" + path + "': truncated metadata at offset 9");

    ScenarioSet set;
    try {
        const nlohmann::json meta = nlohmann::json::parse(meta_str);
        set.n_scenarios = meta.at("n_scenarios").get<int>();
        set.horizon = meta.at("T").get<int>();
        set.m_nondefault = meta.at("M").get<int>();
        for (const auto& j : meta.at("firms"))
            set.firms.push_back({j.at("rating").get<int>(), j.at("sector").get<int>()});
        if (meta.contains("firm_ids"))
            set.firm_ids = meta["firm_ids"].get<std::vector<std::string>>();
        set.seed = meta.at("seed").get<std::uint64_t>();
        set.params_fingerprint =
            std::stoull(meta.at("params_fingerprint").get<std::string>(), nullptr, 16);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("load_scenarios: '" + path + "': bad metadata: " + e.what());
    }
    if (set.n_scenarios < 1 || set.horizon < 1 || set.firms.empty())
        throw FormatError("load_scenarios: '" + path + "': inconsistent metadata");

    const std::size_t payload =
        static_cast<std::size_t>(set.n_scenarios) * set.horizon * set.firms.size();
    set.paths.resize(payload);
    if (!in.read(reinterpret_cast<char*>(set.paths.data()),
                 static_cast<std::streamsize>(payload)))
        throw FormatError("load_scenarios: '" + path + "': truncated payload at offset " +
                          std::to_string(9 + len));
    in.peek();
    if (!in.eof())
        throw FormatError("load_scenarios: '" + path + "': trailing bytes after payload");

    // Re-validate invariants: class range and absorption per path.
    const int dflt_class = set.m_nondefault + 1;
    for (int k = 0; k < set.n_scenarios; ++k)
        for (std::size_t f = 0; f < set.firms.size(); ++f) {
            int prev = set.firms[f].rating;
            for (int t = 1; t <= set.horizon; ++t) {
                const int r = set.rating(k, t, static_cast<int>(f));
                if (r < 1 || r > dflt_class)
                    throw FormatError("load_scenarios: '" + path + "': class " +
                                      std::to_string(r) + " outside 1.." +
                                      std::to_string(dflt_class) + " in payload");
                if (prev == dflt_class && r != dflt_class)
                    throw FormatError("load_scenarios: '" + path +
                                      "': default state is not absorbing in scenario " +
                                      std::to_string(k));
                prev = r;
            }
        }
    return set;
}

void export_scenarios_csv(const ScenarioSet& set, std::ostream& out) {
    out << "scenario,t,firm_id,rating\n";
    for (int k = 0; k < set.n_scenarios; ++k)
        for (int t = 0; t <= set.horizon; ++t)
            for (int f = 0; f < set.n_firms(); ++f) {
                const std::string& id =
                    set.firm_ids.empty() ? default_firm_id(f) : set.firm_ids[f];
                out << k << ',' << t << ',' << id << ',' << set.rating(k, t, f) << '\n';
            }
}

} // namespace cmc
