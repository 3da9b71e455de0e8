#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cmc/errors.hpp"
#include "cmc/simulation.hpp"
#include "cmc/rng.hpp"
#include "helpers.hpp"

using namespace cmc;
using namespace cmc::test;
namespace fs = std::filesystem;

namespace {

fs::path temp_file(const char* name) {
    return fs::temp_directory_path() / name;
}

} // namespace

TEST_CASE("simulation is reproducible bit for bit") {
    Rng rng(1);
    const auto params = random_params(3, 2, rng, 0.7);
    const auto universe = make_universe(20, 3, 2, rng);
    const auto a = simulate(params, universe, 6, 50, 424242);
    const auto b = simulate(params, universe, 6, 50, 424242);
    CHECK(a.paths == b.paths);
    CHECK(a.params_fingerprint == b.params_fingerprint);
}

TEST_CASE("scenario prefixes are stable under scenario-count changes") {
    Rng rng(2);
    const auto params = random_params(2, 1, rng, 0.4);
    const auto universe = make_universe(5, 2, 1, rng);
    const auto small = simulate(params, universe, 4, 10, 9);
    const auto large = simulate(params, universe, 4, 40, 9);
    for (int k = 0; k < 10; ++k)
        for (int t = 1; t <= 4; ++t)
            for (int f = 0; f < 5; ++f)
                CHECK(small.rating(k, t, f) == large.rating(k, t, f));
}

TEST_CASE("no-movement dynamics freeze every path") {
    ModelParams params;
    params.scale.m_nondefault = 2;
    params.p = TransitionMatrix(2, {1, 0, 0, 0, 1, 0});
    params.q = CouplingMatrix(2, 1, {0.5, 0.5});
    params.chi = TendencyDistribution::independent(tendency_probabilities(params.p));
    REQUIRE(validate(params).empty());

    const std::vector<FirmState> universe = {{1, 1}, {2, 1}, {1, 1}};
    const auto set = simulate(params, universe, 5, 30, 3);
    for (int k = 0; k < 30; ++k)
        for (int t = 1; t <= 5; ++t)
            for (int f = 0; f < 3; ++f)
                CHECK(set.rating(k, t, f) == universe[f].rating);
}

TEST_CASE("default counts are cumulative and monotone") {
    const auto params = make_params(five_class_p(), 2, 0.5, 0.5);
    Rng rng(5);
    const auto universe = make_universe(40, 5, 2, rng);
    const auto set = simulate(params, universe, 10, 200, 77);
    std::vector<int> members(40);
    for (int f = 0; f < 40; ++f)
        members[f] = f;
    const auto dc = default_counts(set, members);
    for (int k = 0; k < 200; ++k) {
        CHECK(dc.at(k, 0) == 0);
        for (int t = 1; t <= 10; ++t)
            CHECK(dc.at(k, t) >= dc.at(k, t - 1));
    }
}

TEST_CASE("a default raises the count permanently") {
    // Class 1 jumps straight to default (class 2) with probability one.
    ModelParams params;
    params.scale.m_nondefault = 1;
    params.p = TransitionMatrix(1, {0.0, 1.0});
    params.q = CouplingMatrix(1, 1, {1.0});
    params.chi = TendencyDistribution::independent(tendency_probabilities(params.p));

    const std::vector<FirmState> universe = {{1, 1}};
    const auto set = simulate(params, universe, 4, 3, 1);
    const std::vector<int> members = {0};
    const auto dc = default_counts(set, members);
    for (int k = 0; k < 3; ++k) {
        CHECK(dc.at(k, 0) == 0);
        for (int t = 1; t <= 4; ++t)
            CHECK(dc.at(k, t) == 1);
    }
}

TEST_CASE("unknown members are rejected") {
    Rng rng(6);
    const auto params = random_params(2, 1, rng);
    const auto universe = make_universe(3, 2, 1, rng);
    const auto set = simulate(params, universe, 2, 2, 1);
    const std::vector<int> members = {0, 3};
    CHECK_THROWS_AS((void)default_counts(set, members), UnknownFirm);
}

TEST_CASE("safer initial portfolios default less") {
    const auto params = make_params(five_class_p(), 1, 0.5, 0.5);
    const std::vector<FirmState> safe(60, FirmState{1, 1});
    const std::vector<FirmState> risky(60, FirmState{4, 1});
    const auto set_safe = simulate(params, safe, 10, 400, 11);
    const auto set_risky = simulate(params, risky, 10, 400, 11);
    std::vector<int> members(60);
    for (int f = 0; f < 60; ++f)
        members[f] = f;
    const auto dc_safe = default_counts(set_safe, members);
    const auto dc_risky = default_counts(set_risky, members);
    long long total_safe = 0, total_risky = 0;
    for (int k = 0; k < 400; ++k) {
        total_safe += dc_safe.at(k, 10);
        total_risky += dc_risky.at(k, 10);
    }
    CHECK(total_safe < total_risky);
}

TEST_CASE("scenario files round trip losslessly") {
    Rng rng(7);
    const auto params = random_params(3, 2, rng, 0.6);
    const auto universe = make_universe(8, 3, 2, rng);
    auto set = simulate(params, universe, 5, 25, 123);
    set.firm_ids.resize(8);
    for (int f = 0; f < 8; ++f)
        set.firm_ids[f] = "FIRM" + std::to_string(f);

    const auto path = temp_file("cmc_roundtrip.cmcs");
    save_scenarios(set, path.string());
    const auto loaded = load_scenarios(path.string());
    CHECK(loaded.n_scenarios == set.n_scenarios);
    CHECK(loaded.horizon == set.horizon);
    CHECK(loaded.m_nondefault == set.m_nondefault);
    CHECK(loaded.seed == set.seed);
    CHECK(loaded.params_fingerprint == set.params_fingerprint);
    CHECK(loaded.paths == set.paths);
    CHECK(loaded.firm_ids == set.firm_ids);
    REQUIRE(loaded.firms.size() == set.firms.size());
    for (std::size_t f = 0; f < set.firms.size(); ++f) {
        CHECK(loaded.firms[f].rating == set.firms[f].rating);
        CHECK(loaded.firms[f].sector == set.firms[f].sector);
    }
    fs::remove(path);
}

TEST_CASE("malformed scenario files are diagnosed") {
    const auto path = temp_file("cmc_malformed.cmcs");

    SUBCASE("bad magic") {
        std::ofstream out(path, std::ios::binary);
        out << "NOTCM000000";
        out.close();
        CHECK_THROWS_WITH_AS((void)load_scenarios(path.string()),
                             doctest::Contains("bad magic"), FormatError);
    }
    SUBCASE("truncated payload") {
        Rng rng(8);
        const auto params = random_params(2, 1, rng);
        const auto universe = make_universe(4, 2, 1, rng);
        const auto set = simulate(params, universe, 3, 5, 2);
        save_scenarios(set, path.string());
        fs::resize_file(path, fs::file_size(path) - 7);
        CHECK_THROWS_WITH_AS((void)load_scenarios(path.string()),
                             doctest::Contains("truncated payload"), FormatError);
    }
    fs::remove(path);
}

TEST_CASE("absorption violations are rejected on load") {
    ModelParams params;
    params.scale.m_nondefault = 1;
    params.p = TransitionMatrix(1, {0.0, 1.0});
    params.q = CouplingMatrix(1, 1, {1.0});
    params.chi = TendencyDistribution::independent(tendency_probabilities(params.p));
    const std::vector<FirmState> universe = {{1, 1}};
    const auto set = simulate(params, universe, 3, 1, 1); // path: 2,2,2

    const auto path = temp_file("cmc_absorb.cmcs");
    save_scenarios(set, path.string());
    // Corrupt the last byte: revive the defaulted firm.
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(-1, std::ios::end);
        const char revived = 1;
        f.write(&revived, 1);
    }
    CHECK_THROWS_WITH_AS((void)load_scenarios(path.string()), doctest::Contains("absorbing"),
                         FormatError);
    fs::remove(path);
}

TEST_CASE("csv export lists every cell") {
    Rng rng(9);
    const auto params = random_params(2, 1, rng);
    const auto universe = make_universe(3, 2, 1, rng);
    const auto set = simulate(params, universe, 2, 4, 6);
    std::ostringstream out;
    export_scenarios_csv(set, out);
    std::istringstream in(out.str());
    std::string line;
    int lines = 0;
    while (std::getline(in, line))
        ++lines;
    CHECK(lines == 1 + 4 * 3 * 3); // header + scenarios * (T+1) * firms
}
