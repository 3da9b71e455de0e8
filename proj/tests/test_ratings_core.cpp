#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "cmc/errors.hpp"
#include "cmc/ratings_core.hpp"
#include "cmc/rng.hpp"
#include "helpers.hpp"

using namespace cmc;
using namespace cmc::test;

TEST_CASE("tendency probabilities of the five-class matrix") {
    const auto p = five_class_p();
    const auto plus = tendency_probabilities(p);
    REQUIRE(plus.size() == 5);
    // Published figures are 4-decimal; rows were renormalized.
    CHECK(plus[0] == doctest::Approx(0.9191).epsilon(3e-4));
    CHECK(plus[1] == doctest::Approx(0.0335 + 0.8958).epsilon(3e-4));
}

TEST_CASE("tendency probabilities of a no-move matrix are one") {
    std::vector<double> p = {1, 0, 0, 0, 1, 0}; // p_{i,i} = 1, M = 2
    const TransitionMatrix tm(2, p);
    for (double v : tendency_probabilities(tm))
        CHECK(v == doctest::Approx(1.0));
}

TEST_CASE("conditional magnitude from class 1 given an up move is a point mass") {
    const auto p = five_class_p();
    const auto mag = conditional_magnitude(p, 1, 1);
    CHECK(mag[0] == doctest::Approx(1.0));
    for (int j = 1; j < 6; ++j)
        CHECK(mag[j] == 0.0);
}

TEST_CASE("conditional magnitude from class 2 given a down move") {
    const auto p = five_class_p();
    const auto mag = conditional_magnitude(p, 2, 0);
    const double denom = p.p_minus(2);
    CHECK(mag[0] == 0.0);
    CHECK(mag[1] == 0.0);
    CHECK(mag[2] == doctest::Approx(p.at(2, 3) / denom));
    CHECK(mag[3] == doctest::Approx(p.at(2, 4) / denom));
    CHECK(mag[4] == doctest::Approx(p.at(2, 5) / denom));
    CHECK(mag[5] == doctest::Approx(p.at(2, 6) / denom));
    double sum = 0.0;
    for (double v : mag)
        sum += v;
    CHECK(sum == doctest::Approx(1.0));
}

TEST_CASE("conditional magnitude on a probability-zero branch throws") {
    std::vector<double> p = {1, 0, 0, 0.5, 0.4, 0.1};
    const TransitionMatrix tm(2, p);
    CHECK_THROWS_AS((void)conditional_magnitude(tm, 1, 0), DegenerateTendency);
}

TEST_CASE("validate accepts a consistent model") {
    const auto params = make_params(five_class_p(), 6, 0.5, 0.4);
    CHECK(validate(params).empty());
}

TEST_CASE("validate reports broken row sums and marginals") {
    auto params = make_params(five_class_p(), 2, 0.5);

    SUBCASE("scaled row") {
        auto data = params.p.data();
        for (int j = 0; j < 6; ++j)
            data[j] *= 0.9;
        params.p = TransitionMatrix(5, data);
        // chi marginals now also disagree with the rescaled p_plus.
        bool row_sum = false;
        for (const auto& v : validate(params))
            if (v.find("row 1") != std::string::npos)
                row_sum = true;
        CHECK(row_sum);
    }

    SUBCASE("perturbed tendency marginal") {
        auto mass = params.chi.masses();
        mass[0] += 0.01;
        mass[1] -= 0.01;
        params.chi = TendencyDistribution(5, mass);
        bool marginal = false;
        for (const auto& v : validate(params))
            if (v.find("marginal") != std::string::npos)
                marginal = true;
        CHECK(marginal);
    }

    SUBCASE("coupling out of range") {
        std::vector<double> q(10, 0.5);
        q[3] = 1.5;
        params.q = CouplingMatrix(5, 2, q);
        CHECK_FALSE(validate(params).empty());
    }
}

TEST_CASE("mixture default probability") {
    SUBCASE("hand-evaluated two-state chain") {
        const TransitionMatrix p(1, {0.8, 0.2});
        ModelParams params;
        params.scale.m_nondefault = 1;
        params.p = p;
        params.q = CouplingMatrix(1, 1, {0.5});
        params.chi = TendencyDistribution::independent(tendency_probabilities(p));
        CHECK(mixture_default_probability(params, {1, 1}, 0u) == doctest::Approx(0.6));
        // chi_1 = 1: only the idiosyncratic route defaults.
        CHECK(mixture_default_probability(params, {1, 1}, 1u) == doctest::Approx(0.1));
    }

    SUBCASE("q = 1 reduces to the marginal default probability") {
        auto params = make_params(five_class_p(), 2, 1.0);
        for (std::uint32_t chi : {0u, 7u, 31u})
            CHECK(mixture_default_probability(params, {3, 1}, chi) ==
                  doctest::Approx(params.p.at(3, 6)));
    }
}

TEST_CASE("joint step probability equals the transition row for one firm") {
    Rng rng(100);
    const auto params = random_params(2, 2, rng);
    const FirmState firm{2, 1};
    for (int j = 1; j <= 3; ++j) {
        const std::vector<FirmState> states = {firm};
        const std::vector<int> outcome = {j};
        CHECK(joint_step_probability(params, states, outcome) ==
              doctest::Approx(params.p.at(2, j)).epsilon(1e-12));
    }
}

TEST_CASE("joint outcome probabilities sum to one") {
    Rng rng(200);
    const auto params = random_params(2, 2, rng, 0.8);
    const std::vector<FirmState> states = {{1, 1}, {2, 2}};
    double total = 0.0;
    for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b) {
            const std::vector<int> outcome = {a, b};
            total += joint_step_probability(params, states, outcome);
        }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("fully idiosyncratic firms are independent") {
    Rng rng(300);
    auto params = random_params(2, 1, rng);
    params.q = CouplingMatrix(2, 1, {1.0, 1.0});
    const std::vector<FirmState> states = {{1, 1}, {2, 1}};
    for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b) {
            const std::vector<int> outcome = {a, b};
            CHECK(joint_step_probability(params, states, outcome) ==
                  doctest::Approx(params.p.at(1, a) * params.p.at(2, b)).epsilon(1e-12));
        }
}

TEST_CASE("coupling preserves the marginal law") {
    Rng rng(400);
    for (int trial = 0; trial < 5; ++trial) {
        const auto params = random_params(3, 2, rng, 0.9);
        for (int from = 1; from <= 3; ++from)
            for (int to = 1; to <= 4; ++to) {
                const std::vector<FirmState> states = {{from, 1 + trial % 2}};
                const std::vector<int> outcome = {to};
                CHECK(joint_step_probability(params, states, outcome) ==
                      doctest::Approx(params.p.at(from, to)).epsilon(1e-12));
            }
    }
}

TEST_CASE("enumeration guards reject oversized instances") {
    Rng rng(500);
    const auto params7 = random_params(7, 1, rng);
    const std::vector<FirmState> one = {{1, 1}};
    const std::vector<int> out_one = {1};
    CHECK_THROWS_AS((void)joint_step_probability(params7, one, out_one), TooLarge);

    const auto params2 = random_params(2, 1, rng);
    const std::vector<FirmState> many(13, FirmState{1, 1});
    const std::vector<int> outs(13, 1);
    CHECK_THROWS_AS((void)joint_step_probability(params2, many, outs), TooLarge);
}

TEST_CASE("defaulted firms never move") {
    const auto params = make_params(five_class_p(), 2, 0.5, 0.3);
    const std::vector<FirmState> states = {{6, 1}, {6, 2}, {6, 1}};
    Rng rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto next = step_joint(params, states, rng);
        for (int v : next)
            CHECK(v == 6);
    }
}

TEST_CASE("sampled one-step frequencies match the transition row") {
    const auto params = make_params(five_class_p(), 2, 0.4, 0.5);
    const std::vector<FirmState> states = {{2, 1}};
    Rng rng(123);
    const int n = 1000000;
    std::vector<int> hits(7, 0);
    for (int i = 0; i < n; ++i)
        ++hits[step_joint(params, states, rng)[0]];
    for (int j = 1; j <= 6; ++j)
        CHECK(std::abs(static_cast<double>(hits[j]) / n - params.p.at(2, j)) < 0.005);
}

TEST_CASE("sampled tendency marginals match p_plus") {
    const auto params = make_params(five_class_p(), 2, 0.4, 0.6);
    Rng rng(321);
    const int n = 1000000;
    std::vector<int> ones(5, 0);
    for (int i = 0; i < n; ++i) {
        const auto chi = params.chi.sample(rng);
        for (int cls = 1; cls <= 5; ++cls)
            if (TendencyDistribution::bit(chi, cls))
                ++ones[cls - 1];
    }
    for (int cls = 1; cls <= 5; ++cls)
        CHECK(std::abs(static_cast<double>(ones[cls - 1]) / n - params.p.p_plus(cls)) < 0.005);
}

TEST_CASE("independent firms have product joint frequencies") {
    Rng seed_rng(600);
    auto params = random_params(2, 1, seed_rng);
    params.q = CouplingMatrix(2, 1, {1.0, 1.0});
    const std::vector<FirmState> states = {{1, 1}, {2, 1}};
    Rng rng(77);
    const int n = 1000000;
    std::map<std::pair<int, int>, int> hits;
    for (int i = 0; i < n; ++i) {
        const auto next = step_joint(params, states, rng);
        ++hits[{next[0], next[1]}];
    }
    for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b) {
            const double expected = params.p.at(1, a) * params.p.at(2, b);
            const double observed = static_cast<double>(hits[{a, b}]) / n;
            CHECK(std::abs(observed - expected) < 0.005);
        }
}

TEST_CASE("sampler agrees with the enumeration oracle") {
    Rng seed_rng(700);
    const auto params = random_params(2, 2, seed_rng, 0.9);
    const std::vector<FirmState> states = {{1, 1}, {2, 2}};
    Rng rng(888);
    const int n = 1000000;
    std::map<std::pair<int, int>, int> hits;
    for (int i = 0; i < n; ++i) {
        const auto next = step_joint(params, states, rng);
        ++hits[{next[0], next[1]}];
    }
    for (int a = 1; a <= 3; ++a)
        for (int b = 1; b <= 3; ++b) {
            const std::vector<int> outcome = {a, b};
            const double exact = joint_step_probability(params, states, outcome);
            const double observed = static_cast<double>(hits[{a, b}]) / n;
            CHECK(std::abs(observed - exact) < 0.005);
        }
}

TEST_CASE("params JSON round trip") {
    const auto params = make_params(five_class_p(), 6, 0.35, 0.55);
    const auto restored = params_from_json(params_to_json(params));
    CHECK(restored.m() == 5);
    CHECK(restored.sectors() == 6);
    CHECK(validate(restored).empty());
    for (int i = 1; i <= 5; ++i)
        for (int j = 1; j <= 6; ++j)
            CHECK(restored.p.at(i, j) == params.p.at(i, j));
    CHECK(params_fingerprint(restored) == params_fingerprint(params));
}
