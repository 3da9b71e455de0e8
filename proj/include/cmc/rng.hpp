#pragma once

// Deterministic random streams.
//
// The generator is xoshiro256++ seeded through splitmix64 (Blackman/Vigna,
// public domain). Both algorithms are fixed here so that a given seed
// produces the same draws on every platform and compiler. Substreams are
// derived from (seed, key) via splitmix64 mixing, so stream k of a run does
// not depend on how many other streams exist.

#include <cstdint>
#include <span>
#include <stdexcept>

namespace cmc {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t sm = seed;
        for (auto& w : state_)
            w = splitmix64(sm);
    }

    std::uint64_t seed() const { return seed_; }

    // Independent substream keyed by (this stream's seed, key).
    Rng split(std::uint64_t key) const {
        std::uint64_t sm = seed_;
        std::uint64_t h = splitmix64(sm);
        sm = h ^ (key + 0x9e3779b97f4a7c15ULL);
        return Rng(splitmix64(sm));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    // Inverse-CDF sampling with left-closed intervals: outcome k owns
    // [cum_{k-1}, cum_k), so zero-mass outcomes are never drawn. Weights
    // must be nonnegative and sum to approximately one; any residual mass
    // from rounding is assigned to the last positive-weight outcome.
    std::size_t categorical(std::span<const double> weights) {
        const double u = uniform01();
        double cum = 0.0;
        std::size_t last_positive = weights.size();
        for (std::size_t k = 0; k < weights.size(); ++k) {
            if (weights[k] <= 0.0)
                continue;
            cum += weights[k];
            last_positive = k;
            if (u < cum)
                return k;
        }
        if (last_positive == weights.size())
            throw std::invalid_argument("categorical: no positive mass");
        return last_positive;
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::uint64_t seed_ = 0;
    std::uint64_t state_[4] = {};
};

} // namespace cmc
