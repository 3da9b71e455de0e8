#pragma once

// Core types of the coupled Markov chain (CMC) rating model.
//
// Rating classes are 1-based throughout: class 1 is the safest non-default
// class, class M+1 is the absorbing default class. The transition matrix
// stores the M non-default rows only; the default row is implicit (unit
// mass on M+1). Sector indices are 1-based as well.
//
// All types are immutable after construction and safe to share across
// threads; sampling takes an explicit Rng so parallel callers use
// independent streams.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cmc {

class Rng;

struct RatingScale {
    int m_nondefault = 0;            // M
    std::vector<std::string> labels; // optional, size M+1 when present

    int default_class() const { return m_nondefault + 1; }
    int n_classes() const { return m_nondefault + 1; }
};

// Per-year transition probabilities p_{i,j}, i = 1..M, j = 1..M+1.
class TransitionMatrix {
  public:
    TransitionMatrix() = default;
    TransitionMatrix(int m_nondefault, std::vector<double> row_major);

    int rows() const { return m_; }
    int cols() const { return m_ + 1; }
    double at(int from, int to) const { return p_[(from - 1) * (m_ + 1) + (to - 1)]; }
    std::span<const double> row(int from) const {
        return {p_.data() + (from - 1) * (m_ + 1), static_cast<std::size_t>(m_ + 1)};
    }
    // Probability of a non-deteriorating move out of class i (sum of the
    // first i entries of row i).
    double p_plus(int from) const { return plus_[from - 1]; }
    double p_minus(int from) const { return 1.0 - plus_[from - 1]; }
    const std::vector<double>& data() const { return p_; }

  private:
    int m_ = 0;
    std::vector<double> p_;    // M x (M+1) row-major
    std::vector<double> plus_; // M
};

// q_{m,s}: probability that a firm in class m, sector s follows its
// idiosyncratic component.
class CouplingMatrix {
  public:
    CouplingMatrix() = default;
    CouplingMatrix(int m_nondefault, int sectors, std::vector<double> row_major);

    int rows() const { return m_; }
    int sectors() const { return s_; }
    double at(int m, int s) const { return q_[(m - 1) * s_ + (s - 1)]; }
    const std::vector<double>& data() const { return q_; }

  private:
    int m_ = 0;
    int s_ = 0;
    std::vector<double> q_; // M x S row-major
};

// Joint law of the tendency vector chi in {0,1}^M, stored dense over all
// 2^M outcomes. Outcome index encoding: bit i-1 of the index is chi_i.
class TendencyDistribution {
  public:
    static constexpr int kMaxClasses = 16; // dense-storage cap on M

    TendencyDistribution() = default;
    TendencyDistribution(int m_nondefault, std::vector<double> mass);

    int m_nondefault() const { return m_; }
    std::size_t n_outcomes() const { return mass_.size(); }
    double mass(std::uint32_t chi) const { return mass_[chi]; }
    const std::vector<double>& masses() const { return mass_; }

    double total_mass() const;
    // P(chi_cls = 1)
    double marginal(int cls) const;
    std::uint32_t sample(Rng& rng) const;

    static bool bit(std::uint32_t chi, int cls) { return (chi >> (cls - 1)) & 1u; }
    // Product measure with the given success probabilities (independent
    // tendencies); satisfies the marginal constraints by construction.
    static TendencyDistribution independent(std::span<const double> p_plus);

  private:
    int m_ = 0;
    std::vector<double> mass_; // 2^M
};

struct ModelParams {
    RatingScale scale;
    TransitionMatrix p;
    CouplingMatrix q;
    TendencyDistribution chi;

    int m() const { return scale.m_nondefault; }
    int sectors() const { return q.sectors(); }
};

struct FirmState {
    int rating = 1; // 1..M+1
    int sector = 1; // 1..S
};

// JSON serialization per the model-parameter schema:
// {"M", "S", "P" (M*(M+1) row-major), "Q" (M*S row-major),
//  "chi" (2^M, index bit i-1 = chi_i)}. Values are re-validated on load.
std::string params_to_json(const ModelParams& params);
ModelParams params_from_json(const std::string& text);
std::uint64_t params_fingerprint(const ModelParams& params);

} // namespace cmc
