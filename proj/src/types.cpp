#include "cmc/types.hpp"

#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "cmc/hash.hpp"
#include "cmc/rng.hpp"

namespace cmc {

TransitionMatrix::TransitionMatrix(int m_nondefault, std::vector<double> row_major)
    : m_(m_nondefault), p_(std::move(row_major)) {
    if (m_ < 1)
        throw std::invalid_argument("TransitionMatrix: need at least one non-default class");
    if (p_.size() != static_cast<std::size_t>(m_) * (m_ + 1))
        throw std::invalid_argument("TransitionMatrix: expected M*(M+1) entries");
    plus_.resize(m_);
    for (int i = 1; i <= m_; ++i) {
        double s = 0.0;
        for (int j = 1; j <= i; ++j)
            s += at(i, j);
        plus_[i - 1] = s;
    }
}

CouplingMatrix::CouplingMatrix(int m_nondefault, int sectors, std::vector<double> row_major)
    : m_(m_nondefault), s_(sectors), q_(std::move(row_major)) {
    if (m_ < 1 || s_ < 1)
        throw std::invalid_argument("CouplingMatrix: dimensions must be positive");
    if (q_.size() != static_cast<std::size_t>(m_) * s_)
        throw std::invalid_argument("CouplingMatrix: expected M*S entries");
}

TendencyDistribution::TendencyDistribution(int m_nondefault, std::vector<double> mass)
    : m_(m_nondefault), mass_(std::move(mass)) {
    if (m_ < 1 || m_ > kMaxClasses)
        throw std::invalid_argument("TendencyDistribution: M out of supported range");
    if (mass_.size() != (std::size_t{1} << m_))
        throw std::invalid_argument("TendencyDistribution: expected 2^M masses");
}

double TendencyDistribution::total_mass() const {
    double s = 0.0;
    for (double v : mass_)
        s += v;
    return s;
}

double TendencyDistribution::marginal(int cls) const {
    double s = 0.0;
    for (std::uint32_t chi = 0; chi < mass_.size(); ++chi)
        if (bit(chi, cls))
            s += mass_[chi];
    return s;
}

std::uint32_t TendencyDistribution::sample(Rng& rng) const {
    return static_cast<std::uint32_t>(rng.categorical(mass_));
}

TendencyDistribution TendencyDistribution::independent(std::span<const double> p_plus) {
    const int m = static_cast<int>(p_plus.size());
    std::vector<double> mass(std::size_t{1} << m);
    for (std::uint32_t chi = 0; chi < mass.size(); ++chi) {
        double v = 1.0;
        for (int i = 1; i <= m; ++i)
            v *= bit(chi, i) ? p_plus[i - 1] : 1.0 - p_plus[i - 1];
        mass[chi] = v;
    }
    return {m, std::move(mass)};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

std::vector<double> read_matrix(const nlohmann::json& j, const char* key, std::size_t n_rows,
                                std::size_t n_cols) {
    const auto& node = j.at(key);
    std::vector<double> out;
    out.reserve(n_rows * n_cols);
    if (node.is_array() && !node.empty() && node.front().is_array()) {
        for (const auto& row : node)
            for (const auto& v : row)
                out.push_back(v.get<double>());
    } else {
        for (const auto& v : node)
            out.push_back(v.get<double>());
    }
    if (out.size() != n_rows * n_cols)
        throw std::invalid_argument(std::string("params JSON: '") + key +
                                    "' has the wrong number of entries");
    return out;
}

} // namespace

std::string params_to_json(const ModelParams& params) {
    nlohmann::json j;
    j["M"] = params.m();
    j["S"] = params.sectors();
    j["P"] = params.p.data();
    j["Q"] = params.q.data();
    j["chi"] = params.chi.masses();
    if (!params.scale.labels.empty())
        j["labels"] = params.scale.labels;
    return j.dump();
}

ModelParams params_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const int m = j.at("M").get<int>();
    const int s = j.at("S").get<int>();
    if (m < 1 || m > TendencyDistribution::kMaxClasses || s < 1)
        throw std::invalid_argument("params JSON: M or S out of range");
    ModelParams params;
    params.scale.m_nondefault = m;
    if (j.contains("labels"))
        params.scale.labels = j["labels"].get<std::vector<std::string>>();
    params.p = TransitionMatrix(m, read_matrix(j, "P", m, m + 1));
    params.q = CouplingMatrix(m, s, read_matrix(j, "Q", m, s));
    std::vector<double> chi = j.at("chi").get<std::vector<double>>();
    if (chi.size() != (std::size_t{1} << m))
        throw std::invalid_argument("params JSON: 'chi' must have 2^M entries");
    params.chi = TendencyDistribution(m, std::move(chi));
    return params;
}

std::uint64_t params_fingerprint(const ModelParams& params) {
    return fnv1a64(params_to_json(params));
}

} // namespace cmc
