#pragma once

// One-step joint transition law of the coupled Markov chain: exact
// probabilities and a seedable sampler.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cmc/types.hpp"

namespace cmc {

class Rng;

// Checks every model invariant and returns one message per violation
// (empty result = valid). marginal_tol bounds the allowed mismatch between
// the tendency marginals and p_plus.
std::vector<std::string> validate(const ModelParams& params, double marginal_tol = 1e-8);

// p_plus[i] = sum_{j<=i} p_{i,j} for i = 1..M.
std::vector<double> tendency_probabilities(const TransitionMatrix& p);

// Magnitude law of a move out of from_class conditional on the tendency:
// tendency 1 restricts to classes j <= i, tendency 0 to j > i. Returned
// vector has one entry per class 1..M+1.
// Throws DegenerateTendency when the conditioning event has probability 0.
std::vector<double> conditional_magnitude(const TransitionMatrix& p, int from_class, int tendency);

// Influence function of the Bernoulli mixture view: probability that the
// firm defaults in one step given the tendency vector chi_bar.
double mixture_default_probability(const ModelParams& params, const FirmState& state,
                                   std::uint32_t chi_bar);

// One joint step for all firms. Draw order: one tendency vector chi, then
// per firm (in input order) the mixing indicator delta and exactly one
// magnitude variate. Defaulted firms receive no draws and stay defaulted.
std::vector<int> step_joint(const ModelParams& params, std::span<const FirmState> states,
                            Rng& rng);

// Exact probability of a joint one-step outcome by full enumeration over
// tendency vectors and mixing indicators. Guarded to M <= 6 and at most 12
// non-defaulted firms (throws TooLarge beyond that).
double joint_step_probability(const ModelParams& params, std::span<const FirmState> states,
                              std::span<const int> outcomes);

} // namespace cmc
