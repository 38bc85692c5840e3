#pragma once

// Brute-force references. Slow on purpose: each one recomputes its answer
// from the definition rather than from a closed form.

#include <cstddef>
#include <span>
#include <vector>

#include "tsallis/mdp.hpp"
#include "tsallis/qmath.hpp"
#include "tsallis/simplex_opt.hpp"

namespace tsallis::oracles {

// Tries every support size over the sorted actions and returns the single
// feasible candidate. Throws InvariantError when zero or several candidates
// are feasible, PreconditionError for more than 20 actions.
ProbVector sparsemax_by_enumeration(std::span<const double> row, double tau);

// softmax(sum_j Q_j[state] / tau).
ProbVector kl_average_policy(const std::vector<QTable>& q_history, double tau, std::size_t state);

// |exp_q(sum Q_i) - prod_i exp_q(Q_i / (1 + (q-1) sum_{j<i} Q_j))|.
// Throws PreconditionError at q = 1 or if any q-exponential argument clips.
double weighted_average_identity_check(std::span<const double> q_values, EntropicIndex q);

// Exponent applied to (q-1) in the cross terms of the product expansion.
enum class CrossTermExponent { J, TwoJMinusTwo };

// |(prod_j exp_q Q_j)^(q-1) - exp_q(sum Q)^(q-1) - sum_{j>=2} (q-1)^e(j) e_j(Q)|
// with e_j the elementary symmetric polynomial, enumerated over subsets with
// compensated summation. Requires at most 20 values and unclipped arguments.
double product_expansion_defect(std::span<const double> q_values, EntropicIndex q,
                                CrossTermExponent exponent = CrossTermExponent::J);

// Maximizer of <pi, Q> + weight * S_q(pi) by the generic simplex optimizer.
SimplexOptResult entropy_greedy_by_optimization(std::span<const double> row, double weight,
                                                EntropicIndex q);

// Maximizer of <pi, Q> - tau D_q(pi || prior) by the generic simplex
// optimizer, over the actions with prior >= 1e-15. argmax has the full row
// length with zeros off that support.
SimplexOptResult tkl_greedy_by_optimization(std::span<const double> row, const ProbVector& prior, double tau,
                                            EntropicIndex q);

}  // namespace tsallis::oracles
