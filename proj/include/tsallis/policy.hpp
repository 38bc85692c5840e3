#pragma once

// Regularized greedy policies over one state's action values.
//
// All routines sort actions by (value descending, index ascending), so ties
// resolve toward the lowest index.

#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "tsallis/qmath.hpp"

namespace tsallis {

struct SupportSet {
  std::vector<std::size_t> indices;  // in descending-value order
  std::vector<double> sorted_values;

  std::size_t size() const noexcept { return indices.size(); }
};

struct PolicySpec {
  EntropicIndex q{1.0};
  double tau = 1.0;
  double p = 0.5;

  // Throws DomainError unless tau > 0 and p > 0.
  void validate() const;
};

// Strict is the sparsemax rule. NonStrict admits actions on the boundary and
// exists for fault-injection checks.
enum class SupportRule { Strict, NonStrict };

// Action indices ordered by value descending, ties by index ascending.
std::vector<std::size_t> descending_order(std::span<const double> row);

double logsumexp(std::span<const double> z);

ProbVector softmax_policy(std::span<const double> row, double tau);
// ln softmax(row / tau), finite everywhere.
std::vector<double> log_softmax(std::span<const double> row, double tau);

struct SparsemaxResult {
  ProbVector policy;
  SupportSet support;
  double psi = 0.0;
};

SparsemaxResult sparsemax_policy(std::span<const double> row, double tau,
                                 SupportRule rule = SupportRule::Strict);

struct TaylorResult {
  ProbVector policy;
  SupportSet support;
  double psi = 0.0;
  // Mass removed by clipping raw values to [0, 1] before renormalizing.
  double clip_defect = 0.0;
};

// First-order Taylor policy for general q (q != 1, finite). Approximates the
// maximizer of <pi, Q> + p*tau*S_q(pi); at q = 2 it is exactly
// sparsemax_policy(row, p*tau).
TaylorResult taylor_policy(std::span<const double> row, const PolicySpec& spec);

ProbVector greedy_policy(std::span<const double> row);

struct TklGreedyResult {
  ProbVector policy;
  double objective = 0.0;
  int multiplier_iterations = 0;
  // TV distance between the multiplier solve and the q = 2 closed form; NaN
  // when no closed form was computed.
  double closed_form_tv = std::numeric_limits<double>::quiet_NaN();
  // max |pi - mu exp_q(Q/(q tau) - psi)| on the prior's support.
  double fixed_point_residual = 0.0;
};

// argmax_pi <pi, Q> - tau D_q(pi || prior). Prior entries below 1e-15 are
// treated as outside the support. q = 1 uses prior*exp(Q/tau). Other finite
// q solve the stationarity conditions by bisection on the scalar multiplier;
// at q = 2 the result is checked against the closed form (InvariantError
// beyond 1e-9 TV) and the closed form is returned.
TklGreedyResult tkl_greedy(std::span<const double> row, const ProbVector& prior, double tau,
                           EntropicIndex q);
inline ProbVector tkl_greedy_policy(std::span<const double> row, const ProbVector& prior,
                                    double tau, EntropicIndex q) {
  return tkl_greedy(row, prior, tau, q).policy;
}

// Closed-form maximizer at q = 2: pi = mu [Q/(2 tau) - t]_+ with the scalar t
// fixed by normalization.
ProbVector tkl_greedy_q2_closed_form(std::span<const double> row, const ProbVector& prior,
                                     double tau);

// The greedy step of the solvers: softmax at q = 1, sparsemax at q = 2,
// greedy at q = inf, Taylor policy (parameter spec.p) otherwise.
ProbVector regularized_greedy(std::span<const double> row, const PolicySpec& spec);

}  // namespace tsallis
