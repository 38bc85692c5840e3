#pragma once

// Reference maximizer for concave objectives over the probability simplex.
//
// Used as the independent oracle for every <pi, Q> - Omega(pi) greedy step and
// as the production path for Tsallis-KL greedy policies, which have no direct
// closed form for general q.

#include <cstddef>
#include <functional>
#include <span>

#include "tsallis/qmath.hpp"

namespace tsallis::oracles {

struct SimplexObjective {
  // f(x); must accept points with zero coordinates.
  std::function<double(std::span<const double>)> value;
  // df/dx_a written into the second argument. Evaluated only at x with
  // x_a > 0 on the coordinates whose derivative is requested by the solver,
  // but may be called slightly off the simplex (finite differences).
  std::function<void(std::span<const double>, std::span<double>)> gradient;
};

struct SimplexOptOptions {
  // Frank-Wolfe gap max_a g_a - <x, g> required to declare convergence. The
  // gap upper-bounds the objective suboptimality for concave f.
  double tol = 1e-12;
  int max_iters = 20000;
  int eg_iters = 3000;
  int certify_perturbations = 20;
};

struct SimplexOptResult {
  ProbVector argmax;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double residual = 0.0;  // final Frank-Wolfe gap
};

// Exponentiated-gradient ascent with backtracking to identify the support,
// then an active-set Newton polish with finite-difference curvature. The
// result is certified by the gap and by random feasible perturbations; a
// failed certification leaves converged = false, never silently.
SimplexOptResult simplex_maximize(const SimplexObjective& objective, std::size_t dim,
                                  const SimplexOptOptions& options = {});

}  // namespace tsallis::oracles
