#include "tsallis/oracles.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tsallis/errors.hpp"

namespace tsallis::oracles {

namespace {

// Neumaier summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

double checked_q_exp(double x, EntropicIndex q) {
  if (!(1.0 + (q.value() - 1.0) * x > 0.0)) {
    throw PreconditionError("q-exponential argument " + std::to_string(x) + " is clipped");
  }
  return q_exp(x, q);
}

}  // namespace

ProbVector sparsemax_by_enumeration(std::span<const double> row, double tau) {
  if (row.size() > 20) throw PreconditionError("sparsemax_by_enumeration supports at most 20 actions");
  if (row.empty()) throw ShapeError("empty row");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const std::size_t n = row.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });

  std::vector<double> found;
  int feasible = 0;
  for (std::size_t k = 1; k <= n; ++k) {
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) sum += row[order[i]];
    const double psi = (sum / (2.0 * tau) - 1.0) / static_cast<double>(k);
    bool ok = true;
    std::vector<double> pi(n, 0.0);
    for (std::size_t i = 0; i < n && ok; ++i) {
      // Sign of z_a - psi, scaled by 2 tau k.
      const double sign = static_cast<double>(k) * row[order[i]] - sum + 2.0 * tau;
      if (i < k) {
        ok = sign > 0.0;
        pi[order[i]] = std::max(row[order[i]] / (2.0 * tau) - psi, 0.0);
      } else {
        ok = sign <= 0.0;
      }
    }
    if (ok) {
      ++feasible;
      found = std::move(pi);
    }
  }
  if (feasible != 1) {
    throw InvariantError("sparsemax enumeration found " + std::to_string(feasible) +
                         " feasible supports, expected exactly one");
  }
  return ProbVector::normalized(std::move(found));
}

ProbVector kl_average_policy(const std::vector<QTable>& q_history, double tau, std::size_t state) {
  if (q_history.empty()) throw PreconditionError("kl_average_policy needs a nonempty history");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  const std::size_t na = q_history.front().n_actions();
  std::vector<double> logits(na, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    CompensatedSum s;
    for (const QTable& q : q_history) s.add(q(state, a));
    logits[a] = s.value() / tau;
  }
  const double m = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double& v : logits) {
    v = std::exp(v - m);
    z += v;
  }
  for (double& v : logits) v /= z;
  return ProbVector::normalized(std::move(logits));
}

double weighted_average_identity_check(std::span<const double> q_values, EntropicIndex q) {
  if (q.is_one() || q.is_infinite()) throw PreconditionError("weighted-average identity needs finite q != 1");
  const double d = q.value() - 1.0;
  double prefix = 0.0;
  double product = 1.0;
  for (double v : q_values) {
    const double denom = 1.0 + d * prefix;
    if (!(denom > 0.0)) throw PreconditionError("weighted-average identity: nonpositive weight");
    product *= checked_q_exp(v / denom, q);
    prefix += v;
  }
  return std::abs(checked_q_exp(prefix, q) - product);
}

double product_expansion_defect(std::span<const double> q_values, EntropicIndex q,
                                CrossTermExponent exponent) {
  if (q.is_infinite()) throw PreconditionError("product expansion needs finite q");
  const std::size_t k = q_values.size();
  if (k > 20) throw PreconditionError("product expansion supports at most 20 values");
  const double d = q.value() - 1.0;
  double lhs = 1.0;
  double total = 0.0;
  for (double v : q_values) {
    lhs *= checked_q_exp(v, q);
    total += v;
  }
  lhs = std::pow(lhs, d);

  CompensatedSum rhs;
  rhs.add(std::pow(checked_q_exp(total, q), d));
  for (std::uint32_t mask = 0; mask < (1u << k); ++mask) {
    const int j = std::popcount(mask);
    if (j < 2) continue;
    double term = 1.0;
    for (std::size_t i = 0; i < k; ++i) {
      if (mask & (1u << i)) term *= q_values[i];
    }
    const int e = exponent == CrossTermExponent::J ? j : 2 * (j - 1);
    rhs.add(std::pow(d, e) * term);
  }
  return std::abs(lhs - rhs.value());
}

SimplexOptResult entropy_greedy_by_optimization(std::span<const double> row, double weight,
                                                EntropicIndex q) {
  if (q.is_infinite()) throw PreconditionError("entropy greedy needs finite q");
  if (!(weight > 0.0)) throw DomainError("entropy weight must be positive");
  const std::vector<double> qs(row.begin(), row.end());
  const double qv = q.value();
  SimplexObjective f;
  f.value = [qs, weight, q](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t a = 0; a < qs.size(); ++a) {
      v += qs[a] * x[a];
      if (x[a] > 0.0) v -= weight * x[a] * q_log(x[a], q);
    }
    return v;
  };
  f.gradient = [qs, weight, q, qv](std::span<const double> x, std::span<double> g) {
    for (std::size_t a = 0; a < qs.size(); ++a) {
      if (x[a] > 0.0) {
        g[a] = qs[a] - weight * (1.0 + qv * q_log(x[a], q));
      } else {
        g[a] = qv > 1.0 ? qs[a] + weight / (qv - 1.0) : std::numeric_limits<double>::infinity();
      }
    }
  };
  return simplex_maximize(f, qs.size());
}

SimplexOptResult tkl_greedy_by_optimization(std::span<const double> row, const ProbVector& prior, double tau,
                                            EntropicIndex q) {
  if (q.is_infinite()) throw PreconditionError("tkl greedy needs finite q");
  if (!(tau > 0.0)) throw DomainError("tau must be positive");
  if (row.size() != prior.size()) throw ShapeError("row and prior differ in length");
  std::vector<std::size_t> supp;
  for (std::size_t a = 0; a < row.size(); ++a) {
    if (prior[a] >= 1e-15) supp.push_back(a);
  }
  std::vector<double> qs, mu;
  for (std::size_t a : supp) {
    qs.push_back(row[a]);
    mu.push_back(prior[a]);
  }
  const double qv = q.value();
  SimplexObjective f;
  f.value = [&](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t i = 0; i < qs.size(); ++i) {
      v += qs[i] * x[i];
      if (x[i] > 0.0) v -= tau * x[i] * q_log(x[i] / mu[i], q);
    }
    return v;
  };
  f.gradient = [&](std::span<const double> x, std::span<double> g) {
    for (std::size_t i = 0; i < qs.size(); ++i) {
      if (x[i] > 0.0) {
        g[i] = qs[i] - tau * (1.0 + qv * q_log(x[i] / mu[i], q));
      } else {
        g[i] = qv > 1.0 ? qs[i] + tau / (qv - 1.0) : std::numeric_limits<double>::infinity();
      }
    }
  };
  SimplexOptResult res = simplex_maximize(f, qs.size());
  std::vector<double> full(row.size(), 0.0);
  for (std::size_t i = 0; i < supp.size(); ++i) full[supp[i]] = res.argmax[i];
  res.argmax = ProbVector::normalized(std::move(full));
  return res;
}

}  // namespace tsallis::oracles
