#include "tsallis/policy.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tsallis/errors.hpp"

namespace tsallis {

namespace {

constexpr double kPriorFloor = 1e-15;

void require_tau(double tau) {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw DomainError("tau must be positive and finite, got " + std::to_string(tau));
  }
}

void require_row(std::span<const double> row) {
  if (row.empty()) throw ShapeError("action-value row is empty");
  for (double v : row) {
    if (!std::isfinite(v)) throw DomainError("action-value row has a non-finite entry");
  }
}

SupportSet make_support(std::span<const double> row, const std::vector<std::size_t>& order,
                        std::size_t k) {
  SupportSet s;
  s.indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  for (std::size_t a : s.indices) s.sorted_values.push_back(row[a]);
  return s;
}

}  // namespace

void PolicySpec::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) {
    throw DomainError("tau must be positive and finite, got " + std::to_string(tau));
  }
  if (!(p > 0.0) || !std::isfinite(p)) {
    throw DomainError("p must be positive and finite, got " + std::to_string(p));
  }
}

std::vector<std::size_t> descending_order(std::span<const double> row) {
  std::vector<std::size_t> order(row.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return row[a] > row[b]; });
  return order;
}

double logsumexp(std::span<const double> z) {
  if (z.empty()) throw ShapeError("logsumexp of an empty vector");
  const double m = *std::max_element(z.begin(), z.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

std::vector<double> log_softmax(std::span<const double> row, double tau) {
  require_tau(tau);
  require_row(row);
  std::vector<double> z(row.size());
  for (std::size_t a = 0; a < row.size(); ++a) z[a] = row[a] / tau;
  const double lse = logsumexp(z);
  for (double& v : z) v -= lse;
  return z;
}

ProbVector softmax_policy(std::span<const double> row, double tau) {
  std::vector<double> w = log_softmax(row, tau);
  for (double& v : w) v = std::exp(v);
  return ProbVector::normalized(std::move(w));
}

SparsemaxResult sparsemax_policy(std::span<const double> row, double tau, SupportRule rule) {
  require_tau(tau);
  require_row(row);
  const std::vector<std::size_t> order = descending_order(row);
  const std::size_t n = row.size();

  // The support test 1 + i z_(i) > sum_{j<=i} z_(j), multiplied by 2 tau so
  // that exactly representable rows give exact comparisons.
  double cum = 0.0;
  double cum_k = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double qi = row[order[i - 1]];
    cum += qi;
    const double lhs = 2.0 * tau + static_cast<double>(i) * qi;
    const bool in = rule == SupportRule::Strict ? lhs > cum : lhs >= cum;
    if (in) {
      k = i;
      cum_k = cum;
    }
  }
  const double psi = (cum_k / (2.0 * tau) - 1.0) / static_cast<double>(k);

  std::vector<double> w(n, 0.0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t a = order[i];
    w[a] = std::max(row[a] / (2.0 * tau) - psi, 0.0);
  }
  return SparsemaxResult{ProbVector::normalized(std::move(w)), make_support(row, order, k), psi};
}

TaylorResult taylor_policy(std::span<const double> row, const PolicySpec& spec) {
  spec.validate();
  require_row(row);
  if (spec.q.is_infinite() || spec.q.is_one()) {
    throw UnsupportedError("taylor_policy needs a finite q != 1");
  }
  const double q = spec.q.value();
  const double p = spec.p;
  const double c = p - p / (q - 1.0);
  const double scale = q * spec.tau;
  const std::vector<std::size_t> order = descending_order(row);
  const std::size_t n = row.size();

  double cum = 0.0;
  double cum_k = 0.0;
  std::size_t k = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double zi = row[order[i - 1]] / scale;
    cum += zi;
    const double di = static_cast<double>(i);
    if (p + di * zi >= cum + di * c) {
      k = i;
      cum_k = cum;
    }
  }
  if (k == 0) {
    // Only possible for q < 1, where the condition fails even for the top
    // action; keep the top action.
    k = 1;
    cum_k = row[order[0]] / scale;
  }
  const double psi = (cum_k - p) / static_cast<double>(k) + c;

  std::vector<double> w(n, 0.0);
  double defect = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t a = order[i];
    const double raw = 1.0 + ((row[a] / scale - psi) * (q - 1.0) / p - 1.0) / (q - 1.0);
    const double clipped = std::clamp(raw, 0.0, 1.0);
    defect += std::abs(raw - clipped);
    w[a] = clipped;
  }
  double total = 0.0;
  for (double v : w) total += v;
  if (!(total > 0.0)) {
    // Every raw value clipped to zero; fall back to the top action.
    w[order[0]] = 1.0;
  }
  return TaylorResult{ProbVector::normalized(std::move(w)), make_support(row, order, k), psi,
                      defect};
}

ProbVector greedy_policy(std::span<const double> row) {
  require_row(row);
  return ProbVector::one_hot(row.size(), descending_order(row).front());
}

ProbVector tkl_greedy_q2_closed_form(std::span<const double> row, const ProbVector& prior,
                                     double tau) {
  require_tau(tau);
  require_row(row);
  if (row.size() != prior.size()) throw ShapeError("tkl greedy: row and prior differ in length");
  std::vector<std::size_t> supp;
  for (std::size_t a = 0; a < row.size(); ++a) {
    if (prior[a] >= kPriorFloor) supp.push_back(a);
  }
  std::vector<double> z(row.size());
  for (std::size_t a = 0; a < row.size(); ++a) z[a] = row[a] / (2.0 * tau);
  std::stable_sort(supp.begin(), supp.end(), [&](std::size_t a, std::size_t b) { return z[a] > z[b]; });

  double wz = 0.0;
  double w = 0.0;
  double t = 0.0;
  for (std::size_t i = 0; i < supp.size(); ++i) {
    const std::size_t a = supp[i];
    const double wz_next = wz + prior[a] * z[a];
    const double w_next = w + prior[a];
    const double t_next = (wz_next - 1.0) / w_next;
    if (i > 0 && !(z[a] > t_next)) break;
    wz = wz_next;
    w = w_next;
    t = t_next;
  }
  std::vector<double> pi(row.size(), 0.0);
  for (std::size_t a : supp) pi[a] = prior[a] * std::max(z[a] - t, 0.0);
  return ProbVector::normalized(std::move(pi));
}

TklGreedyResult tkl_greedy(std::span<const double> row, const ProbVector& prior, double tau,
                           EntropicIndex q) {
  require_tau(tau);
  require_row(row);
  if (row.size() != prior.size()) throw ShapeError("tkl greedy: row and prior differ in length");
  if (q.is_infinite()) throw UnsupportedError("tkl greedy is undefined at q = infinity");

  std::vector<std::size_t> supp;
  for (std::size_t a = 0; a < row.size(); ++a) {
    if (prior[a] >= kPriorFloor) supp.push_back(a);
  }
  const std::size_t m = supp.size();
  std::vector<double> qs(m), mu(m);
  for (std::size_t i = 0; i < m; ++i) {
    qs[i] = row[supp[i]];
    mu[i] = prior[supp[i]];
  }

  auto objective_of = [&](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      v += x[i] * qs[i];
      if (x[i] > 0.0) v -= tau * x[i] * q_log(x[i] / mu[i], q);
    }
    return v;
  };

  TklGreedyResult out{ProbVector::uniform(row.size())};
  if (q.is_one()) {
    std::vector<double> logits(m);
    for (std::size_t i = 0; i < m; ++i) logits[i] = std::log(mu[i]) + qs[i] / tau;
    const double lse = logsumexp(logits);
    std::vector<double> pi(row.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i) pi[supp[i]] = std::exp(logits[i] - lse);
    out.policy = ProbVector::normalized(std::move(pi));
  } else {
    // Stationarity on the support: r_a = pi_a / mu_a solves
    // q ln_q r_a = (Q_a - tau - lambda) / tau, clipped at 0 for q > 1, and
    // sum_a mu_a r_a = 1 fixes lambda. The sum is decreasing in lambda.
    const double qv = q.value();
    auto ratios = [&](double lambda, std::vector<double>& r) {
      double total = 0.0;
      for (std::size_t i = 0; i < m; ++i) {
        const double base = 1.0 + (qv - 1.0) * (qs[i] - tau - lambda) / (qv * tau);
        if (qv > 1.0) {
          r[i] = base > 0.0 ? std::pow(base, 1.0 / (qv - 1.0)) : 0.0;
        } else {
          r[i] = base > 0.0 ? std::pow(base, -1.0 / (1.0 - qv)) : std::numeric_limits<double>::infinity();
        }
        total += mu[i] * r[i];
      }
      return total;
    };
    double lo = *std::min_element(qs.begin(), qs.end()) - tau;
    double hi = *std::max_element(qs.begin(), qs.end()) - tau;
    std::vector<double> r(m);
    int iters = 0;
    while (iters < 400) {
      const double mid = 0.5 * (lo + hi);
      if (!(mid > lo && mid < hi)) break;
      ++iters;
      if (ratios(mid, r) > 1.0) lo = mid;
      else hi = mid;
    }
    ratios(hi, r);
    out.multiplier_iterations = iters;
    std::vector<double> pi(row.size(), 0.0);
    for (std::size_t i = 0; i < m; ++i) pi[supp[i]] = mu[i] * r[i];
    out.policy = ProbVector::normalized(std::move(pi));

    if (q.is_two()) {
      ProbVector closed = tkl_greedy_q2_closed_form(row, prior, tau);
      out.closed_form_tv = total_variation(closed.weights(), out.policy.weights());
      if (out.closed_form_tv > 1e-9) {
        throw InvariantError("tkl greedy: q = 2 closed form disagrees with the multiplier solve by TV " +
                             std::to_string(out.closed_form_tv));
      }
      out.policy = std::move(closed);
    }
  }

  std::vector<double> x(m);
  for (std::size_t i = 0; i < m; ++i) x[i] = out.policy[supp[i]];
  out.objective = objective_of(x);

  // Self-consistency of the implicit closed form pi = mu exp_q(Q/(q tau) - psi).
  double dq = 0.0;
  double value = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    value += x[i] * qs[i];
    if (x[i] > 0.0) dq += x[i] * q_log(x[i] / mu[i], q);
  }
  const double qv = q.value();
  if (q.is_one()) {
    const double psi = value / tau - dq;
    for (std::size_t i = 0; i < m; ++i) {
      out.fixed_point_residual =
          std::max(out.fixed_point_residual, std::abs(x[i] - mu[i] * std::exp(qs[i] / tau - psi)));
    }
  } else {
    const double psi = (value / tau - qv * dq) / qv;
    for (std::size_t i = 0; i < m; ++i) {
      const double cand = mu[i] * q_exp(qs[i] / (qv * tau) - psi, q);
      out.fixed_point_residual = std::max(out.fixed_point_residual, std::abs(x[i] - cand));
    }
  }
  return out;
}

ProbVector regularized_greedy(std::span<const double> row, const PolicySpec& spec) {
  switch (spec.q.kind()) {
    case EntropicIndex::Kind::One:
      return softmax_policy(row, spec.tau);
    case EntropicIndex::Kind::Two:
      return sparsemax_policy(row, spec.tau).policy;
    case EntropicIndex::Kind::Infinity:
      return greedy_policy(row);
    case EntropicIndex::Kind::Finite:
      break;
  }
  return taylor_policy(row, spec).policy;
}

}  // namespace tsallis
