#include "tsallis/qmath.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "tsallis/errors.hpp"

namespace tsallis {

namespace {

void require_finite(EntropicIndex q, const char* op) {
  if (q.is_infinite()) {
    throw UnsupportedError(std::string(op) + " is undefined at q = infinity");
  }
}

}  // namespace

EntropicIndex::EntropicIndex(double q) : q_(q) {
  if (!(q > 0.0)) {
    throw DomainError("entropic index must satisfy q > 0, got " + std::to_string(q));
  }
}

EntropicIndex EntropicIndex::infinity() {
  return EntropicIndex(std::numeric_limits<double>::infinity());
}

bool EntropicIndex::is_finite() const noexcept { return std::isfinite(q_); }

EntropicIndex::Kind EntropicIndex::kind() const noexcept {
  if (is_infinite()) return Kind::Infinity;
  if (is_one()) return Kind::One;
  if (is_two()) return Kind::Two;
  return Kind::Finite;
}

ProbVector::ProbVector(std::vector<double> weights) : w_(std::move(weights)) {
  if (w_.empty()) throw DomainError("probability vector must be nonempty");
  double total = 0.0;
  for (std::size_t i = 0; i < w_.size(); ++i) {
    if (!std::isfinite(w_[i]) || w_[i] < 0.0) {
      throw DomainError("probability weight " + std::to_string(i) +
                        " is negative or not finite: " + std::to_string(w_[i]));
    }
    total += w_[i];
  }
  if (std::abs(total - 1.0) > kSumTolerance) {
    throw DomainError("probability weights sum to " + std::to_string(total) + ", expected 1");
  }
}

ProbVector ProbVector::normalized(std::vector<double> weights) {
  double total = 0.0;
  for (double& w : weights) {
    if (!std::isfinite(w)) throw DomainError("probability weight is not finite");
    w = std::max(w, 0.0);
    total += w;
  }
  if (!(total > 0.0)) throw DomainError("cannot normalize weights with zero total mass");
  for (double& w : weights) w /= total;
  return ProbVector(std::move(weights));
}

ProbVector ProbVector::uniform(std::size_t n) {
  if (n == 0) throw DomainError("uniform distribution over an empty set");
  return ProbVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

ProbVector ProbVector::one_hot(std::size_t n, std::size_t index) {
  if (index >= n) throw DomainError("one-hot index out of range");
  std::vector<double> w(n, 0.0);
  w[index] = 1.0;
  return ProbVector(std::move(w));
}

double q_log(double x, EntropicIndex q) {
  require_finite(q, "q_log");
  if (!(x > 0.0)) throw DomainError("q_log requires x > 0, got " + std::to_string(x));
  switch (q.kind()) {
    case EntropicIndex::Kind::One:
      return std::log(x);
    case EntropicIndex::Kind::Two:
      return x - 1.0;
    default: {
      const double d = q.value() - 1.0;
      // expm1 keeps accuracy for q near 1 and x near 1.
      return std::expm1(d * std::log(x)) / d;
    }
  }
}

double q_exp(double x, EntropicIndex q) {
  require_finite(q, "q_exp");
  switch (q.kind()) {
    case EntropicIndex::Kind::One:
      return std::exp(x);
    case EntropicIndex::Kind::Two:
      return std::max(1.0 + x, 0.0);
    default: {
      const double d = q.value() - 1.0;
      const double base = 1.0 + d * x;
      if (base <= 0.0) return 0.0;
      return std::exp(std::log1p(d * x) / d);
    }
  }
}

double tsallis_entropy(std::span<const double> p, EntropicIndex q) {
  require_finite(q, "tsallis_entropy");
  double s = 0.0;
  for (double pi : p) {
    if (pi > 0.0) s -= pi * q_log(pi, q);
  }
  return s;
}

double tsallis_kl(std::span<const double> p, std::span<const double> m, EntropicIndex q) {
  require_finite(q, "tsallis_kl");
  if (p.size() != m.size()) throw ShapeError("tsallis_kl: vectors differ in length");
  double d = 0.0;
  for (std::size_t a = 0; a < p.size(); ++a) {
    if (p[a] <= 0.0) continue;  // 0 ln_q(0/m) = 0 ln_q(0/0) = 0
    if (m[a] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[a] * q_log(p[a] / m[a], q);
  }
  return d;
}

double pseudo_additivity_defect(double a, double b, EntropicIndex q) {
  if (!(a > 0.0) || !(b > 0.0)) {
    throw DomainError("pseudo-additivity requires a > 0 and b > 0");
  }
  const double la = q_log(a, q);
  const double lb = q_log(b, q);
  return q_log(a * b, q) - (la + lb + (q.value() - 1.0) * la * lb);
}

double two_point_identity_defect(double x, double y, EntropicIndex q) {
  require_finite(q, "two_point_identity_defect");
  if (q.is_one()) throw PreconditionError("two-point identity needs q != 1");
  const double d = q.value() - 1.0;
  if (!(1.0 + d * x > 0.0) || !(1.0 + d * y > 0.0) || !(1.0 + d * (x + y) > 0.0)) {
    throw PreconditionError("two-point identity evaluated on a clipped q-exponential argument");
  }
  const double lhs = std::pow(q_exp(x, q) * q_exp(y, q), d);
  const double rhs = std::pow(q_exp(x + y, q), d) + d * d * x * y;
  return lhs - rhs;
}

double total_variation(std::span<const double> p, std::span<const double> m) {
  if (p.size() != m.size()) throw ShapeError("total_variation: vectors differ in length");
  double tv = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) tv += std::abs(p[i] - m[i]);
  return 0.5 * tv;
}

}  // namespace tsallis
