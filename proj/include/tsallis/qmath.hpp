#pragma once

// Deformed logarithm calculus.
//
//   ln_q x  = (x^(q-1) - 1) / (q - 1)            (ln x at q = 1)
//   exp_q x = [1 + (q-1) x]_+^(1/(q-1))          (exp x at q = 1)
//
// Tsallis entropy S_q(p) = -<p, ln_q p> and Tsallis relative entropy
// D_q(p || m) = <p, ln_q(p/m)>. The index q lives in (0, inf]; q = inf stands
// for "no regularization" and is only meaningful to the policy layer.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace tsallis {

class EntropicIndex {
 public:
  enum class Kind { One, Two, Finite, Infinity };

  // Throws DomainError unless q > 0 (q = +inf is accepted).
  explicit EntropicIndex(double q);

  static EntropicIndex infinity();

  double value() const noexcept { return q_; }
  Kind kind() const noexcept;
  bool is_one() const noexcept { return q_ == 1.0; }
  bool is_two() const noexcept { return q_ == 2.0; }
  bool is_finite() const noexcept;
  bool is_infinite() const noexcept { return !is_finite(); }

  friend bool operator==(const EntropicIndex&, const EntropicIndex&) = default;

 private:
  double q_;
};

// A distribution over a finite action set. Construction validates
// nonnegativity and unit mass (tolerance kSumTolerance).
class ProbVector {
 public:
  static constexpr double kSumTolerance = 1e-12;

  explicit ProbVector(std::vector<double> weights);
  ProbVector(std::initializer_list<double> weights)
      : ProbVector(std::vector<double>(weights)) {}

  // Clamps tiny negatives to zero and divides by the total. Throws
  // DomainError when the total is not positive or an entry is not finite.
  static ProbVector normalized(std::vector<double> weights);
  static ProbVector uniform(std::size_t n);
  static ProbVector one_hot(std::size_t n, std::size_t index);

  std::size_t size() const noexcept { return w_.size(); }
  double operator[](std::size_t i) const { return w_[i]; }
  std::span<const double> weights() const noexcept { return w_; }
  const std::vector<double>& vector() const noexcept { return w_; }

  auto begin() const noexcept { return w_.begin(); }
  auto end() const noexcept { return w_.end(); }

 private:
  std::vector<double> w_;
};

double q_log(double x, EntropicIndex q);
double q_exp(double x, EntropicIndex q);

double tsallis_entropy(std::span<const double> p, EntropicIndex q);
inline double tsallis_entropy(const ProbVector& p, EntropicIndex q) {
  return tsallis_entropy(p.weights(), q);
}

// +inf when p puts mass where m has none.
double tsallis_kl(std::span<const double> p, std::span<const double> m, EntropicIndex q);
inline double tsallis_kl(const ProbVector& p, const ProbVector& m, EntropicIndex q) {
  return tsallis_kl(p.weights(), m.weights(), q);
}

// ln_q(ab) - [ln_q a + ln_q b + (q-1) ln_q a ln_q b]; zero up to rounding.
double pseudo_additivity_defect(double a, double b, EntropicIndex q);

// (exp_q x exp_q y)^(q-1) - [exp_q(x+y)^(q-1) + (q-1)^2 x y] on the unclipped
// branch. Throws PreconditionError at q = 1 or when an argument is clipped.
double two_point_identity_defect(double x, double y, EntropicIndex q);

// Total-variation distance, 0.5 * sum |p - m|.
double total_variation(std::span<const double> p, std::span<const double> m);

}  // namespace tsallis
