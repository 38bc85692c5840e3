#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "reference.hpp"
#include "tsallis/errors.hpp"
#include "tsallis/qmath.hpp"

using namespace tsallis;

TEST_CASE("entropic index classification") {
  CHECK(EntropicIndex(1.0).kind() == EntropicIndex::Kind::One);
  CHECK(EntropicIndex(2.0).kind() == EntropicIndex::Kind::Two);
  CHECK(EntropicIndex(3.5).kind() == EntropicIndex::Kind::Finite);
  CHECK(EntropicIndex::infinity().kind() == EntropicIndex::Kind::Infinity);
  CHECK(EntropicIndex(0.5).is_finite());
  CHECK_THROWS_AS(EntropicIndex(0.0), DomainError);
  CHECK_THROWS_AS(EntropicIndex(-1.0), DomainError);
  CHECK_THROWS_AS(EntropicIndex(std::nan("")), DomainError);
}

TEST_CASE("prob vector validation") {
  CHECK_NOTHROW(ProbVector({0.25, 0.75}));
  CHECK_THROWS_AS(ProbVector({0.5, 0.6}), DomainError);
  CHECK_THROWS_AS(ProbVector({-0.1, 1.1}), DomainError);
  CHECK_THROWS_AS(ProbVector(std::vector<double>{}), DomainError);
  ProbVector n = ProbVector::normalized({1.0, 3.0});
  CHECK(n[1] == doctest::Approx(0.75));
  CHECK_THROWS_AS(ProbVector::normalized({0.0, 0.0}), DomainError);
}

TEST_CASE("q_log values") {
  for (double q : {0.5, 1.0, 2.0, 3.7}) CHECK(q_log(1.0, EntropicIndex(q)) == 0.0);
  CHECK(q_log(3.0, EntropicIndex(2.0)) == 2.0);
  const double want = ref::q_log(2.5, 1.5);
  CHECK(std::abs(q_log(2.5, EntropicIndex(1.5)) - want) < 1e-14);
  CHECK(std::abs(want - 2.0 * (std::sqrt(2.5) - 1.0)) < 1e-14);
  CHECK_THROWS_AS(q_log(0.0, EntropicIndex(2.0)), DomainError);
  CHECK_THROWS_AS(q_log(-1.0, EntropicIndex(1.0)), DomainError);
  CHECK_THROWS_AS(q_log(1.0, EntropicIndex::infinity()), UnsupportedError);
}

TEST_CASE("q_log and q_exp agree with 50-digit evaluation") {
  ref::Sampler rng(11);
  for (int i = 0; i < 300; ++i) {
    const double q = rng.uniform(0.05, 5.0);
    const double x = rng.uniform(1e-3, 10.0);
    const double lq = q_log(x, EntropicIndex(q));
    CHECK(std::abs(lq - ref::q_log(x, q)) <= 1e-13 * std::max(1.0, std::abs(lq)));
    const double y = rng.uniform(-3.0, 3.0);
    const double eq = q_exp(y, EntropicIndex(q));
    CHECK(std::abs(eq - ref::q_exp(y, q)) <= 1e-12 * std::max(1.0, eq));
  }
}

TEST_CASE("q_exp values") {
  for (double q : {0.5, 1.0, 2.0, 4.0}) CHECK(q_exp(0.0, EntropicIndex(q)) == 1.0);
  CHECK(q_exp(-2.0, EntropicIndex(2.0)) == 0.0);
  CHECK(q_exp(-1.0, EntropicIndex(3.0)) == 0.0);
  CHECK_THROWS_AS(q_exp(0.0, EntropicIndex::infinity()), UnsupportedError);
}

TEST_CASE("inverse pair") {
  ref::Sampler rng(12);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    double q = rng.uniform(0.0, 5.0);
    if (q == 0.0 || q == 1.0) q = 0.5;
    const double x = 10.0 - rng.uniform(0.0, 10.0);  // (0, 10]
    const EntropicIndex qi(q);
    worst = std::max(worst, std::abs(q_exp(q_log(x, qi), qi) - x));
    const double y = rng.uniform(-2.0, 2.0);
    if (1.0 + (q - 1.0) * y > 0.0) {
      worst = std::max(worst, std::abs(q_log(q_exp(y, qi), qi) - y));
    }
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("continuity at q = 1") {
  // |ln_{1+e} x - ln x| ~ e (ln x)^2 / 2; on [0.1, 10] that is at most 2.66 e.
  const double eps = 1e-6;
  double worst = 0.0;
  for (int i = 0; i <= 200; ++i) {
    const double x = 0.1 + (10.0 - 0.1) * i / 200.0;
    worst = std::max(worst, std::abs(q_log(x, EntropicIndex(1.0 + eps)) - std::log(x)) / eps);
  }
  CHECK(worst <= 3.0);
}

TEST_CASE("q_log is increasing") {
  ref::Sampler rng(13);
  for (double q : {0.3, 1.0, 2.0, 4.5}) {
    std::vector<double> xs = rng.row(200, 1e-3, 20.0);
    std::sort(xs.begin(), xs.end());
    xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
    for (std::size_t i = 1; i < xs.size(); ++i) {
      CHECK(q_log(xs[i], EntropicIndex(q)) > q_log(xs[i - 1], EntropicIndex(q)));
    }
  }
}

TEST_CASE("tsallis entropy") {
  for (double q : {0.5, 1.0, 2.0, 3.0}) {
    const EntropicIndex qi(q);
    for (std::size_t n : {2u, 5u}) {
      const double want = -q_log(1.0 / static_cast<double>(n), qi);
      CHECK(tsallis_entropy(ProbVector::uniform(n), qi) == doctest::Approx(want).epsilon(1e-14));
    }
    CHECK(tsallis_entropy(ProbVector::one_hot(4, 2), qi) == 0.0);
  }
  CHECK(tsallis_entropy(ProbVector({0.5, 0.5}), EntropicIndex(2.0)) == doctest::Approx(0.5));
}

TEST_CASE("tsallis kl") {
  ProbVector p({0.2, 0.3, 0.5});
  for (double q : {0.5, 1.0, 2.0, 3.0}) CHECK(std::abs(tsallis_kl(p, p, EntropicIndex(q))) < 1e-15);
  // sum p^2/m - 1
  const double want = 0.25 / 0.25 + 0.25 / 0.75 - 1.0;
  CHECK(tsallis_kl(ProbVector({0.5, 0.5}), ProbVector({0.25, 0.75}), EntropicIndex(2.0)) ==
        doctest::Approx(want).epsilon(1e-15));
  CHECK(std::isinf(tsallis_kl(ProbVector({1.0, 0.0}), ProbVector({0.0, 1.0}), EntropicIndex(2.0))));
  CHECK(tsallis_kl(ProbVector({0.0, 1.0}), ProbVector({0.5, 0.5}), EntropicIndex(2.0)) ==
        doctest::Approx(1.0));
}

TEST_CASE("kl nonnegativity and bounded entropy") {
  ref::Sampler rng(14);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 2 + rng.index(6);
    const double q = rng.uniform(0.1, 5.0);
    const EntropicIndex qi(q);
    std::vector<double> a = rng.simplex(n), b = rng.simplex(n);
    CHECK(tsallis_kl(a, b, qi) >= -1e-12);
    const double s = tsallis_entropy(a, qi);
    CHECK(s >= -1e-12);
    CHECK(s <= -q_log(1.0 / static_cast<double>(n), qi) + 1e-12);
  }
}

TEST_CASE("strong convexity of q = 2 kl along segments") {
  ref::Sampler rng(15);
  const double h = 1e-3;
  for (int i = 0; i < 100; ++i) {
    const std::size_t n = 2 + rng.index(5);
    std::vector<double> p0 = rng.simplex(n), p1 = rng.simplex(n), m = rng.simplex(n);
    auto at = [&](double t) {
      std::vector<double> x(n);
      for (std::size_t a = 0; a < n; ++a) x[a] = (1 - t) * p0[a] + t * p1[a];
      return tsallis_kl(x, m, EntropicIndex(2.0));
    };
    const double second = (at(0.5 + h) - 2 * at(0.5) + at(0.5 - h)) / (h * h);
    // Exact value 2 sum (p1 - p0)^2 / m >= 2 ||p1 - p0||^2.
    double floor = 0.0;
    for (std::size_t a = 0; a < n; ++a) floor += 2 * (p1[a] - p0[a]) * (p1[a] - p0[a]);
    CHECK(second >= floor * (1 - 1e-4));
    CHECK(second > 0.0);
  }
}

TEST_CASE("pseudo-additivity") {
  CHECK(std::abs(pseudo_additivity_defect(2.0, 3.0, EntropicIndex(2.0))) < 1e-15);
  CHECK(q_log(6.0, EntropicIndex(2.0)) == 5.0);
  CHECK(pseudo_additivity_defect(2.0, 3.0, EntropicIndex(1.0)) == doctest::Approx(0.0).epsilon(1e-16));
  CHECK_THROWS_AS(pseudo_additivity_defect(0.0, 3.0, EntropicIndex(2.0)), DomainError);
  ref::Sampler rng(16);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double a = 10.0 - rng.uniform(0.0, 10.0);
    const double b = 10.0 - rng.uniform(0.0, 10.0);
    const double q = 5.0 - rng.uniform(0.0, 5.0);
    // absolute below magnitude 1, relative above
    const double scale = std::max(1.0, std::abs(q_log(a * b, EntropicIndex(q))));
    worst = std::max(worst, std::abs(pseudo_additivity_defect(a, b, EntropicIndex(q))) / scale);
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("two-point identity") {
  CHECK(std::abs(two_point_identity_defect(1.0, 2.0, EntropicIndex(2.0))) < 1e-15);
  for (double q : {0.5, 2.0, 3.0}) {
    CHECK(std::abs(two_point_identity_defect(0.0, 0.7, EntropicIndex(q))) < 1e-14);
  }
  CHECK_THROWS_AS(two_point_identity_defect(1.0, 1.0, EntropicIndex(1.0)), PreconditionError);
  CHECK_THROWS_AS(two_point_identity_defect(-2.0, 0.0, EntropicIndex(2.0)), PreconditionError);
  ref::Sampler rng(17);
  double worst = 0.0;
  int done = 0;
  while (done < 1000) {
    const double q = rng.uniform(0.1, 5.0);
    const double x = rng.uniform(-1.0, 1.0);
    const double y = rng.uniform(-1.0, 1.0);
    const double d = q - 1.0;
    if (q == 1.0 || 1 + d * x <= 0 || 1 + d * y <= 0 || 1 + d * (x + y) <= 0) continue;
    worst = std::max(worst, std::abs(two_point_identity_defect(x, y, EntropicIndex(q))));
    ++done;
  }
  CHECK(worst < 1e-10);
}

TEST_CASE("total variation") {
  std::vector<double> a{1.0, 0.0}, b{0.0, 1.0};
  CHECK(total_variation(a, b) == 1.0);
  CHECK(total_variation(a, a) == 0.0);
  std::vector<double> c{1.0};
  CHECK_THROWS_AS(total_variation(a, c), ShapeError);
}
