#include <doctest.h>

#include <cmath>
#include <vector>

#include "reference.hpp"
#include "tsallis/envs.hpp"
#include "tsallis/errors.hpp"
#include "tsallis/oracles.hpp"
#include "tsallis/solvers.hpp"

using namespace tsallis;

namespace {

TabularMdp garnet(std::uint64_t seed, std::size_t ns = 6, std::size_t na = 3) {
  EnvSpec s;
  s.kind = EnvKind::RandomMdp;
  s.n_states = ns;
  s.n_actions = na;
  s.branching = 3;
  s.seed = seed;
  return make_env(s);
}

SolverConfig fixed_iters(int k) {
  SolverConfig c;
  c.max_iters = k;
  c.residual_tol = 1e-300;
  return c;
}

// Q <- r + alpha (Q - max Q) + gamma P max Q, written from scratch.
QTable advantage_learning(const TabularMdp& mdp, double alpha, int iters) {
  QTable q(mdp.n_states(), mdp.n_actions());
  for (int k = 0; k < iters; ++k) {
    std::vector<double> v(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      v[s] = q(s, 0);
      for (std::size_t a = 1; a < mdp.n_actions(); ++a) v[s] = std::max(v[s], q(s, a));
    }
    QTable next(mdp.n_states(), mdp.n_actions());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
        double ev = 0.0;
        auto p = mdp.transition(s, a);
        for (std::size_t t = 0; t < mdp.n_states(); ++t) ev += p[t] * v[t];
        next(s, a) = mdp.reward(s, a) + alpha * (q(s, a) - v[s]) + mdp.gamma() * ev;
      }
    }
    q = next;
  }
  return q;
}

}  // namespace

TEST_CASE("config validation") {
  SolverConfig c;
  c.tau = 0.0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = SolverConfig{};
  c.alpha = 1.5;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = SolverConfig{};
  c.m = 0;
  CHECK_THROWS_AS(c.validate(), DomainError);
  c = SolverConfig{};
  c.alpha = 1.0;
  CHECK_THROWS_AS(run_cvi(garnet(0), c), DomainError);
}

TEST_CASE("names round trip") {
  for (Algorithm a : {Algorithm::RegVI, Algorithm::MviQ, Algorithm::TsallisVI, Algorithm::Mvi, Algorithm::Cvi,
                      Algorithm::NaiveLnq}) {
    CHECK(algorithm_from_string(to_string(a)) == a);
  }
  for (Regularizer r : {Regularizer::TsallisEntropy, Regularizer::TsallisKLtoPrev, Regularizer::ShannonEntropy,
                        Regularizer::KLtoPrev}) {
    CHECK(regularizer_from_string(to_string(r)) == r);
  }
  CHECK_THROWS_AS(algorithm_from_string("dqn"), DomainError);
}

TEST_CASE("operator values on worked rows") {
  std::vector<double> two{1.0, 0.0};
  const double e = std::exp(1.0);
  CHECK(boltzmann_value(two, 1.0) == doctest::Approx(e / (e + 1.0)).epsilon(1e-14));
  CHECK(mq_value(std::vector<double>{3, 1, 0}, 1.0, EntropicIndex(2.0), 0.5) == 3.0);
  CHECK(mq_value(std::vector<double>{3, 1, 0}, 1.0, EntropicIndex::infinity(), 0.5) == 3.0);
  ref::Sampler rng(21);
  for (int t = 0; t < 50; ++t) {
    auto row = rng.row(4, -2, 2);
    const double mx = *std::max_element(row.begin(), row.end());
    CHECK(std::abs(boltzmann_value(row, 1e-6) - mx) < 1e-6);
    // Log-partition exceeds the expectation by tau H(pi).
    const double tau = rng.uniform(0.2, 2.0);
    auto pi = softmax_policy(row, tau);
    const double h = tsallis_entropy(pi, EntropicIndex(1.0));
    CHECK(munchausen_baseline(row, tau, EntropicIndex(1.0), 0.5) ==
          doctest::Approx(boltzmann_value(row, tau) + tau * h).epsilon(1e-12));
  }
}

TEST_CASE("mvi(q = 1) equals mvi") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto mdp = garnet(seed);
    SolverConfig c = fixed_iters(200);
    c.q = EntropicIndex(1.0);
    c.tau = 0.7;
    auto a = run_mvi_q(mdp, c);
    auto b = run_mvi(mdp, c);
    CHECK(sup_distance(a.q, b.q) < 1e-10);
  }
}

TEST_CASE("mvi(q, alpha = 0) equals tsallis vi") {
  for (double q : {1.0, 1.5, 2.0, 3.0}) {
    auto mdp = garnet(7);
    SolverConfig c = fixed_iters(150);
    c.q = EntropicIndex(q);
    c.alpha = 0.0;
    auto a = run_mvi_q(mdp, c);
    auto b = run_tsallis_vi(mdp, c);
    CHECK(sup_distance(a.q, b.q) < 1e-10);
  }
}

TEST_CASE("mvi(q = inf) equals advantage learning") {
  auto mdp = garnet(3);
  SolverConfig c = fixed_iters(120);
  c.q = EntropicIndex::infinity();
  c.alpha = 0.6;
  auto a = run_mvi_q(mdp, c);
  CHECK(sup_distance(a.q, advantage_learning(mdp, 0.6, 120)) < 1e-10);
}

TEST_CASE("cvi equals mvi at matched temperature") {
  auto mdp = garnet(4);
  SolverConfig c = fixed_iters(150);
  c.tau = 0.3;
  c.alpha = 0.8;
  auto cv = run_cvi(mdp, c);
  SolverConfig m = c;
  m.tau = cvi_matched_mvi_tau(c);
  CHECK(m.tau == doctest::Approx(1.5));
  auto mv = run_mvi(mdp, m);
  CHECK(sup_distance(cv.q, mv.q) < 1e-10);
}

TEST_CASE("log-policy and advantage forms agree at q = 1") {
  auto mdp = garnet(5);
  SolverConfig c = fixed_iters(100);
  c.q = EntropicIndex(1.0);
  auto a = run_mvi_q(mdp, c);
  c.munchausen = MunchausenForm::LogPolicy;
  auto b = run_mvi_q(mdp, c);
  CHECK(sup_distance(a.q, b.q) < 1e-9);
}

TEST_CASE("kl regularized vi averages past q-values") {
  auto mdp = garnet(9, 4, 3);
  const double tau = 0.8;
  std::vector<QTable> history;
  for (int k = 1; k <= 10; ++k) {
    SolverConfig c = fixed_iters(k);
    c.tau = tau;
    auto r = run_reg_vi(mdp, c, Regularizer::KLtoPrev);
    if (history.empty()) history.emplace_back(mdp.n_states(), mdp.n_actions());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      CHECK(total_variation(r.policy[s].weights(), oracles::kl_average_policy(history, tau, s).weights()) < 1e-8);
    }
    history.push_back(r.q);
  }
}

TEST_CASE("mvi is kl plus entropy regularized vi on the generalized value") {
  auto mdp = garnet(10);
  const double tau = 0.5, alpha = 0.7;
  const int k = 60;
  SolverConfig c = fixed_iters(k);
  c.tau = tau;
  c.alpha = alpha;
  auto mv = run_mvi(mdp, c);
  const double lna = std::log(static_cast<double>(mdp.n_actions()));
  auto reg = run_reg_vi(mdp, c, RegularizerWeights{alpha * tau, (1 - alpha) * tau, EntropicIndex(1.0)},
                        QTable(mdp.n_states(), mdp.n_actions(), alpha * tau * lna));
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      worst = std::max(worst, std::abs(reg.q(s, a) - (mv.q(s, a) - alpha * tau * std::log(mv.policy[s][a]))));
    }
  }
  CHECK(worst < 1e-8);
}

TEST_CASE("decomposition diagnostic at q = 2") {
  auto mdp = garnet(11);
  SolverConfig c = fixed_iters(50);
  c.q = EntropicIndex(2.0);
  c.decomposition_diagnostics = true;
  auto r = run_mvi_q(mdp, c);
  int evaluated = 0;
  for (const auto& rec : r.trace.records) {
    if (rec.skipped_states < static_cast<int>(mdp.n_states())) {
      ++evaluated;
      CHECK(rec.decomposition_defect < 1e-10);
      CHECK(rec.omitted_term >= 0.0);
    }
  }
  CHECK(evaluated > 0);
}

TEST_CASE("m applications reach the same fixed point") {
  auto mdp = garnet(12);
  SolverConfig c;
  c.q = EntropicIndex(2.0);
  c.alpha = 0.0;
  c.residual_tol = 1e-10;
  auto one = run_mvi_q(mdp, c);
  c.m = 3;
  auto three = run_mvi_q(mdp, c);
  REQUIRE(one.converged());
  REQUIRE(three.converged());
  CHECK(three.trace.size() < one.trace.size());
  CHECK(sup_distance(one.q, three.q) < 1e-8);
}

TEST_CASE("tsallis kl recursion converges at q = 2") {
  auto mdp = garnet(13, 10, 4);
  SolverConfig c;
  c.q = EntropicIndex(2.0);
  c.tau = 0.01;
  c.max_iters = 2000;
  auto r = run_reg_vi(mdp, c, Regularizer::TsallisKLtoPrev);
  CHECK(r.converged());
  CHECK(r.trace.residual_tail_monotone());
  CHECK(r.trace.records.back().residual < 1e-8);
}

TEST_CASE("divergence is reported, not thrown") {
  auto mdp = garnet(14);
  SolverConfig c;
  c.divergence_bound = 0.5;
  auto r = run_mvi_q(mdp, c);
  CHECK(r.status == RunStatus::Diverged);
  CHECK_FALSE(r.message.empty());
  CHECK_THROWS_AS(r.throw_if_diverged(), DivergenceError);
}

TEST_CASE("naive variant") {
  auto mdp = garnet(15);
  SolverConfig c = fixed_iters(30);
  c.q = EntropicIndex::infinity();
  CHECK_THROWS_AS(run_naive_lnq(mdp, c), UnsupportedError);
  c.q = EntropicIndex(1.0);
  auto a = run_naive_lnq(mdp, c);
  auto b = run_mvi_q(mdp, c);
  CHECK(a.q == b.q);
  CHECK(std::isfinite(a.trace.records.back().policy_value));
  c.q = EntropicIndex(2.0);
  auto n = run_naive_lnq(mdp, c);
  CHECK(n.trace.records.back().policy_value == doctest::Approx(initial_state_value(mdp, n.policy)));
}

TEST_CASE("trace output") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1e-300) == "1e-300");
  CHECK(format_double(INFINITY) == "inf");
  CHECK(format_double(-INFINITY) == "-inf");
  CHECK(format_double(NAN) == "nan");
  IterationTrace t;
  t.records.push_back(IterationRecord{1, 0.5, 0.5, 0.25, 0.1, INFINITY});
  CHECK(trace_csv(t) == "iter,residual,q_change,policy_tv,entropy,tkl,wall_ms\n1,0.5,0.5,0.25,0.1,inf,0\n");
  t.records.push_back(IterationRecord{2, 0.6});
  CHECK_FALSE(t.residual_tail_monotone(1.0));
}

TEST_CASE("runs are deterministic") {
  auto mdp = garnet(16);
  SolverConfig c;
  c.q = EntropicIndex(3.0);
  auto a = run_mvi_q(mdp, c);
  auto b = run_mvi_q(mdp, c);
  CHECK(a.q == b.q);
  CHECK(trace_csv(a.trace) == trace_csv(b.trace));
}

TEST_CASE("solve dispatches") {
  auto mdp = garnet(17);
  SolverConfig c = fixed_iters(20);
  c.algorithm = Algorithm::Mvi;
  CHECK(solve(mdp, c).q == run_mvi(mdp, c).q);
  c.algorithm = Algorithm::RegVI;
  c.regularizer = Regularizer::ShannonEntropy;
  CHECK(solve(mdp, c).q == run_reg_vi(mdp, c, Regularizer::ShannonEntropy).q);
}
