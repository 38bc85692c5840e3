#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "tsallis/envs.hpp"
#include "tsallis/errors.hpp"
#include "tsallis/solvers.hpp"

using namespace tsallis;

namespace {

void check_rows(const TabularMdp& mdp) {
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      double total = 0.0;
      for (double p : mdp.transition(s, a)) {
        CHECK(p >= 0.0);
        total += p;
      }
      CHECK(std::abs(total - 1.0) < 1e-12);
    }
  }
}

EnvSpec spec_of(EnvKind kind) {
  EnvSpec s;
  s.kind = kind;
  return s;
}

}  // namespace

TEST_CASE("mt19937_64 matches the standard check value") {
  std::mt19937_64 g;
  g.discard(9999);
  CHECK(g() == 9981545732273789042ull);
}

TEST_CASE("all generators produce stochastic rows") {
  for (EnvKind k : {EnvKind::Chain, EnvKind::Gridworld, EnvKind::Cliff, EnvKind::RandomMdp}) {
    EnvSpec s = spec_of(k);
    s.noise = 0.2;
    check_rows(make_env(s));
  }
}

TEST_CASE("kind names round trip") {
  for (EnvKind k : {EnvKind::Chain, EnvKind::Gridworld, EnvKind::Cliff, EnvKind::RandomMdp}) {
    CHECK(env_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(env_kind_from_string("maze"), DomainError);
}

TEST_CASE("EnvSpec validation") {
  EnvSpec s = spec_of(EnvKind::RandomMdp);
  s.branching = 11;
  CHECK_THROWS_AS(make_env(s), DomainError);
  s = spec_of(EnvKind::Chain);
  s.noise = 1.5;
  CHECK_THROWS_AS(make_env(s), DomainError);
  s.noise = 0.0;
  s.gamma = 1.0;
  CHECK_THROWS_AS(make_env(s), DomainError);
}

TEST_CASE("random MDPs are determined by the seed") {
  EnvSpec s = spec_of(EnvKind::RandomMdp);
  s.seed = 42;
  const auto a = mdp_to_json(make_env(s));
  CHECK(a == mdp_to_json(make_env(s)));
  s.seed = 43;
  CHECK(a != mdp_to_json(make_env(s)));

  s.seed = 42;
  auto mdp = make_env(s);
  for (std::size_t st = 0; st < mdp.n_states(); ++st) {
    for (std::size_t ac = 0; ac < mdp.n_actions(); ++ac) {
      int nonzero = 0;
      for (double p : mdp.transition(st, ac)) nonzero += p > 0.0;
      CHECK(nonzero == 3);
      CHECK(mdp.reward(st, ac) >= 0.0);
      CHECK(mdp.reward(st, ac) < 1.0);
    }
  }
}

TEST_CASE("chain dynamics") {
  EnvSpec s = spec_of(EnvKind::Chain);
  s.length = 4;
  s.noise = 0.25;
  auto mdp = make_env(s);
  CHECK(mdp.transition(1, 1)[2] == 0.75);
  CHECK(mdp.transition(1, 1)[0] == 0.25);
  CHECK(mdp.transition(0, 0)[0] == 0.75);
  CHECK(mdp.transition(3, 0)[3] == 1.0);
  CHECK(mdp.reward(3, 1) == 1.0);
  CHECK(mdp.initial_dist()[0] == 1.0);
}

TEST_CASE("gridworld slips sideways") {
  EnvSpec s = spec_of(EnvKind::Gridworld);
  s.width = 3;
  s.height = 3;
  s.noise = 0.2;
  auto mdp = make_env(s);
  // Centre cell 4 moving right: 0.8 to 5, 0.1 up to 1, 0.1 down to 7.
  auto row = mdp.transition(4, 1);
  CHECK(row[5] == doctest::Approx(0.8));
  CHECK(row[1] == doctest::Approx(0.1));
  CHECK(row[7] == doctest::Approx(0.1));
}

TEST_CASE("cliff penalties and the edge-hugging optimum") {
  EnvSpec s = spec_of(EnvKind::Cliff);
  s.width = 6;
  s.height = 3;
  auto mdp = make_env(s);
  const std::size_t start = 12;
  CHECK(mdp.initial_dist()[start] == 1.0);
  // Moving right from the start falls.
  CHECK(mdp.reward(start, 1) == -100.0);
  CHECK(mdp.transition(start, 1)[start] == 1.0);

  SolverConfig c;
  c.q = EntropicIndex::infinity();
  c.alpha = 0.0;
  auto res = run_mvi_q(mdp, c);
  REQUIRE(res.converged());
  // Up from the start, then right along the row above the cliff.
  CHECK(res.policy[start][0] == 1.0);
  for (std::size_t x = 0; x + 1 < 6; ++x) CHECK(res.policy[6 + x][1] == 1.0);

  s.noise = 0.1;
  auto noisy = make_env(s);
  CHECK(noisy.reward(6 + 2, 1) == doctest::Approx(-100.0 * 0.05));
}

TEST_CASE("garnet reward draws are uniform on average") {
  EnvSpec s = spec_of(EnvKind::RandomMdp);
  s.n_states = 100;
  s.n_actions = 100;
  s.seed = 7;
  auto mdp = make_env(s);
  double total = 0.0;
  for (double r : mdp.reward_data()) total += r;
  CHECK(std::abs(total / 1e4 - 0.5) < 0.02);
}

TEST_CASE("single-state garnet has V = r / (1 - gamma)") {
  EnvSpec s = spec_of(EnvKind::RandomMdp);
  s.n_states = 1;
  s.n_actions = 1;
  s.branching = 1;
  s.gamma = 0.8;
  auto mdp = make_env(s);
  PolicyTable pi = PolicyTable::uniform(1, 1);
  CHECK(initial_state_value(mdp, pi) == doctest::Approx(mdp.reward(0, 0) / 0.2).epsilon(1e-14));
}
