#pragma once

// Seeded tabular benchmark MDPs.
//
// Randomness comes from std::mt19937_64 (the 64-bit Mersenne Twister, whose
// 10000th output from the default seed is 9981545732273789042) with explicit
// conversions, so a seed gives the same bytes on every platform:
//   uniform double  u = (x >> 11) * 2^-53
//   bounded integer  rejection sampling below the largest multiple of n
//   Dirichlet(1)    normalized -log(1 - u)

#include <cstdint>
#include <string>

#include "tsallis/mdp.hpp"

namespace tsallis {

enum class EnvKind { Chain, Gridworld, Cliff, RandomMdp };

struct EnvSpec {
  EnvKind kind = EnvKind::Chain;
  std::size_t length = 10;     // chain
  std::size_t width = 4;       // gridworld, cliff
  std::size_t height = 4;
  std::size_t n_states = 10;   // random
  std::size_t n_actions = 4;
  std::size_t branching = 3;
  double noise = 0.0;
  double gamma = 0.9;
  std::uint64_t seed = 0;

  void validate() const;
};

EnvKind env_kind_from_string(const std::string& name);
std::string to_string(EnvKind kind);

// States 0..length-1, actions 0 = left, 1 = right. A slip reverses the move.
// The rightmost state is absorbing and pays 1 per step; the chain starts at 0.
TabularMdp make_chain(const EnvSpec& spec);

// Cells indexed y * width + x from the top-left start. Actions up, right,
// down, left; a slip moves to one of the two perpendicular directions with
// probability noise / 2 each. The bottom-right goal is absorbing and pays 1.
TabularMdp make_gridworld(const EnvSpec& spec);

// Start bottom-left, goal bottom-right, cliff cells between them on the
// bottom row. Stepping into the cliff costs 100 and returns to the start, so
// r(s, a) = -100 * P(fall | s, a). Cliff cells themselves are unreachable
// and lead back to the start.
TabularMdp make_cliff(const EnvSpec& spec);

// Garnet-style: every (s, a) moves to `branching` distinct uniformly chosen
// states with Dirichlet(1) weights; rewards uniform on [0, 1).
TabularMdp make_random_mdp(const EnvSpec& spec);

TabularMdp make_env(const EnvSpec& spec);

}  // namespace tsallis
