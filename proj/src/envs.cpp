#include "tsallis/envs.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "tsallis/errors.hpp"

namespace tsallis {

namespace {

using ojson = nlohmann::ordered_json;

class Stream {
 public:
  explicit Stream(std::uint64_t seed) : rng_(seed) {}

  double uniform() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::size_t below(std::size_t n) {
    const std::uint64_t limit = (std::numeric_limits<std::uint64_t>::max() / n) * n;
    std::uint64_t x = rng_();
    while (x >= limit) x = rng_();
    return static_cast<std::size_t>(x % n);
  }

 private:
  std::mt19937_64 rng_;
};

struct Builder {
  std::size_t ns;
  std::size_t na;
  std::vector<double> p;
  std::vector<double> r;

  Builder(std::size_t n_states, std::size_t n_actions)
      : ns(n_states), na(n_actions), p(n_states * n_actions * n_states, 0.0), r(n_states * n_actions, 0.0) {}

  void add(std::size_t s, std::size_t a, std::size_t t, double w) { p[(s * na + a) * ns + t] += w; }
  double& reward(std::size_t s, std::size_t a) { return r[s * na + a]; }

  TabularMdp build(double gamma, std::vector<double> d, const ojson& meta) {
    return TabularMdp(ns, na, std::move(p), std::move(r), gamma, std::move(d), meta.dump());
  }
};

ojson base_meta(const EnvSpec& spec) {
  ojson m;
  m["generator"] = to_string(spec.kind);
  m["seed"] = spec.seed;
  m["noise"] = spec.noise;
  return m;
}

std::vector<double> one_hot(std::size_t n, std::size_t i) {
  std::vector<double> d(n, 0.0);
  d[i] = 1.0;
  return d;
}

// up, right, down, left
constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {-1, 0, 1, 0};

std::size_t step(std::size_t x, std::size_t y, int dir, std::size_t w, std::size_t h) {
  const long nx = std::clamp<long>(static_cast<long>(x) + kDx[dir], 0, static_cast<long>(w) - 1);
  const long ny = std::clamp<long>(static_cast<long>(y) + kDy[dir], 0, static_cast<long>(h) - 1);
  return static_cast<std::size_t>(ny) * w + static_cast<std::size_t>(nx);
}

// Each intended direction with its slip outcomes.
template <typename F>
void for_each_outcome(int dir, double noise, F&& f) {
  f(dir, 1.0 - noise);
  if (noise > 0.0) {
    f((dir + 1) % 4, noise / 2.0);
    f((dir + 3) % 4, noise / 2.0);
  }
}

}  // namespace

void EnvSpec::validate() const {
  if (!(noise >= 0.0 && noise <= 1.0)) throw DomainError("noise must lie in [0, 1]");
  if (!(gamma > 0.0 && gamma < 1.0)) throw DomainError("gamma must lie strictly between 0 and 1");
  switch (kind) {
    case EnvKind::Chain:
      if (length < 2) throw DomainError("chain length must be at least 2");
      break;
    case EnvKind::Gridworld:
    case EnvKind::Cliff:
      if (width < 2 || height < 2) throw DomainError("grid width and height must be at least 2");
      break;
    case EnvKind::RandomMdp:
      if (n_states < 1 || n_actions < 1) throw DomainError("random MDP needs n_states, n_actions >= 1");
      if (branching < 1 || branching > n_states) {
        throw DomainError("branching must lie in [1, n_states]");
      }
      break;
  }
}

EnvKind env_kind_from_string(const std::string& name) {
  if (name == "chain") return EnvKind::Chain;
  if (name == "gridworld") return EnvKind::Gridworld;
  if (name == "cliff") return EnvKind::Cliff;
  if (name == "random") return EnvKind::RandomMdp;
  throw DomainError("unknown environment kind '" + name + "' (chain, gridworld, cliff, random)");
}

std::string to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::Chain: return "chain";
    case EnvKind::Gridworld: return "gridworld";
    case EnvKind::Cliff: return "cliff";
    case EnvKind::RandomMdp: return "random";
  }
  return "unknown";
}

TabularMdp make_chain(const EnvSpec& spec) {
  spec.validate();
  const std::size_t n = spec.length;
  Builder b(n, 2);
  const std::size_t goal = n - 1;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < 2; ++a) {
      if (s == goal) {
        b.add(s, a, s, 1.0);
        b.reward(s, a) = 1.0;
        continue;
      }
      const std::size_t left = s == 0 ? 0 : s - 1;
      const std::size_t right = s + 1;
      b.add(s, a, a == 1 ? right : left, 1.0 - spec.noise);
      if (spec.noise > 0.0) b.add(s, a, a == 1 ? left : right, spec.noise);
    }
  }
  ojson meta = base_meta(spec);
  meta["length"] = n;
  return b.build(spec.gamma, one_hot(n, 0), meta);
}

TabularMdp make_gridworld(const EnvSpec& spec) {
  spec.validate();
  const std::size_t w = spec.width, h = spec.height, n = w * h;
  Builder b(n, 4);
  const std::size_t goal = n - 1;
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t x = s % w, y = s / w;
    for (int a = 0; a < 4; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      if (s == goal) {
        b.add(s, ua, s, 1.0);
        b.reward(s, ua) = 1.0;
        continue;
      }
      for_each_outcome(a, spec.noise, [&](int dir, double pr) { b.add(s, ua, step(x, y, dir, w, h), pr); });
    }
  }
  ojson meta = base_meta(spec);
  meta["width"] = w;
  meta["height"] = h;
  return b.build(spec.gamma, one_hot(n, 0), meta);
}

TabularMdp make_cliff(const EnvSpec& spec) {
  spec.validate();
  const std::size_t w = spec.width, h = spec.height, n = w * h;
  Builder b(n, 4);
  const std::size_t start = (h - 1) * w;
  const std::size_t goal = n - 1;
  auto is_cliff = [&](std::size_t s) { return s > start && s < goal; };
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t x = s % w, y = s / w;
    for (int a = 0; a < 4; ++a) {
      const auto ua = static_cast<std::size_t>(a);
      if (s == goal) {
        b.add(s, ua, s, 1.0);
        b.reward(s, ua) = 1.0;
        continue;
      }
      if (is_cliff(s)) {
        b.add(s, ua, start, 1.0);
        continue;
      }
      for_each_outcome(a, spec.noise, [&](int dir, double pr) {
        const std::size_t t = step(x, y, dir, w, h);
        if (is_cliff(t)) {
          b.add(s, ua, start, pr);
          b.reward(s, ua) -= 100.0 * pr;
        } else {
          b.add(s, ua, t, pr);
        }
      });
    }
  }
  ojson meta = base_meta(spec);
  meta["width"] = w;
  meta["height"] = h;
  return b.build(spec.gamma, one_hot(n, start), meta);
}

TabularMdp make_random_mdp(const EnvSpec& spec) {
  spec.validate();
  const std::size_t ns = spec.n_states, na = spec.n_actions, k = spec.branching;
  Builder b(ns, na);
  Stream rng(spec.seed);
  std::vector<std::size_t> pool(ns);
  std::vector<double> weights(k);
  for (std::size_t s = 0; s < ns; ++s) {
    for (std::size_t a = 0; a < na; ++a) {
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t i = 0; i < k; ++i) {
        std::swap(pool[i], pool[i + rng.below(ns - i)]);
      }
      double total = 0.0;
      for (double& v : weights) {
        v = -std::log(1.0 - rng.uniform());
        total += v;
      }
      if (!(total > 0.0)) {
        // All draws were exactly zero; fall back to equal weights.
        std::fill(weights.begin(), weights.end(), 1.0);
        total = static_cast<double>(k);
      }
      for (std::size_t i = 0; i < k; ++i) b.add(s, a, pool[i], weights[i] / total);
      b.reward(s, a) = rng.uniform();
    }
  }
  ojson meta = base_meta(spec);
  meta["n_states"] = ns;
  meta["n_actions"] = na;
  meta["branching"] = k;
  return b.build(spec.gamma, std::vector<double>(ns, 1.0 / static_cast<double>(ns)), meta);
}

TabularMdp make_env(const EnvSpec& spec) {
  switch (spec.kind) {
    case EnvKind::Chain: return make_chain(spec);
    case EnvKind::Gridworld: return make_gridworld(spec);
    case EnvKind::Cliff: return make_cliff(spec);
    case EnvKind::RandomMdp: return make_random_mdp(spec);
  }
  throw DomainError("unknown environment kind");
}

}  // namespace tsallis
