#include "tsallis/verify.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <random>
#include <sstream>

#include "tsallis/envs.hpp"
#include "tsallis/errors.hpp"
#include "tsallis/oracles.hpp"
#include "tsallis/policy.hpp"
#include "tsallis/solvers.hpp"

namespace tsallis {

namespace {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : g_(seed) {}
  double uniform(double lo, double hi) { return lo + (hi - lo) * (static_cast<double>(g_() >> 11) * 0x1.0p-53); }
  std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(g_); }
  std::vector<double> row(std::size_t n, double lo, double hi) {
    std::vector<double> r(n);
    for (double& v : r) v = uniform(lo, hi);
    return r;
  }
  std::vector<double> simplex(std::size_t n) {
    std::vector<double> w(n);
    double t = 0.0;
    for (double& v : w) {
      v = -std::log(1.0 - uniform(0.0, 1.0)) + 1e-12;
      t += v;
    }
    for (double& v : w) v /= t;
    return w;
  }

 private:
  std::mt19937_64 g_;
};

std::string list(std::span<const double> v) {
  std::string s = "[";
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ",";
    s += format_double(v[i]);
  }
  return s + "]";
}

class Check {
 public:
  Check(std::string name, double tol) {
    r_.name = std::move(name);
    r_.tolerance = tol;
  }

  void record(double defect, const std::function<std::string()>& describe) {
    ++r_.cases;
    const bool bad = !(defect <= r_.tolerance);
    if (bad && !failed_) {
      failed_ = true;
      r_.worst = defect;
      r_.witness = describe();
    } else if (!failed_ && defect > r_.worst) {
      r_.worst = defect;
      r_.witness = describe();
    } else if (failed_ && !(defect <= r_.worst)) {
      r_.worst = defect;
    }
  }

  CheckResult done() {
    r_.passed = !failed_;
    return r_;
  }

 private:
  CheckResult r_;
  bool failed_ = false;
};

TabularMdp garnet(std::uint64_t seed, std::size_t ns, std::size_t na) {
  EnvSpec s;
  s.kind = EnvKind::RandomMdp;
  s.n_states = ns;
  s.n_actions = na;
  s.branching = std::min<std::size_t>(3, ns);
  s.seed = seed;
  return make_env(s);
}

QTable advantage_learning(const TabularMdp& mdp, double alpha, int iters) {
  QTable q(mdp.n_states(), mdp.n_actions());
  for (int k = 0; k < iters; ++k) {
    std::vector<double> v(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      const auto r = q.row(s);
      v[s] = *std::max_element(r.begin(), r.end());
    }
    QTable next = backup_state_values(mdp, v);
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      for (std::size_t a = 0; a < mdp.n_actions(); ++a) next(s, a) += alpha * (q(s, a) - v[s]);
    }
    q = std::move(next);
  }
  return q;
}

SolverConfig fixed(int iters, double q, double tau, double alpha) {
  SolverConfig c;
  c.max_iters = iters;
  c.residual_tol = 1e-300;
  c.q = EntropicIndex(q);
  c.tau = tau;
  c.alpha = alpha;
  return c;
}

}  // namespace

std::vector<CheckResult> run_verify(const VerifyOptions& options) {
  if (options.cases < 1) throw DomainError("cases must be positive");
  const int n = options.cases;
  const int n_rows = std::max(10, n / 2);
  const int n_opt = std::max(5, n / 20);
  const int n_mdps = std::max(2, n / 50);
  Rng rng(options.seed);
  std::vector<CheckResult> out;

  {
    Check c("q-log/q-exp inverse pair", 1e-10);
    for (int i = 0; i < n; ++i) {
      const double q = rng.uniform(0.1, 5.0), x = rng.uniform(0.01, 100.0);
      const double back = q_exp(q_log(x, EntropicIndex(q)), EntropicIndex(q));
      c.record(std::abs(back - x) / std::max(1.0, x), [&] { return "q=" + format_double(q) + " x=" + format_double(x); });
    }
    out.push_back(c.done());
  }
  {
    Check c("pseudo-additivity", 1e-10);
    for (int i = 0; i < n; ++i) {
      const double q = rng.uniform(0.1, 5.0), a = rng.uniform(0.1, 10.0), b = rng.uniform(0.1, 10.0);
      const EntropicIndex qi(q);
      const double scale = std::max(1.0, std::abs(q_log(a * b, qi)));
      c.record(std::abs(pseudo_additivity_defect(a, b, qi)) / scale,
               [&] { return "q=" + format_double(q) + " a=" + format_double(a) + " b=" + format_double(b); });
    }
    out.push_back(c.done());
  }
  {
    Check c("two-point identity", 1e-10);
    for (int i = 0; i < n; ++i) {
      const double q = rng.uniform(0.2, 3.0), x = rng.uniform(-0.3, 1.0), y = rng.uniform(-0.3, 1.0);
      const EntropicIndex qi(q);
      if (q == 1.0 || !(1.0 + (q - 1.0) * x > 0.0) || !(1.0 + (q - 1.0) * y > 0.0) ||
          !(1.0 + (q - 1.0) * (x + y) > 0.0)) {
        continue;
      }
      c.record(std::abs(two_point_identity_defect(x, y, qi)),
               [&] { return "q=" + format_double(q) + " x=" + format_double(x) + " y=" + format_double(y); });
    }
    out.push_back(c.done());
  }
  {
    Check c("tsallis kl nonnegative, zero iff equal", 1e-10);
    for (int i = 0; i < n; ++i) {
      const double q = rng.uniform(0.1, 5.0);
      const std::size_t k = 2 + rng.index(7);
      const auto p = rng.simplex(k), m = rng.simplex(k);
      const EntropicIndex qi(q);
      const double d = tsallis_kl(p, m, qi);
      const double self = std::abs(tsallis_kl(p, p, qi));
      c.record(std::max(std::max(0.0, -d), self), [&] { return "q=" + format_double(q) + " p=" + list(p) + " m=" + list(m); });
    }
    out.push_back(c.done());
  }
  {
    Check c("bounded entropy 0 <= S_q <= -ln_q(1/n)", 1e-10);
    for (int i = 0; i < n; ++i) {
      const double q = rng.uniform(0.1, 5.0);
      const std::size_t k = 1 + rng.index(8);
      const auto p = rng.simplex(k);
      const EntropicIndex qi(q);
      const double s = tsallis_entropy(p, qi);
      const double hi = -q_log(1.0 / static_cast<double>(k), qi);
      c.record(std::max({0.0, -s, s - hi}), [&] { return "q=" + format_double(q) + " p=" + list(p); });
    }
    out.push_back(c.done());
  }
  {
    const SupportRule rule = options.fault == VerifyFault::SparsemaxNonStrict ? SupportRule::NonStrict : SupportRule::Strict;
    Check c("sparsemax closed form = support enumeration", 1e-8);
    auto one = [&](const std::vector<double>& row, double tau) {
      const auto cf = sparsemax_policy(row, tau, rule);
      const auto en = oracles::sparsemax_by_enumeration(row, tau);
      std::size_t en_support = 0;
      for (double w : en) en_support += w > 0.0;
      double d = 0.0;
      for (std::size_t a = 0; a < row.size(); ++a) d = std::max(d, std::abs(cf.policy[a] - en[a]));
      if (cf.support.size() != en_support) d = std::numeric_limits<double>::infinity();
      c.record(d, [&] {
        return "row=" + list(row) + " tau=" + format_double(tau) + " support " + std::to_string(cf.support.size()) +
               " vs " + std::to_string(en_support);
      });
    };
    one({3.0, 1.0, 0.0}, 1.0);
    for (int i = 0; i < n_rows; ++i) {
      const std::size_t k = 1 + rng.index(8);
      const double tau = std::array{0.1, 1.0, 10.0}[rng.index(3)];
      std::vector<double> row = rng.row(k, -5.0, 5.0);
      // Half the rows are integer valued so that boundary ties occur.
      if (i % 2) for (double& v : row) v = std::round(v);
      one(row, tau);
    }
    out.push_back(c.done());
  }
  {
    Check c("sparsemax = simplex optimizer", 1e-8);
    for (int i = 0; i < n_opt; ++i) {
      const std::size_t k = 2 + rng.index(7);
      const double tau = std::array{0.1, 1.0, 10.0}[rng.index(3)];
      const auto row = rng.row(k, -5.0, 5.0);
      const auto opt = oracles::entropy_greedy_by_optimization(row, tau, EntropicIndex(2.0));
      const auto cf = sparsemax_policy(row, tau);
      const double d = opt.converged ? total_variation(opt.argmax.weights(), cf.policy.weights())
                                     : std::numeric_limits<double>::infinity();
      c.record(d, [&] { return "row=" + list(row) + " tau=" + format_double(tau); });
    }
    out.push_back(c.done());
  }
  {
    Check c("tkl greedy (q=2) = simplex optimizer", 1e-7);
    for (int i = 0; i < n_opt; ++i) {
      const std::size_t k = 2 + rng.index(5);
      const double tau = rng.uniform(0.1, 3.0);
      const auto row = rng.row(k, -3.0, 3.0);
      const ProbVector prior(rng.simplex(k));
      const auto opt = oracles::tkl_greedy_by_optimization(row, prior, tau, EntropicIndex(2.0));
      const auto g = tkl_greedy(row, prior, tau, EntropicIndex(2.0));
      const double d = opt.converged ? total_variation(opt.argmax.weights(), g.policy.weights())
                                     : std::numeric_limits<double>::infinity();
      c.record(d, [&] { return "row=" + list(row) + " prior=" + list(prior.weights()) + " tau=" + format_double(tau); });
    }
    out.push_back(c.done());
  }
  {
    Check q1("reduction mvi(q=1) = mvi", 1e-10), a0("reduction mvi(q, alpha=0) = tsallis-vi", 1e-10),
        qinf("reduction mvi(q=inf) = advantage learning", 1e-10), cvi("reduction cvi = mvi (matched)", 1e-10),
        mterm("munchausen term alpha tau ln pi = alpha (Q - M Q)", 1e-10);
    for (int i = 0; i < n_mdps; ++i) {
      const std::uint64_t seed = options.seed * 1000 + static_cast<std::uint64_t>(i);
      const auto mdp = garnet(seed, 8, 4);
      const auto where = [&] { return "garnet seed=" + std::to_string(seed) + " 8x4"; };
      const int iters = 100;
      {
        const auto c = fixed(iters, 1.0, 0.5, 0.9);
        q1.record(sup_distance(run_mvi_q(mdp, c).q, run_mvi(mdp, c).q), where);
      }
      {
        const auto c = fixed(iters, 2.0, 0.5, 0.0);
        a0.record(sup_distance(run_mvi_q(mdp, c).q, run_tsallis_vi(mdp, c).q), where);
      }
      {
        auto c = fixed(iters, 1.0, 1.0, 0.7);
        c.q = EntropicIndex::infinity();
        qinf.record(sup_distance(run_mvi_q(mdp, c).q, advantage_learning(mdp, 0.7, iters)), where);
      }
      {
        auto c = fixed(iters, 1.0, 0.2, 0.8);
        auto m = c;
        m.tau = cvi_matched_mvi_tau(c);
        cvi.record(sup_distance(run_cvi(mdp, c).q, run_mvi(mdp, m).q), where);
      }
      {
        const auto r = run_mvi(mdp, fixed(20, 1.0, 0.5, 0.9));
        double d = 0.0;
        for (std::size_t s = 0; s < mdp.n_states(); ++s) {
          const auto row = r.q.row(s);
          const auto lp = log_softmax(row, 0.5);
          const double m = munchausen_baseline(row, 0.5, EntropicIndex(1.0), 0.5);
          for (std::size_t a = 0; a < row.size(); ++a) {
            d = std::max(d, std::abs(0.9 * 0.5 * lp[a] - 0.9 * (row[a] - m)) / std::max(1.0, std::abs(row[a])));
          }
        }
        mterm.record(d, where);
      }
    }
    for (Check* c : {&q1, &a0, &qinf, &cvi, &mterm}) out.push_back(c->done());
  }
  {
    Check c("kl-regularized policy = softmax of summed Q (10 iterations)", 1e-8);
    for (int i = 0; i < std::max(1, n_mdps / 4); ++i) {
      const std::uint64_t seed = options.seed * 2000 + static_cast<std::uint64_t>(i);
      const auto mdp = garnet(seed, 4, 3);
      std::vector<QTable> history{QTable(4, 3)};
      double worst = 0.0;
      for (int k = 1; k <= 10; ++k) {
        SolverConfig cfg = fixed(k, 1.0, 0.5, 0.0);
        const auto r = run_reg_vi(mdp, cfg, Regularizer::KLtoPrev);
        for (std::size_t s = 0; s < 4; ++s) {
          worst = std::max(worst, total_variation(r.policy[s].weights(), oracles::kl_average_policy(history, 0.5, s).weights()));
        }
        history.push_back(r.q);
      }
      c.record(worst, [&] { return "garnet seed=" + std::to_string(seed) + " 4x3 tau=0.5"; });
    }
    out.push_back(c.done());
  }
  {
    Check pe("product expansion identity", 1e-9), wa("weighted-average identity", 1e-9);
    for (int i = 0; i < n; ++i) {
      const double q = rng.uniform(0.5, 3.0);
      if (q == 1.0) continue;
      const std::size_t k = 2 + rng.index(5);
      const auto v = rng.row(k, 0.0, 0.4);
      const auto desc = [&] { return "q=" + format_double(q) + " values=" + list(v); };
      pe.record(oracles::product_expansion_defect(v, EntropicIndex(q)), desc);
      wa.record(oracles::weighted_average_identity_check(v, EntropicIndex(q)), desc);
    }
    out.push_back(pe.done());
    out.push_back(wa.done());
  }
  {
    Check c("tsallis kl recursion (q=2) converges, monotone tail", 1e-8);
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto mdp = garnet(seed, 10, 4);
      SolverConfig cfg;
      cfg.q = EntropicIndex(2.0);
      cfg.tau = 0.01;
      cfg.max_iters = 2000;
      const auto r = run_reg_vi(mdp, cfg, Regularizer::TsallisKLtoPrev);
      double d = r.trace.records.back().residual;
      if (!r.trace.residual_tail_monotone()) d = std::numeric_limits<double>::infinity();
      c.record(d, [&] { return "garnet seed=" + std::to_string(seed) + " 10x4 tau=0.01"; });
    }
    out.push_back(c.done());
  }
  return out;
}

std::string format_verify_table(const std::vector<CheckResult>& results) {
  std::size_t width = 0;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::ostringstream os;
  for (const auto& r : results) {
    os << (r.passed ? "PASS  " : "FAIL  ") << r.name << std::string(width - r.name.size() + 2, ' ') << "worst "
       << format_double(r.worst) << " (tol " << format_double(r.tolerance) << ", " << r.cases << " cases)";
    if (!r.passed) os << "  input: " << r.witness;
    os << '\n';
  }
  return os.str();
}

}  // namespace tsallis
