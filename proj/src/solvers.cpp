#include "tsallis/solvers.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>

#include "tsallis/errors.hpp"
#include "tsallis/simplex_opt.hpp"

namespace tsallis {

namespace {

struct Step {
  PolicyTable policy;
  QTable bonus;               // empty means zero
  std::vector<double> omega;  // per state
};

using StepFn = std::function<Step(const QTable& q, const PolicyTable& prev)>;
using DiagFn = std::function<void(const QTable& q, const PolicyTable& prev, const PolicyTable& next,
                                  IterationRecord& rec)>;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// sum_a pi(a) ln_q pi(a), with 0 ln_q 0 = 0. Shannon at q = inf (only greedy
// policies reach there, whose value is 0 either way).
double neg_entropy(const ProbVector& pi, EntropicIndex q) {
  const EntropicIndex qq = q.is_infinite() ? EntropicIndex(1.0) : q;
  return -tsallis_entropy(pi, qq);
}

EntropicIndex report_index(EntropicIndex q) { return q.is_infinite() ? EntropicIndex(1.0) : q; }

double default_bound(const TabularMdp& mdp) {
  return std::max(mdp.max_abs_reward(), 1.0) * 1e3 / (1.0 - mdp.gamma());
}

QTable apply_backup(const TabularMdp& mdp, const QTable& q, const Step& st) {
  std::vector<double> v(mdp.n_states());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) v[s] = dot(st.policy[s].weights(), q.row(s)) - st.omega[s];
  QTable out = backup_state_values(mdp, v);
  if (st.bonus.n_states() != 0) {
    for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += st.bonus.data()[i];
  }
  return out;
}

SolverResult drive(const TabularMdp& mdp, const SolverConfig& config, EntropicIndex diag_q,
                   const StepFn& step, const DiagFn& diag = {}, std::optional<QTable> initial = std::nullopt) {
  config.validate();
  const double bound = config.divergence_bound > 0.0 ? config.divergence_bound : default_bound(mdp);
  const EntropicIndex rq = report_index(diag_q);

  SolverResult res;
  res.q = initial ? *initial : QTable(mdp.n_states(), mdp.n_actions());
  if (res.q.n_states() != mdp.n_states() || res.q.n_actions() != mdp.n_actions()) {
    throw ShapeError("initial Q table does not match the MDP");
  }
  res.policy = PolicyTable::uniform(mdp.n_states(), mdp.n_actions());
  res.status = RunStatus::MaxIterations;

  for (int k = 0; k < config.max_iters; ++k) {
    const auto t0 = std::chrono::steady_clock::now();
    Step st = step(res.q, res.policy);

    QTable next = apply_backup(mdp, res.q, st);
    IterationRecord rec;
    rec.iter = k + 1;
    rec.residual = sup_distance(next, res.q);
    for (int j = 1; j < config.m; ++j) next = apply_backup(mdp, next, st);
    rec.q_change = sup_distance(next, res.q);

    double tv = 0.0, ent = 0.0, kl = 0.0;
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      tv += total_variation(st.policy[s].weights(), res.policy[s].weights());
      ent += tsallis_entropy(st.policy[s], rq);
      kl += tsallis_kl(st.policy[s], res.policy[s], rq);
    }
    const double ns = static_cast<double>(mdp.n_states());
    rec.policy_tv = tv / ns;
    rec.entropy = ent / ns;
    rec.tkl = kl / ns;
    if (config.track_policy_value) rec.policy_value = initial_state_value(mdp, st.policy);
    if (diag) diag(res.q, res.policy, st.policy, rec);
    if (config.record_timing) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    }
    res.trace.records.push_back(rec);

    bool finite = true;
    for (double v : next.data()) finite = finite && std::isfinite(v);
    if (!finite || next.max_abs() > bound) {
      res.status = RunStatus::Diverged;
      std::ostringstream msg;
      msg << "iterate left the bound " << bound << " at iteration " << k + 1;
      res.message = msg.str();
      res.policy = std::move(st.policy);
      return res;
    }
    res.q = std::move(next);
    res.policy = std::move(st.policy);
    if (rec.q_change < config.residual_tol) {
      res.status = RunStatus::Converged;
      return res;
    }
  }
  res.message = "reached max_iters without meeting residual_tol";
  return res;
}

// Per-state bonus from a scalar function of (s, a).
template <typename F>
QTable bonus_table(const TabularMdp& mdp, F&& f) {
  QTable b(mdp.n_states(), mdp.n_actions());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) b(s, a) = f(s, a);
  }
  return b;
}

// -ln_q(1/x) for x in [0, 1], extended to x = 0.
double neg_q_log_inverse(double x, EntropicIndex q) {
  if (x > 0.0) return -q_log(1.0 / x, q);
  if (q.value() < 1.0) return -1.0 / (1.0 - q.value());
  return -std::numeric_limits<double>::infinity();
}

// ln_q x for x in [0, 1], extended to x = 0.
double q_log_at(double x, EntropicIndex q) {
  if (x > 0.0) return q_log(x, q);
  if (q.value() > 1.0) return -1.0 / (q.value() - 1.0);
  return -std::numeric_limits<double>::infinity();
}

void decomposition(const SolverConfig& c, const QTable& q, const PolicyTable& prev, const PolicyTable& next,
                   IterationRecord& rec) {
  const EntropicIndex qi = c.q;
  const double a = c.alpha, tau = c.tau, d = qi.value() - 1.0;
  double worst = 0.0, omitted = 0.0;
  int skipped = 0;
  for (std::size_t s = 0; s < q.n_states(); ++s) {
    const ProbVector& pn = next[s];
    const ProbVector& pp = prev[s];
    bool inside = true;
    for (std::size_t b = 0; b < pn.size(); ++b) inside = inside && !(pn[b] > 0.0 && !(pp[b] > 0.0));
    if (!inside) {
      ++skipped;
      continue;
    }
    double lhs = 0.0, lin = 0.0, cross = 0.0;
    for (std::size_t b = 0; b < pn.size(); ++b) {
      if (!(pn[b] > 0.0)) continue;
      const double lq = q_log(pn[b], qi);
      const double linv = q_log(1.0 / pp[b], qi);
      lhs += pn[b] * (q(s, b) - tau * lq);
      lin += pn[b] * (q(s, b) + a * tau * linv);
      cross += pn[b] * lq * linv;
    }
    const double kl = tsallis_kl(pn, pp, qi);
    const double ent = tsallis_entropy(pn, qi);
    const double rhs = lin - a * tau * kl + (1.0 - a) * tau * ent + a * tau * d * cross;
    worst = std::max(worst, std::abs(lhs - rhs));
    omitted = std::max(omitted, std::abs(a * tau * d * cross));
  }
  rec.decomposition_defect = worst;
  rec.omitted_term = omitted;
  rec.skipped_states = skipped;
}

SolverConfig with(const SolverConfig& c, Algorithm a) {
  SolverConfig out = c;
  out.algorithm = a;
  return out;
}

// Maximizer of <pi, Q> - kl D_q(pi || mu) + ent S_q(pi) with both weights positive.
ProbVector mixed_greedy(std::span<const double> row, const ProbVector& mu, double kl, double ent, EntropicIndex q) {
  std::vector<std::size_t> supp;
  for (std::size_t a = 0; a < row.size(); ++a) {
    if (mu[a] >= 1e-15) supp.push_back(a);
  }
  const std::size_t m = supp.size();
  std::vector<double> out(row.size(), 0.0);
  if (q.is_one()) {
    std::vector<double> logits(m);
    for (std::size_t i = 0; i < m; ++i) logits[i] = (kl * std::log(mu[supp[i]]) + row[supp[i]]) / (kl + ent);
    const double lse = logsumexp(logits);
    for (std::size_t i = 0; i < m; ++i) out[supp[i]] = std::exp(logits[i] - lse);
    return ProbVector::normalized(std::move(out));
  }
  const double qv = q.value();
  oracles::SimplexObjective f;
  f.value = [&](std::span<const double> x) {
    double v = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      v += x[i] * row[supp[i]];
      if (x[i] > 0.0) v -= x[i] * (kl * q_log(x[i] / mu[supp[i]], q) + ent * q_log(x[i], q));
    }
    return v;
  };
  f.gradient = [&](std::span<const double> x, std::span<double> g) {
    for (std::size_t i = 0; i < m; ++i) {
      if (x[i] > 0.0) {
        g[i] = row[supp[i]] - kl * (1.0 + qv * q_log(x[i] / mu[supp[i]], q)) - ent * (1.0 + qv * q_log(x[i], q));
      } else {
        g[i] = qv > 1.0 ? row[supp[i]] + (kl + ent) / (qv - 1.0) : std::numeric_limits<double>::infinity();
      }
    }
  };
  const auto r = oracles::simplex_maximize(f, m);
  if (!r.converged) throw ConvergenceError("regularized greedy step: simplex optimizer did not converge");
  for (std::size_t i = 0; i < m; ++i) out[supp[i]] = r.argmax[i];
  return ProbVector::normalized(std::move(out));
}

}  // namespace

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::RegVI: return "reg-vi";
    case Algorithm::MviQ: return "mvi-q";
    case Algorithm::TsallisVI: return "tsallis-vi";
    case Algorithm::Mvi: return "mvi";
    case Algorithm::Cvi: return "cvi";
    case Algorithm::NaiveLnq: return "naive-lnq";
  }
  return "unknown";
}

Algorithm algorithm_from_string(const std::string& name) {
  for (Algorithm a : {Algorithm::RegVI, Algorithm::MviQ, Algorithm::TsallisVI, Algorithm::Mvi, Algorithm::Cvi,
                      Algorithm::NaiveLnq}) {
    if (to_string(a) == name) return a;
  }
  throw DomainError("unknown algorithm '" + name + "' (reg-vi, mvi-q, tsallis-vi, mvi, cvi, naive-lnq)");
}

std::string to_string(Regularizer r) {
  switch (r) {
    case Regularizer::TsallisEntropy: return "tsallis-entropy";
    case Regularizer::TsallisKLtoPrev: return "tsallis-kl";
    case Regularizer::ShannonEntropy: return "shannon-entropy";
    case Regularizer::KLtoPrev: return "kl";
  }
  return "unknown";
}

Regularizer regularizer_from_string(const std::string& name) {
  for (Regularizer r : {Regularizer::TsallisEntropy, Regularizer::TsallisKLtoPrev, Regularizer::ShannonEntropy,
                        Regularizer::KLtoPrev}) {
    if (to_string(r) == name) return r;
  }
  throw DomainError("unknown regularizer '" + name + "' (tsallis-entropy, tsallis-kl, shannon-entropy, kl)");
}

std::string to_string(RunStatus s) {
  switch (s) {
    case RunStatus::Converged: return "converged";
    case RunStatus::MaxIterations: return "max_iters";
    case RunStatus::Diverged: return "diverged";
  }
  return "unknown";
}

void SolverConfig::validate() const {
  if (!(tau > 0.0) || !std::isfinite(tau)) throw DomainError("tau must be positive and finite");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw DomainError("alpha must lie in [0, 1]");
  if (!(p > 0.0) || !std::isfinite(p)) throw DomainError("p must be positive and finite");
  if (max_iters < 1) throw DomainError("max_iters must be at least 1");
  if (!(residual_tol > 0.0)) throw DomainError("residual_tol must be positive");
  if (m < 1) throw DomainError("m must be at least 1");
  if (!(divergence_bound >= 0.0)) throw DomainError("divergence_bound must be nonnegative");
}

bool IterationTrace::residual_tail_monotone(double fraction) const {
  const std::size_t n = records.size();
  const std::size_t tail = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(n))));
  const std::size_t start = n > tail ? n - tail : 0;
  for (std::size_t i = start + 1; i < n; ++i) {
    if (records[i].residual > records[i - 1].residual) return false;
  }
  return true;
}

void SolverResult::throw_if_diverged() const {
  if (status == RunStatus::Diverged) throw DivergenceError(message);
}

double boltzmann_value(std::span<const double> row, double tau) {
  return dot(softmax_policy(row, tau).weights(), row);
}

double mq_value(std::span<const double> row, double tau, EntropicIndex q, double p) {
  if (q.is_one()) return boltzmann_value(row, tau);
  return dot(regularized_greedy(row, PolicySpec{q, tau, p}).weights(), row);
}

double munchausen_baseline(std::span<const double> row, double tau, EntropicIndex q, double p) {
  if (q.is_one()) {
    std::vector<double> z(row.size());
    for (std::size_t a = 0; a < row.size(); ++a) z[a] = row[a] / tau;
    return tau * logsumexp(z);
  }
  return mq_value(row, tau, q, p);
}

SolverResult run_mvi_q(const TabularMdp& mdp, const SolverConfig& config) {
  const PolicySpec spec{config.q, config.tau, config.p};
  spec.validate();
  const EntropicIndex q = config.q;
  StepFn step = [&](const QTable& qt, const PolicyTable&) {
    Step st;
    std::vector<ProbVector> rows;
    rows.reserve(mdp.n_states());
    st.omega.resize(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      rows.push_back(regularized_greedy(qt.row(s), spec));
      st.omega[s] = q.is_infinite() ? 0.0 : config.tau * neg_entropy(rows.back(), q);
    }
    st.policy = PolicyTable(std::move(rows));
    if (config.alpha == 0.0) return st;
    if (config.munchausen == MunchausenForm::Advantage) {
      std::vector<double> base(mdp.n_states());
      for (std::size_t s = 0; s < mdp.n_states(); ++s) {
        base[s] = q.is_one() ? munchausen_baseline(qt.row(s), config.tau, q, config.p)
                             : dot(st.policy[s].weights(), qt.row(s));
      }
      st.bonus = bonus_table(mdp, [&](std::size_t s, std::size_t a) { return config.alpha * (qt(s, a) - base[s]); });
    } else {
      if (q.is_infinite()) throw UnsupportedError("the log-policy Munchausen form needs a finite q");
      st.bonus = bonus_table(mdp, [&](std::size_t s, std::size_t a) {
        return config.alpha * config.tau * std::max(neg_q_log_inverse(st.policy[s][a], q), config.log_floor);
      });
    }
    return st;
  };
  DiagFn diag;
  if (config.decomposition_diagnostics && q.is_finite()) {
    diag = [&](const QTable& qt, const PolicyTable& prev, const PolicyTable& next, IterationRecord& rec) {
      decomposition(config, qt, prev, next, rec);
    };
  }
  return drive(mdp, config, q, step, diag);
}

SolverResult run_mvi(const TabularMdp& mdp, const SolverConfig& config) {
  const double tau = config.tau;
  StepFn step = [&](const QTable& qt, const PolicyTable&) {
    Step st;
    std::vector<ProbVector> rows;
    rows.reserve(mdp.n_states());
    st.omega.resize(mdp.n_states());
    std::vector<double> lse(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      const std::vector<double> lp = log_softmax(qt.row(s), tau);
      std::vector<double> w(lp.size());
      for (std::size_t a = 0; a < lp.size(); ++a) w[a] = std::exp(lp[a]);
      rows.push_back(ProbVector::normalized(std::move(w)));
      st.omega[s] = tau * dot(rows.back().weights(), lp);
      lse[s] = munchausen_baseline(qt.row(s), tau, EntropicIndex(1.0), config.p);
    }
    st.policy = PolicyTable(std::move(rows));
    if (config.alpha > 0.0) {
      st.bonus = bonus_table(mdp, [&](std::size_t s, std::size_t a) { return config.alpha * (qt(s, a) - lse[s]); });
    }
    return st;
  };
  return drive(mdp, config, EntropicIndex(1.0), step);
}

SolverResult run_tsallis_vi(const TabularMdp& mdp, const SolverConfig& config) {
  return run_reg_vi(mdp, config, Regularizer::TsallisEntropy);
}

RegularizerWeights regularizer_weights(Regularizer r, const SolverConfig& config) {
  switch (r) {
    case Regularizer::TsallisEntropy: return {0.0, config.tau, config.q};
    case Regularizer::TsallisKLtoPrev: return {config.tau, 0.0, config.q};
    case Regularizer::ShannonEntropy: return {0.0, config.tau, EntropicIndex(1.0)};
    case Regularizer::KLtoPrev: return {config.tau, 0.0, EntropicIndex(1.0)};
  }
  throw DomainError("unknown regularizer");
}

SolverResult run_reg_vi(const TabularMdp& mdp, const SolverConfig& config, Regularizer regularizer) {
  return run_reg_vi(mdp, config, regularizer_weights(regularizer, config));
}

SolverResult run_reg_vi(const TabularMdp& mdp, const SolverConfig& config, const RegularizerWeights& w,
                        const std::optional<QTable>& initial_q) {
  if (w.kl_weight < 0.0 || w.entropy_weight < 0.0) throw DomainError("regularizer weights must be nonnegative");
  const bool has_kl = w.kl_weight > 0.0;
  const bool has_ent = w.entropy_weight > 0.0;
  if ((has_kl || has_ent) && w.q.is_infinite()) throw UnsupportedError("regularizers need a finite q");
  const EntropicIndex q = w.q;
  StepFn step = [&](const QTable& qt, const PolicyTable& prev) {
    Step st;
    std::vector<ProbVector> rows;
    rows.reserve(mdp.n_states());
    st.omega.resize(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      const auto row = qt.row(s);
      if (!has_kl && !has_ent) {
        rows.push_back(greedy_policy(row));
      } else if (!has_kl) {
        rows.push_back(regularized_greedy(row, PolicySpec{q, w.entropy_weight, config.p}));
      } else if (!has_ent) {
        rows.push_back(tkl_greedy_policy(row, prev[s], w.kl_weight, q));
      } else {
        rows.push_back(mixed_greedy(row, prev[s], w.kl_weight, w.entropy_weight, q));
      }
      double omega = 0.0;
      if (has_kl) omega += w.kl_weight * tsallis_kl(rows.back(), prev[s], q);
      if (has_ent) omega -= w.entropy_weight * tsallis_entropy(rows.back(), q);
      st.omega[s] = omega;
    }
    st.policy = PolicyTable(std::move(rows));
    return st;
  };
  return drive(mdp, config, q, step, {}, initial_q);
}

double cvi_zeta(const SolverConfig& config) {
  if (!(config.alpha < 1.0)) throw DomainError("cvi needs alpha < 1");
  return (1.0 - config.alpha) / config.tau;
}

double cvi_matched_mvi_tau(const SolverConfig& config) { return 1.0 / cvi_zeta(config); }

SolverResult run_cvi(const TabularMdp& mdp, const SolverConfig& config) {
  config.validate();
  const double zeta = cvi_zeta(config);
  StepFn step = [&](const QTable& psi, const PolicyTable&) {
    Step st;
    std::vector<ProbVector> rows;
    rows.reserve(mdp.n_states());
    st.omega.resize(mdp.n_states());
    std::vector<double> mz(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      const auto row = psi.row(s);
      std::vector<double> z(row.size());
      for (std::size_t a = 0; a < row.size(); ++a) z[a] = zeta * row[a];
      mz[s] = logsumexp(z) / zeta;
      rows.push_back(softmax_policy(row, 1.0 / zeta));
      st.omega[s] = dot(rows.back().weights(), row) - mz[s];
    }
    st.policy = PolicyTable(std::move(rows));
    if (config.alpha > 0.0) {
      st.bonus = bonus_table(mdp, [&](std::size_t s, std::size_t a) { return config.alpha * (psi(s, a) - mz[s]); });
    }
    return st;
  };
  return drive(mdp, config, EntropicIndex(1.0), step);
}

SolverResult run_naive_lnq(const TabularMdp& mdp, const SolverConfig& config) {
  SolverConfig c = config;
  c.track_policy_value = true;
  if (config.q.is_one()) return run_mvi_q(mdp, with(c, Algorithm::MviQ));
  if (config.q.is_infinite()) throw UnsupportedError("naive ln_q substitution needs a finite q");
  const PolicySpec spec{config.q, config.tau, config.p};
  spec.validate();
  const EntropicIndex q = config.q;
  StepFn step = [&](const QTable& qt, const PolicyTable&) {
    Step st;
    std::vector<ProbVector> rows;
    rows.reserve(mdp.n_states());
    st.omega.resize(mdp.n_states());
    for (std::size_t s = 0; s < mdp.n_states(); ++s) {
      rows.push_back(regularized_greedy(qt.row(s), spec));
      st.omega[s] = config.tau * neg_entropy(rows.back(), q);
    }
    st.policy = PolicyTable(std::move(rows));
    if (config.alpha > 0.0) {
      st.bonus = bonus_table(mdp, [&](std::size_t s, std::size_t a) {
        return config.alpha * config.tau * std::max(q_log_at(st.policy[s][a], q), config.log_floor);
      });
    }
    return st;
  };
  return drive(mdp, c, q, step);
}

SolverResult solve(const TabularMdp& mdp, const SolverConfig& config) {
  switch (config.algorithm) {
    case Algorithm::RegVI: return run_reg_vi(mdp, config, config.regularizer);
    case Algorithm::MviQ: return run_mvi_q(mdp, config);
    case Algorithm::TsallisVI: return run_tsallis_vi(mdp, config);
    case Algorithm::Mvi: return run_mvi(mdp, config);
    case Algorithm::Cvi: return run_cvi(mdp, config);
    case Algorithm::NaiveLnq: return run_naive_lnq(mdp, config);
  }
  throw DomainError("unknown algorithm");
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trace_csv(const IterationTrace& trace) {
  std::string out = "iter,residual,q_change,policy_tv,entropy,tkl,wall_ms\n";
  for (const IterationRecord& r : trace.records) {
    out += std::to_string(r.iter);
    for (double v : {r.residual, r.q_change, r.policy_tv, r.entropy, r.tkl, r.wall_ms}) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

}  // namespace tsallis
