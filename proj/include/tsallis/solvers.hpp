#pragma once

// Regularized value iteration and the Munchausen family.
//
// Every solver starts from Q_0 = 0 and pi_0 uniform and repeats
//   pi_{k+1} = greedy step on Q_k (and, for KL terms, pi_k)
//   Q_{k+1}  = r + B_k + gamma P (<pi_{k+1}, Q> - Omega_k)   applied m times
// where B_k is the per-(s, a) Munchausen bonus and Omega_k the per-state
// regularizer, both frozen for the m applications.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tsallis/mdp.hpp"
#include "tsallis/policy.hpp"
#include "tsallis/qmath.hpp"

namespace tsallis {

enum class Algorithm { RegVI, MviQ, TsallisVI, Mvi, Cvi, NaiveLnq };
enum class Regularizer { TsallisEntropy, TsallisKLtoPrev, ShannonEntropy, KLtoPrev };
// Advantage: alpha (Q_k - M Q_k). LogPolicy: -alpha tau ln_q(1/pi_{k+1}),
// clipped below at SolverConfig::log_floor.
enum class MunchausenForm { Advantage, LogPolicy };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& name);
std::string to_string(Regularizer r);
Regularizer regularizer_from_string(const std::string& name);

struct SolverConfig {
  Algorithm algorithm = Algorithm::MviQ;
  EntropicIndex q{2.0};
  double tau = 1.0;
  double alpha = 0.9;
  double p = 0.5;
  int max_iters = 1000;
  double residual_tol = 1e-8;
  int m = 1;
  Regularizer regularizer = Regularizer::TsallisKLtoPrev;  // RegVI only
  MunchausenForm munchausen = MunchausenForm::Advantage;
  double log_floor = -1e3;
  // Largest allowed ||Q||_inf; 0 selects max(r_max, 1) * 1e3 / (1 - gamma).
  double divergence_bound = 0.0;
  bool record_timing = false;
  // Exact unregularized value of pi_{k+1} at the initial distribution.
  bool track_policy_value = false;
  // Per-iteration generalized-value decomposition check (MviQ only).
  bool decomposition_diagnostics = false;

  // Throws DomainError naming the offending field.
  void validate() const;
};

struct IterationRecord {
  int iter = 0;
  double residual = 0.0;    // ||T Q_k - Q_k||_inf, first application
  double q_change = 0.0;    // ||Q_{k+1} - Q_k||_inf
  double policy_tv = 0.0;   // mean_s TV(pi_{k+1}, pi_k)
  double entropy = 0.0;     // mean_s S_q(pi_{k+1})
  double tkl = 0.0;         // mean_s D_q(pi_{k+1} || pi_k), may be +inf
  double wall_ms = 0.0;
  double policy_value = std::numeric_limits<double>::quiet_NaN();
  // Decomposition diagnostics: largest per-state defect of the full identity,
  // largest magnitude of the (q-1) cross term, states skipped because pi_{k+1}
  // leaves the support of pi_k.
  double decomposition_defect = std::numeric_limits<double>::quiet_NaN();
  double omitted_term = std::numeric_limits<double>::quiet_NaN();
  int skipped_states = 0;
};

struct IterationTrace {
  std::vector<IterationRecord> records;

  std::size_t size() const noexcept { return records.size(); }
  // Residual non-increasing over the final fraction of iterations.
  bool residual_tail_monotone(double fraction = 0.1) const;
};

enum class RunStatus { Converged, MaxIterations, Diverged };
std::string to_string(RunStatus s);

struct SolverResult {
  QTable q;
  PolicyTable policy;
  IterationTrace trace;
  RunStatus status = RunStatus::MaxIterations;
  std::string message;

  bool converged() const noexcept { return status == RunStatus::Converged; }
  // Throws DivergenceError when the run left the magnitude bound.
  void throw_if_diverged() const;
};

// <softmax(Q / tau), Q>.
double boltzmann_value(std::span<const double> row, double tau);
// Expectation of Q under the policy induced by q: sparsemax (q = 2), softmax
// (q = 1), Taylor (other finite q), greedy (q = inf).
double mq_value(std::span<const double> row, double tau, EntropicIndex q, double p);
// The baseline subtracted in the Munchausen advantage term. Equals mq_value
// except at q = 1, where it is the log-partition tau * lse(Q / tau), which
// makes alpha (Q - baseline) = alpha tau ln softmax(Q / tau) exactly.
double munchausen_baseline(std::span<const double> row, double tau, EntropicIndex q, double p);

SolverResult run_mvi_q(const TabularMdp& mdp, const SolverConfig& config);
// Standard Munchausen VI (q = 1 regardless of config.q).
SolverResult run_mvi(const TabularMdp& mdp, const SolverConfig& config);
// MviQ with alpha = 0.
SolverResult run_tsallis_vi(const TabularMdp& mdp, const SolverConfig& config);

// Explicit regularizer Omega(pi) = kl_weight D_q(pi || pi_k) - entropy_weight S_q(pi).
struct RegularizerWeights {
  double kl_weight = 0.0;
  double entropy_weight = 0.0;
  EntropicIndex q{1.0};
};
RegularizerWeights regularizer_weights(Regularizer r, const SolverConfig& config);

SolverResult run_reg_vi(const TabularMdp& mdp, const SolverConfig& config, Regularizer regularizer);
SolverResult run_reg_vi(const TabularMdp& mdp, const SolverConfig& config, const RegularizerWeights& weights,
                        const std::optional<QTable>& initial_q = std::nullopt);

// Conservative VI on preferences Psi with config.tau as its temperature
// tau_cvi and config.alpha < 1:
//   Psi_{k+1} = r + alpha (Psi_k - m Psi_k) + gamma P m Psi_k,  m Psi = lse(zeta Psi) / zeta
// with zeta = (1 - alpha) / tau_cvi and pi_{k+1} = softmax(zeta Psi_k). It
// coincides with run_mvi at tau = tau_cvi / (1 - alpha).
SolverResult run_cvi(const TabularMdp& mdp, const SolverConfig& config);
double cvi_zeta(const SolverConfig& config);
double cvi_matched_mvi_tau(const SolverConfig& config);

// The MVI recursion with ln replaced by ln_q and the bonus alpha tau ln_q pi
// added directly. Always tracks the policy value; delegates to run_mvi_q at q = 1.
SolverResult run_naive_lnq(const TabularMdp& mdp, const SolverConfig& config);

// Dispatch on config.algorithm.
SolverResult solve(const TabularMdp& mdp, const SolverConfig& config);

// Shortest round-trip text for a double ("inf", "-inf", "nan" for non-finite).
std::string format_double(double v);

// Header iter,residual,q_change,policy_tv,entropy,tkl,wall_ms.
std::string trace_csv(const IterationTrace& trace);

}  // namespace tsallis
