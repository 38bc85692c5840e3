#pragma once

// Finite MDPs with rewards r(s, a), dense storage, and the Bellman backups.

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tsallis/qmath.hpp"

namespace tsallis {

class QTable {
 public:
  QTable() = default;
  QTable(std::size_t n_states, std::size_t n_actions, double fill = 0.0)
      : n_states_(n_states), n_actions_(n_actions), v_(n_states * n_actions, fill) {}

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }

  double& operator()(std::size_t s, std::size_t a) { return v_[s * n_actions_ + a]; }
  double operator()(std::size_t s, std::size_t a) const { return v_[s * n_actions_ + a]; }

  std::span<const double> row(std::size_t s) const { return {v_.data() + s * n_actions_, n_actions_}; }
  std::span<double> row(std::size_t s) { return {v_.data() + s * n_actions_, n_actions_}; }

  const std::vector<double>& data() const noexcept { return v_; }
  std::vector<double>& data() noexcept { return v_; }

  double max_abs() const;
  bool same_shape(const QTable& o) const noexcept {
    return n_states_ == o.n_states_ && n_actions_ == o.n_actions_;
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t n_states_ = 0;
  std::size_t n_actions_ = 0;
  std::vector<double> v_;
};

// Sup-norm distance; throws ShapeError on mismatch.
double sup_distance(const QTable& a, const QTable& b);

class PolicyTable {
 public:
  PolicyTable() = default;
  explicit PolicyTable(std::vector<ProbVector> rows);
  static PolicyTable uniform(std::size_t n_states, std::size_t n_actions);

  std::size_t n_states() const noexcept { return rows_.size(); }
  std::size_t n_actions() const noexcept { return rows_.empty() ? 0 : rows_.front().size(); }

  const ProbVector& operator[](std::size_t s) const { return rows_[s]; }
  void set(std::size_t s, ProbVector row);
  const std::vector<ProbVector>& rows() const noexcept { return rows_; }

 private:
  std::vector<ProbVector> rows_;
};

// Mean over states of the per-state total-variation distance.
double mean_total_variation(const PolicyTable& a, const PolicyTable& b);

class TabularMdp {
 public:
  // transition is row-major [s][a][s'], reward row-major [s][a]. Rows whose
  // mass is off by more than 1e-9 are rejected; smaller drift is renormalized.
  // meta_json is a serialized JSON object carried through file round trips.
  TabularMdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
             std::vector<double> reward, double gamma, std::vector<double> initial_dist,
             std::string meta_json = "{}");

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  double gamma() const noexcept { return gamma_; }

  std::span<const double> transition(std::size_t s, std::size_t a) const {
    return {p_.data() + (s * n_actions_ + a) * n_states_, n_states_};
  }
  double reward(std::size_t s, std::size_t a) const { return r_[s * n_actions_ + a]; }
  double max_abs_reward() const;

  const std::vector<double>& transition_data() const noexcept { return p_; }
  const std::vector<double>& reward_data() const noexcept { return r_; }
  const ProbVector& initial_dist() const noexcept { return d_; }
  const std::string& meta_json() const noexcept { return meta_; }

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> p_;
  std::vector<double> r_;
  double gamma_;
  ProbVector d_;
  std::string meta_;
};

// out(s, a) = r(s, a) + gamma sum_s' P(s'|s, a) v(s').
QTable backup_state_values(const TabularMdp& mdp, std::span<const double> v);

QTable bellman_expectation(const TabularMdp& mdp, const QTable& q, const PolicyTable& pi);
QTable bellman_optimality(const TabularMdp& mdp, const QTable& q);
// Evaluation term <pi(s'), Q(s')> - omega(s').
QTable regularized_backup(const TabularMdp& mdp, const QTable& q, const PolicyTable& pi,
                          std::span<const double> omega_per_state);

// V(s) solving (I - gamma P_pi) V = r_pi - omega. Dense LU for up to 2000
// states, fixed-point iteration to 1e-12 beyond that.
std::vector<double> exact_state_value(const TabularMdp& mdp, const PolicyTable& pi,
                                      std::span<const double> omega_per_state);
QTable exact_policy_value(const TabularMdp& mdp, const PolicyTable& pi,
                          std::span<const double> omega_per_state);
// <d, V> for the unregularized value of pi.
double initial_state_value(const TabularMdp& mdp, const PolicyTable& pi);

std::string mdp_to_json(const TabularMdp& mdp);
TabularMdp mdp_from_json(const std::string& text);
void mdp_to_file(const TabularMdp& mdp, const std::filesystem::path& path);
TabularMdp mdp_from_file(const std::filesystem::path& path);

}  // namespace tsallis
