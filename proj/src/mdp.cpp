#include "tsallis/mdp.hpp"

#include <Eigen/Dense>
#include <json.hpp>

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <fstream>
#include <sstream>

#include "tsallis/errors.hpp"

namespace tsallis {

namespace {

using ojson = nlohmann::ordered_json;

constexpr double kRowTolerance = 1e-9;
constexpr std::size_t kDenseLimit = 2000;

// Checks a probability row in place. Drift beyond a few ulps per entry is
// divided out so the stored row is stochastic to rounding; a row that already
// sums to 1 that closely is left untouched, keeping file round trips bitwise.
void check_row(std::span<double> row, const std::string& what) {
  double total = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (!std::isfinite(row[i]) || row[i] < 0.0) {
      throw InvariantError(what + ": entry " + std::to_string(i) + " is negative or not finite");
    }
    total += row[i];
  }
  if (std::abs(total - 1.0) > kRowTolerance) {
    std::ostringstream msg;
    msg.precision(17);
    msg << what << ": probabilities sum to " << total << ", expected 1";
    throw InvariantError(msg.str());
  }
  if (std::abs(total - 1.0) > 8.0 * static_cast<double>(row.size()) * DBL_EPSILON) {
    for (double& v : row) v /= total;
  }
}

std::vector<double> checked_initial(std::vector<double> d, std::size_t n) {
  if (d.size() != n) throw ShapeError("initial_dist has length " + std::to_string(d.size()) +
                                      ", expected " + std::to_string(n));
  check_row(d, "initial_dist");
  return d;
}

void require_shapes(const TabularMdp& mdp, const QTable& q) {
  if (q.n_states() != mdp.n_states() || q.n_actions() != mdp.n_actions()) {
    throw ShapeError("Q table is " + std::to_string(q.n_states()) + "x" + std::to_string(q.n_actions()) +
                     ", MDP is " + std::to_string(mdp.n_states()) + "x" + std::to_string(mdp.n_actions()));
  }
}

void require_shapes(const TabularMdp& mdp, const PolicyTable& pi) {
  if (pi.n_states() != mdp.n_states() || pi.n_actions() != mdp.n_actions()) {
    throw ShapeError("policy table shape does not match the MDP");
  }
}

void require_omega(const TabularMdp& mdp, std::span<const double> omega) {
  if (omega.size() != mdp.n_states()) {
    throw ShapeError("regularizer array has length " + std::to_string(omega.size()) +
                     ", expected " + std::to_string(mdp.n_states()));
  }
}

std::vector<double> policy_reward(const TabularMdp& mdp, const PolicyTable& pi,
                                  std::span<const double> omega) {
  std::vector<double> b(mdp.n_states());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    double v = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) v += pi[s][a] * mdp.reward(s, a);
    b[s] = v - omega[s];
  }
  return b;
}

}  // namespace

double QTable::max_abs() const {
  double m = 0.0;
  for (double v : v_) m = std::max(m, std::abs(v));
  return m;
}

double sup_distance(const QTable& a, const QTable& b) {
  if (!a.same_shape(b)) throw ShapeError("sup_distance: Q tables differ in shape");
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

PolicyTable::PolicyTable(std::vector<ProbVector> rows) : rows_(std::move(rows)) {
  for (const ProbVector& r : rows_) {
    if (r.size() != rows_.front().size()) throw ShapeError("policy rows differ in length");
  }
}

PolicyTable PolicyTable::uniform(std::size_t n_states, std::size_t n_actions) {
  return PolicyTable(std::vector<ProbVector>(n_states, ProbVector::uniform(n_actions)));
}

void PolicyTable::set(std::size_t s, ProbVector row) {
  if (row.size() != n_actions()) throw ShapeError("policy row has the wrong length");
  rows_.at(s) = std::move(row);
}

double mean_total_variation(const PolicyTable& a, const PolicyTable& b) {
  if (a.n_states() != b.n_states()) throw ShapeError("policy tables differ in shape");
  double total = 0.0;
  for (std::size_t s = 0; s < a.n_states(); ++s) total += total_variation(a[s].weights(), b[s].weights());
  return total / static_cast<double>(a.n_states());
}

TabularMdp::TabularMdp(std::size_t n_states, std::size_t n_actions, std::vector<double> transition,
                       std::vector<double> reward, double gamma, std::vector<double> initial_dist,
                       std::string meta_json)
    : n_states_(n_states),
      n_actions_(n_actions),
      p_(std::move(transition)),
      r_(std::move(reward)),
      gamma_(gamma),
      d_(checked_initial(std::move(initial_dist), n_states)),
      meta_(std::move(meta_json)) {
  if (n_states_ == 0 || n_actions_ == 0) throw InvariantError("MDP needs at least one state and one action");
  if (!(gamma_ > 0.0 && gamma_ < 1.0)) {
    throw InvariantError("gamma must lie strictly between 0 and 1, got " + std::to_string(gamma_));
  }
  if (p_.size() != n_states_ * n_actions_ * n_states_) throw ShapeError("transition tensor has the wrong size");
  if (r_.size() != n_states_ * n_actions_) throw ShapeError("reward table has the wrong size");
  for (std::size_t i = 0; i < r_.size(); ++i) {
    if (!std::isfinite(r_[i])) {
      throw InvariantError("reward for state " + std::to_string(i / n_actions_) + ", action " +
                           std::to_string(i % n_actions_) + " is not finite");
    }
  }
  for (std::size_t s = 0; s < n_states_; ++s) {
    for (std::size_t a = 0; a < n_actions_; ++a) {
      check_row(std::span<double>(p_.data() + (s * n_actions_ + a) * n_states_, n_states_),
                "transition row for state " + std::to_string(s) + ", action " + std::to_string(a));
    }
  }
}

double TabularMdp::max_abs_reward() const {
  double m = 0.0;
  for (double v : r_) m = std::max(m, std::abs(v));
  return m;
}

QTable backup_state_values(const TabularMdp& mdp, std::span<const double> v) {
  if (v.size() != mdp.n_states()) throw ShapeError("state-value array has the wrong length");
  QTable out(mdp.n_states(), mdp.n_actions());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const auto p = mdp.transition(s, a);
      double ev = 0.0;
      for (std::size_t t = 0; t < p.size(); ++t) ev += p[t] * v[t];
      out(s, a) = mdp.reward(s, a) + mdp.gamma() * ev;
    }
  }
  return out;
}

QTable bellman_expectation(const TabularMdp& mdp, const QTable& q, const PolicyTable& pi) {
  const std::vector<double> zero(mdp.n_states(), 0.0);
  return regularized_backup(mdp, q, pi, zero);
}

QTable bellman_optimality(const TabularMdp& mdp, const QTable& q) {
  require_shapes(mdp, q);
  std::vector<double> v(mdp.n_states());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    const auto row = q.row(s);
    v[s] = *std::max_element(row.begin(), row.end());
  }
  return backup_state_values(mdp, v);
}

QTable regularized_backup(const TabularMdp& mdp, const QTable& q, const PolicyTable& pi,
                          std::span<const double> omega_per_state) {
  require_shapes(mdp, q);
  require_shapes(mdp, pi);
  require_omega(mdp, omega_per_state);
  std::vector<double> v(mdp.n_states());
  for (std::size_t s = 0; s < mdp.n_states(); ++s) {
    double e = 0.0;
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) e += pi[s][a] * q(s, a);
    v[s] = e - omega_per_state[s];
  }
  return backup_state_values(mdp, v);
}

std::vector<double> exact_state_value(const TabularMdp& mdp, const PolicyTable& pi,
                                      std::span<const double> omega_per_state) {
  require_shapes(mdp, pi);
  require_omega(mdp, omega_per_state);
  const std::size_t n = mdp.n_states();
  const std::vector<double> b = policy_reward(mdp, pi, omega_per_state);

  if (n > kDenseLimit) {
    std::vector<double> v(n, 0.0), next(n);
    for (int it = 0; it < 1000000; ++it) {
      double change = 0.0;
      double scale = 1.0;
      for (std::size_t s = 0; s < n; ++s) {
        double e = 0.0;
        for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
          const auto p = mdp.transition(s, a);
          double ev = 0.0;
          for (std::size_t t = 0; t < n; ++t) ev += p[t] * v[t];
          e += pi[s][a] * ev;
        }
        next[s] = b[s] + mdp.gamma() * e;
        change = std::max(change, std::abs(next[s] - v[s]));
        scale = std::max(scale, std::abs(next[s]));
      }
      v.swap(next);
      if (change <= 1e-12 * scale) return v;
    }
    throw ConvergenceError("exact_state_value: fixed-point iteration did not converge");
  }

  Eigen::MatrixXd m = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  Eigen::VectorXd rhs(static_cast<Eigen::Index>(n));
  for (std::size_t s = 0; s < n; ++s) {
    rhs(static_cast<Eigen::Index>(s)) = b[s];
    for (std::size_t a = 0; a < mdp.n_actions(); ++a) {
      const double w = pi[s][a];
      if (w == 0.0) continue;
      const auto p = mdp.transition(s, a);
      for (std::size_t t = 0; t < n; ++t) {
        m(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) -= mdp.gamma() * w * p[t];
      }
    }
  }
  const Eigen::VectorXd sol = m.partialPivLu().solve(rhs);
  std::vector<double> v(n);
  for (std::size_t s = 0; s < n; ++s) {
    v[s] = sol(static_cast<Eigen::Index>(s));
    if (!std::isfinite(v[s])) throw InvariantError("exact_state_value: singular policy system");
  }
  return v;
}

QTable exact_policy_value(const TabularMdp& mdp, const PolicyTable& pi,
                          std::span<const double> omega_per_state) {
  return backup_state_values(mdp, exact_state_value(mdp, pi, omega_per_state));
}

double initial_state_value(const TabularMdp& mdp, const PolicyTable& pi) {
  const std::vector<double> zero(mdp.n_states(), 0.0);
  const std::vector<double> v = exact_state_value(mdp, pi, zero);
  double total = 0.0;
  for (std::size_t s = 0; s < v.size(); ++s) total += mdp.initial_dist()[s] * v[s];
  return total;
}

std::string mdp_to_json(const TabularMdp& mdp) {
  const std::size_t ns = mdp.n_states();
  const std::size_t na = mdp.n_actions();
  ojson j;
  j["n_states"] = ns;
  j["n_actions"] = na;
  j["gamma"] = mdp.gamma();
  j["initial_dist"] = mdp.initial_dist().vector();
  ojson reward = ojson::array();
  ojson transition = ojson::array();
  for (std::size_t s = 0; s < ns; ++s) {
    ojson rrow = ojson::array();
    ojson trow = ojson::array();
    for (std::size_t a = 0; a < na; ++a) {
      rrow.push_back(mdp.reward(s, a));
      const auto p = mdp.transition(s, a);
      trow.push_back(std::vector<double>(p.begin(), p.end()));
    }
    reward.push_back(std::move(rrow));
    transition.push_back(std::move(trow));
  }
  j["reward"] = std::move(reward);
  j["transition"] = std::move(transition);
  j["meta"] = ojson::parse(mdp.meta_json());
  return j.dump() + "\n";
}

namespace {

const ojson& field(const ojson& j, const char* name) {
  auto it = j.find(name);
  if (it == j.end()) throw ParseError(std::string("missing field '") + name + "'");
  return *it;
}

std::size_t positive_count(const ojson& j, const char* name) {
  const ojson& v = field(j, name);
  if (!v.is_number_integer() || v.get<long long>() <= 0) {
    throw ParseError(std::string("field '") + name + "' must be a positive integer");
  }
  return v.get<std::size_t>();
}

double number_at(const ojson& v, const std::string& where) {
  if (!v.is_number()) throw ParseError("field '" + where + "' must be a number");
  return v.get<double>();
}

const ojson& array_of(const ojson& v, std::size_t n, const std::string& where) {
  if (!v.is_array()) throw ParseError("field '" + where + "' must be an array");
  if (v.size() != n) {
    throw ParseError("field '" + where + "' has " + std::to_string(v.size()) + " entries, expected " +
                     std::to_string(n));
  }
  return v;
}

}  // namespace

TabularMdp mdp_from_json(const std::string& text) {
  ojson j;
  try {
    j = ojson::parse(text);
  } catch (const ojson::parse_error& e) {
    throw ParseError(std::string("malformed MDP JSON: ") + e.what());
  }
  if (!j.is_object()) throw ParseError("MDP document must be a JSON object");
  const std::size_t ns = positive_count(j, "n_states");
  const std::size_t na = positive_count(j, "n_actions");
  const double gamma = number_at(field(j, "gamma"), "gamma");

  std::vector<double> d(ns);
  const ojson& dj = array_of(field(j, "initial_dist"), ns, "initial_dist");
  for (std::size_t s = 0; s < ns; ++s) d[s] = number_at(dj[s], "initial_dist[" + std::to_string(s) + "]");

  std::vector<double> r(ns * na);
  std::vector<double> p(ns * na * ns);
  const ojson& rj = array_of(field(j, "reward"), ns, "reward");
  const ojson& pj = array_of(field(j, "transition"), ns, "transition");
  for (std::size_t s = 0; s < ns; ++s) {
    const std::string rs = "reward[" + std::to_string(s) + "]";
    const std::string ps = "transition[" + std::to_string(s) + "]";
    const ojson& rrow = array_of(rj[s], na, rs);
    const ojson& prow = array_of(pj[s], na, ps);
    for (std::size_t a = 0; a < na; ++a) {
      r[s * na + a] = number_at(rrow[a], rs + "[" + std::to_string(a) + "]");
      const std::string pa = ps + "[" + std::to_string(a) + "]";
      const ojson& dist = array_of(prow[a], ns, pa);
      for (std::size_t t = 0; t < ns; ++t) {
        p[(s * na + a) * ns + t] = number_at(dist[t], pa + "[" + std::to_string(t) + "]");
      }
    }
  }
  std::string meta = "{}";
  if (auto it = j.find("meta"); it != j.end()) {
    if (!it->is_object()) throw ParseError("field 'meta' must be an object");
    meta = it->dump();
  }
  return TabularMdp(ns, na, std::move(p), std::move(r), gamma, std::move(d), std::move(meta));
}

void mdp_to_file(const TabularMdp& mdp, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << mdp_to_json(mdp);
  if (!out) throw Error("failed writing " + path.string());
}

TabularMdp mdp_from_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open MDP file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  try {
    return mdp_from_json(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

}  // namespace tsallis
