#include "tsallis/simplex_opt.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "tsallis/errors.hpp"

namespace tsallis::oracles {

namespace {

constexpr double kFloor = 1e-300;

void renormalize(std::vector<double>& x) {
  double total = 0.0;
  for (double v : x) total += v;
  for (double& v : x) v /= total;
}

class Solver {
 public:
  Solver(const SimplexObjective& f, std::size_t n, const SimplexOptOptions& opt)
      : f_(f), n_(n), opt_(opt), x_(n, 1.0 / static_cast<double>(n)), g_(n), active_(n, true) {}

  SimplexOptResult run() {
    exponentiated_gradient();
    newton_polish();
    return finish();
  }

 private:
  void gradient_at(std::span<const double> x, std::span<double> out) const {
    f_.gradient(x, out);
  }

  // Scale-aware Frank-Wolfe gap. Coordinates at zero whose derivative is not
  // finite count as infinitely attractive.
  double gap() {
    gradient_at(x_, g_);
    double gbar = 0.0;
    double gmax = -std::numeric_limits<double>::infinity();
    scale_ = 1.0;
    for (std::size_t a = 0; a < n_; ++a) {
      if (std::isnan(g_[a])) g_[a] = std::numeric_limits<double>::infinity();
      if (x_[a] > 0.0) gbar += x_[a] * g_[a];
      gmax = std::max(gmax, g_[a]);
      if (std::isfinite(g_[a])) scale_ = std::max(scale_, std::abs(g_[a]));
    }
    return gmax - gbar;
  }

  bool small_enough(double gap_value, double tol) const { return gap_value <= tol * scale_; }

  void exponentiated_gradient() {
    double eta = -1.0;
    std::vector<double> y(n_);
    for (; iterations_ < opt_.eg_iters; ++iterations_) {
      const double gp = gap();
      if (small_enough(gp, 1e-7)) break;
      double gmax = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < n_; ++a) gmax = std::max(gmax, g_[a]);
      if (!std::isfinite(gmax)) break;  // boundary singularity; handled by the polish
      if (eta < 0.0) eta = 1.0 / std::max(gp, 1e-12);
      const double fx = f_.value(x_);
      bool accepted = false;
      for (int bt = 0; bt < 80; ++bt) {
        for (std::size_t a = 0; a < n_; ++a) {
          y[a] = x_[a] > 0.0 ? std::max(x_[a] * std::exp(eta * (g_[a] - gmax)), kFloor) : 0.0;
        }
        renormalize(y);
        double kl = 0.0;
        double lin = 0.0;
        for (std::size_t a = 0; a < n_; ++a) {
          if (y[a] > 0.0) kl += y[a] * std::log(y[a] / x_[a]);
          lin += g_[a] * (y[a] - x_[a]);
        }
        const double fy = f_.value(y);
        if (std::isfinite(fy) && fy >= fx + lin - kl / eta) {
          accepted = true;
          break;
        }
        eta *= 0.5;
      }
      if (!accepted) break;
      x_.swap(y);
      eta *= 1.5;
    }
  }

  // Newton steps on the face spanned by the active coordinates, with the
  // Hessian from central differences of the gradient.
  void newton_polish() {
    for (std::size_t a = 0; a < n_; ++a) active_[a] = x_[a] > 0.0;
    drop_negligible();

    std::vector<double> gp(n_), gm(n_), probe(n_), trial(n_);
    int stalled = 0;
    for (; iterations_ < opt_.max_iters; ++iterations_) {
      const double gp_value = gap();
      if (small_enough(gp_value, opt_.tol)) {
        converged_ = true;
        return;
      }
      if (reactivate_violator()) continue;

      std::vector<std::size_t> face;
      for (std::size_t a = 0; a < n_; ++a) {
        if (active_[a]) face.push_back(a);
      }
      const std::size_t k = face.size();
      if (k == 1) {
        // A vertex with a positive gap means a violator exists but was
        // already re-added and dropped again; give up rather than cycle.
        if (++stalled > 3) return;
        continue;
      }

      Eigen::MatrixXd kkt = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k + 1),
                                                  static_cast<Eigen::Index>(k + 1));
      Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(k + 1));
      for (std::size_t j = 0; j < k; ++j) {
        const std::size_t b = face[j];
        const double h = std::min(1e-7, 0.25 * x_[b]);
        probe = x_;
        probe[b] = x_[b] + h;
        gradient_at(probe, gp);
        probe[b] = x_[b] - h;
        gradient_at(probe, gm);
        for (std::size_t i = 0; i < k; ++i) {
          kkt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
              (gp[face[i]] - gm[face[i]]) / (2.0 * h);
        }
      }
      // Symmetrize and push toward negative definiteness if differencing noise
      // (or a flat direction) breaks concavity of the model.
      Eigen::MatrixXd hess = kkt.topLeftCorner(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k));
      hess = 0.5 * (hess + hess.transpose()).eval();
      const double diag_scale = std::max(1e-12, hess.diagonal().cwiseAbs().maxCoeff());
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hess, Eigen::EigenvaluesOnly);
      const double top = eig.eigenvalues().maxCoeff();
      if (top > -1e-10 * diag_scale) {
        hess -= (top + 1e-8 * diag_scale) * Eigen::MatrixXd::Identity(hess.rows(), hess.cols());
      }
      kkt.topLeftCorner(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = hess;
      for (std::size_t i = 0; i < k; ++i) {
        kkt(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = 1.0;
        kkt(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(i)) = 1.0;
        rhs(static_cast<Eigen::Index>(i)) = -g_[face[i]];
      }
      const Eigen::VectorXd sol = kkt.fullPivLu().solve(rhs);

      std::vector<double> d(n_, 0.0);
      double slope = 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        d[face[i]] = sol(static_cast<Eigen::Index>(i));
        slope += g_[face[i]] * d[face[i]];
      }
      if (!(slope > 0.0) || !std::isfinite(slope)) {
        // Fall back to the projected gradient on the face.
        double mean = 0.0;
        for (std::size_t b : face) mean += g_[b];
        mean /= static_cast<double>(k);
        for (std::size_t b : face) d[b] = (g_[b] - mean) / scale_ * 1e-3;
      }

      double t_max = 1.0;
      std::size_t blocking = n_;
      for (std::size_t b : face) {
        if (d[b] < 0.0 && x_[b] / -d[b] < t_max) {
          t_max = x_[b] / -d[b];
          blocking = b;
        }
      }
      const double fx = f_.value(x_);
      double t = t_max;
      bool moved = false;
      for (int bt = 0; bt < 60; ++bt, t *= 0.5) {
        for (std::size_t a = 0; a < n_; ++a) trial[a] = std::max(x_[a] + t * d[a], 0.0);
        if (t == t_max && blocking < n_) trial[blocking] = 0.0;
        const double ft = f_.value(trial);
        if (std::isfinite(ft) && ft >= fx - 1e-15 * std::max(1.0, std::abs(fx))) {
          moved = trial != x_;
          if (t == t_max && blocking < n_) active_[blocking] = false;
          x_ = trial;
          renormalize(x_);
          break;
        }
      }
      stalled = moved ? 0 : stalled + 1;
      if (stalled > 3) return;
    }
  }

  // Coordinates the ascent has all but removed are fixed at zero so the
  // polish runs on the face they leave behind.
  void drop_negligible() {
    gap();
    double gbar = 0.0;
    for (std::size_t a = 0; a < n_; ++a) {
      if (x_[a] > 0.0) gbar += x_[a] * g_[a];
    }
    for (std::size_t a = 0; a < n_; ++a) {
      if (active_[a] && x_[a] < 1e-10 && g_[a] < gbar - 1e-9 * scale_) {
        x_[a] = 0.0;
        active_[a] = false;
      }
    }
    renormalize(x_);
  }

  // If an inactive coordinate is the Frank-Wolfe vertex, give it mass again.
  bool reactivate_violator() {
    double gmax_active = -std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < n_; ++a) {
      if (active_[a]) gmax_active = std::max(gmax_active, g_[a]);
    }
    bool any = false;
    for (std::size_t a = 0; a < n_; ++a) {
      if (!active_[a] && g_[a] > gmax_active + opt_.tol * scale_) {
        active_[a] = true;
        x_[a] = 1e-8;
        any = true;
      }
    }
    if (any) renormalize(x_);
    return any;
  }

  SimplexOptResult finish() {
    const double final_gap = gap();
    const double fx = f_.value(x_);
    bool certified = converged_ && small_enough(final_gap, opt_.tol);
    if (certified) {
      std::mt19937_64 rng(0x5eedULL);
      std::exponential_distribution<double> expo(1.0);
      std::vector<double> v(n_), probe(n_);
      for (int i = 0; i < opt_.certify_perturbations && certified; ++i) {
        for (double& w : v) w = expo(rng);
        renormalize(v);
        const double eps = (i % 2 == 0) ? 1e-3 : 1e-6;
        for (std::size_t a = 0; a < n_; ++a) probe[a] = (1.0 - eps) * x_[a] + eps * v[a];
        const double fp = f_.value(probe);
        if (fp > fx + opt_.tol * scale_ + 1e-14 * std::max(1.0, std::abs(fx))) certified = false;
      }
    }
    return SimplexOptResult{ProbVector::normalized(x_), fx, iterations_, certified, final_gap};
  }

  const SimplexObjective& f_;
  std::size_t n_;
  SimplexOptOptions opt_;
  std::vector<double> x_;
  std::vector<double> g_;
  std::vector<bool> active_;
  double scale_ = 1.0;
  int iterations_ = 0;
  bool converged_ = false;
};

}  // namespace

SimplexOptResult simplex_maximize(const SimplexObjective& objective, std::size_t dim,
                                  const SimplexOptOptions& options) {
  if (dim == 0) throw PreconditionError("simplex_maximize: dimension must be positive");
  if (!objective.value || !objective.gradient) {
    throw PreconditionError("simplex_maximize: objective needs value and gradient");
  }
  if (dim == 1) {
    std::vector<double> x{1.0};
    return SimplexOptResult{ProbVector({1.0}), objective.value(x), 0, true, 0.0};
  }
  return Solver(objective, dim, options).run();
}

}  // namespace tsallis::oracles
