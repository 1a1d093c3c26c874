#pragma once

// Set-membership Kalman filter: a Gaussian part (covariance C) and an
// unknown-but-bounded part (the set E(center, S) of candidate means) are
// carried side by side. Prediction bounds the Minkowski sum of the mapped
// posterior set and the process perturbation sets; the update picks the
// gain K(beta) and the pairing parameter beta that minimize
//   J(beta) = (1 - eta) tr C+(beta) + eta tr S+(beta).
// The first-order EKF baseline lives here too.

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "skf/ellipsoid.hpp"
#include "skf/errors.hpp"
#include "skf/linalg.hpp"
#include "skf/model.hpp"
#include "skf/optimizer.hpp"

namespace skf {

struct FilterConfig {
  double eta = 0.5;
  double t_lo = -20.0;  // beta = exp(t)
  double t_hi = 20.0;
  double beta_tol = 1e-8;
  int max_iters = 200;
  double cov_floor = 1e-14;

  void validate() const {
    if (!(eta >= 0.0 && eta <= 1.0)) throw std::invalid_argument("eta must lie in [0, 1]");
    if (!(t_lo < t_hi)) throw std::invalid_argument("beta bracket must satisfy t_lo < t_hi");
    if (!(beta_tol > 0.0)) throw std::invalid_argument("beta_tol must be positive");
    if (max_iters < 1) throw std::invalid_argument("max_iters must be >= 1");
    if (!(cov_floor >= 0.0)) throw std::invalid_argument("cov_floor must be non-negative");
  }
};

enum class BeliefKind { prior, posterior };

struct StateBelief {
  Vector center;
  Matrix cov;    // random part
  Matrix shape;  // candidate means lie in E(center, shape)
  BeliefKind kind = BeliefKind::posterior;
  int step = 0;

  Eigen::Index dim() const { return center.size(); }
  Ellipsoid mean_set() const { return {center, shape}; }

  static StateBelief initial(Vector x0, Matrix c0, Matrix s0, int step = 0) {
    require_square(c0, x0.size(), "initial covariance");
    require_square(s0, x0.size(), "initial shape");
    return {std::move(x0), std::move(c0), std::move(s0), BeliefKind::posterior, step};
  }
};

/// How beta was chosen in an update.
enum class BetaMode {
  optimized,             // interior minimizer of J
  limit,                 // J keeps decreasing towards beta -> 0 or infinity; beta at the saturated end
  unused,                // eta = 0 or no bounded uncertainty at all; beta reported as 1
  prior_is_point,        // tr S- = 0: the measurement set alone bounds the posterior
  no_measurement_bound,  // tr(H_b S^z H_b^T) = 0: the mapped prior set alone
};

inline const char* to_string(BetaMode m) {
  switch (m) {
    case BetaMode::optimized: return "optimized";
    case BetaMode::limit: return "limit";
    case BetaMode::unused: return "unused";
    case BetaMode::prior_is_point: return "prior_is_point";
    case BetaMode::no_measurement_bound: return "no_measurement_bound";
  }
  return "?";
}

struct GainReport {
  Matrix gain;
  double beta_star = 1.0;
  double cost_at_star = 0.0;
  double trace_cov = 0.0;
  double trace_shape = 0.0;
  BetaMode mode = BetaMode::optimized;
  int optimizer_iters = 0;
  double condition = 1.0;          // of the innovation bracket at beta*
  bool cov_floored = false;
  double raw_cov_min_eig = 0.0;    // before flooring
  double raw_shape_min_eig = 0.0;
  double raw_cov_asymmetry = 0.0;  // before symmetrization
  double raw_shape_asymmetry = 0.0;
};

/// Coefficients multiplying the prior-set and measurement-set terms:
/// (1 + 1/beta, 1 + beta) for an interior beta.
struct PairWeights {
  double prior = 2.0;
  double meas = 2.0;

  static PairWeights from_beta(double beta) { return {1.0 + 1.0 / beta, 1.0 + beta}; }
};

namespace detail {

struct GainSolve {
  Matrix gain;
  double condition = 1.0;
};

/// K = numerator * bracket^{-1} for a symmetric bracket, by solving
/// bracket * K^T = numerator^T.
inline GainSolve solve_gain(const Matrix& numerator, const Matrix& bracket, int step) {
  const Matrix b = symmetrized(bracket);
  Eigen::SelfAdjointEigenSolver<Matrix> es(b, Eigen::EigenvaluesOnly);
  const double lo = es.eigenvalues().minCoeff();
  const double hi = es.eigenvalues().maxCoeff();
  if (!std::isfinite(lo) || !std::isfinite(hi) || hi <= 0.0 ||
      lo <= hi * std::numeric_limits<double>::epsilon() * 16.0) {
    throw SingularInnovationError(
        "innovation covariance is singular or indefinite (eigenvalues in [" +
            std::to_string(lo) + ", " + std::to_string(hi) + "])",
        step);
  }
  const Matrix kt = b.ldlt().solve(numerator.transpose());
  return {kt.transpose(), hi / lo};
}

/// (I - K H) P (I - K H)^T + K R K^T, before symmetrization.
inline Matrix joseph(const Matrix& gain, const Matrix& hx, const Matrix& p, const Matrix& r) {
  const auto n = p.rows();
  const Matrix a = Matrix::Identity(n, n) - gain * hx;
  return a * p * a.transpose() + gain * r * gain.transpose();
}

/// Adds floor * I when the smallest eigenvalue is below floor.
inline bool apply_floor(Matrix& cov, double floor) {
  if (min_eigenvalue(cov) < floor) {
    cov += floor * Matrix::Identity(cov.rows(), cov.cols());
    return true;
  }
  return false;
}

}  // namespace detail

/// The filtering-step cost and its ingredients for a fixed prior and
/// linearization. All quantities are functions of the pair weights.
class GainProblem {
 public:
  GainProblem(const StateBelief& prior, const MeasurementLinearization& lin, double eta,
              int step = -1)
      : eta_(eta), step_(step), hx_(lin.hx), c_(prior.cov), s_(prior.shape) {
    require_square(c_, hx_.cols(), "prior covariance");
    require_square(s_, hx_.cols(), "prior shape");
    rv_ = lin.hv * lin.meas_noise_cov * lin.hv.transpose();
    rb_ = lin.hb * lin.ubb_meas_shape * lin.hb.transpose();
    c_ht_ = c_ * hx_.transpose();
    s_ht_ = s_ * hx_.transpose();
    hcht_ = hx_ * c_ht_;
    hsht_ = hx_ * s_ht_;
  }

  double eta() const { return eta_; }

  BetaMode mode() const {
    const bool prior_set = s_.trace() > kZeroTrace;
    const bool meas_set = rb_.trace() > kZeroTrace;
    if (eta_ == 0.0 || (!prior_set && !meas_set)) return BetaMode::unused;
    if (!prior_set) return BetaMode::prior_is_point;
    if (!meas_set) return BetaMode::no_measurement_bound;
    return BetaMode::optimized;
  }

  /// Weights used for the given beta under the current mode; the degenerate
  /// modes take the limit in which the empty term drops out.
  PairWeights weights(double beta) const {
    return mode() == BetaMode::optimized ? PairWeights::from_beta(beta) : PairWeights{1.0, 1.0};
  }

  detail::GainSolve solve(const PairWeights& w) const {
    const Matrix numerator = (1.0 - eta_) * c_ht_ + eta_ * w.prior * s_ht_;
    const Matrix bracket =
        (1.0 - eta_) * (hcht_ + rv_) + eta_ * w.prior * hsht_ + eta_ * w.meas * rb_;
    return detail::solve_gain(numerator, bracket, step_);
  }

  Matrix gain(const PairWeights& w) const { return solve(w).gain; }

  Matrix raw_posterior_cov(const Matrix& k) const { return detail::joseph(k, hx_, c_, rv_); }

  Matrix raw_posterior_shape(const Matrix& k, const PairWeights& w) const {
    const auto n = c_.rows();
    const Matrix a = Matrix::Identity(n, n) - k * hx_;
    return w.prior * (a * s_ * a.transpose()) + w.meas * (k * rb_ * k.transpose());
  }

  Matrix posterior_cov(const Matrix& k) const { return symmetrized(raw_posterior_cov(k)); }

  Matrix posterior_shape(const Matrix& k, const PairWeights& w) const {
    return symmetrized(raw_posterior_shape(k, w));
  }

  /// tr((I - K H) S- (I - K H)^T)
  double prior_set_trace(const Matrix& k) const {
    const auto n = c_.rows();
    const Matrix a = Matrix::Identity(n, n) - k * hx_;
    return (a * s_ * a.transpose()).trace();
  }

  /// tr(K H_b S^z H_b^T K^T)
  double meas_set_trace(const Matrix& k) const { return (k * rb_ * k.transpose()).trace(); }

  double cost(const Matrix& k, const PairWeights& w) const {
    return (1.0 - eta_) * raw_posterior_cov(k).trace() +
           eta_ * (w.prior * prior_set_trace(k) + w.meas * meas_set_trace(k));
  }

  /// J(beta) with the gain chosen as K(beta).
  double cost(double beta) const {
    const PairWeights w = weights(beta);
    return cost(gain(w), w);
  }

 private:
  double eta_;
  int step_;
  Matrix hx_, c_, s_, rv_, rb_;
  Matrix c_ht_, s_ht_, hcht_, hsht_;
};

/// K(beta) for a prior belief and a measurement linearization.
inline Matrix skf_gain(const StateBelief& prior, const MeasurementLinearization& lin,
                       const FilterConfig& cfg, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("skf_gain: beta must be positive");
  cfg.validate();
  const GainProblem problem(prior, lin, cfg.eta);
  return problem.gain(PairWeights::from_beta(beta));
}

/// Prediction: posterior at step k-1 to prior at step k, using input u_k.
inline StateBelief skf_predict(const StateBelief& belief, const NonlinearModel& m,
                               const Vector& u, int k, double cov_floor = 1e-14) {
  if (belief.kind != BeliefKind::posterior) {
    throw std::invalid_argument("skf_predict expects a posterior belief");
  }
  require_square(belief.cov, m.state_dim, "posterior covariance");
  require_square(belief.shape, m.state_dim, "posterior shape");
  const ProcessLinearization lin = linearize_process(m, belief.center, u, k);

  StateBelief prior;
  prior.kind = BeliefKind::prior;
  prior.step = k;
  prior.center = lin.predicted;
  prior.cov = symmetrized(lin.fx * belief.cov * lin.fx.transpose() +
                          lin.fw * lin.process_noise_cov * lin.fw.transpose());
  detail::apply_floor(prior.cov, cov_floor);

  const auto n = m.state_dim;
  const Vector origin = Vector::Zero(n);
  std::vector<Ellipsoid> terms;
  terms.emplace_back(origin, symmetrized(lin.fx * belief.shape * lin.fx.transpose()));
  for (std::size_t i = 0; i < lin.fa.size(); ++i) {
    terms.emplace_back(origin,
                       symmetrized(lin.fa[i] * lin.ubb_process_shapes[i] * lin.fa[i].transpose()));
  }
  prior.shape = trace_min_sum(EllipsoidSum(std::move(terms))).shape();

  if (!prior.center.allFinite() || !prior.cov.allFinite() || !prior.shape.allFinite()) {
    throw NumericalError("skf_predict: non-finite prior", k);
  }
  return prior;
}

/// Filtering step: prior at step k and measurement y_k to posterior.
inline std::pair<StateBelief, GainReport> skf_update(const StateBelief& prior, const Vector& y,
                                                     const NonlinearModel& m,
                                                     const FilterConfig& cfg, int k) {
  if (prior.kind != BeliefKind::prior) {
    throw std::invalid_argument("skf_update expects a prior belief");
  }
  cfg.validate();
  require_size(y, m.meas_dim, "measurement");
  const MeasurementLinearization lin = linearize_measurement(m, prior.center, k);
  const GainProblem problem(prior, lin, cfg.eta, k);

  GainReport report;
  report.mode = problem.mode();
  if (report.mode == BetaMode::optimized) {
    ScalarProblem sp;
    sp.objective = [&problem](double beta) { return problem.cost(beta); };
    sp.t_lo = cfg.t_lo;
    sp.t_hi = cfg.t_hi;
    sp.tol = cfg.beta_tol;
    sp.max_iters = cfg.max_iters;
    try {
      const ScalarMinimum best = minimize_scalar(sp);
      report.beta_star = best.beta;
      report.optimizer_iters = best.iters;
      if (best.at_limit) report.mode = BetaMode::limit;
    } catch (const OptimizerError& e) {
      throw OptimizerError(std::string(e.what()) + "; bracket log(beta) in [" +
                               std::to_string(cfg.t_lo) + ", " + std::to_string(cfg.t_hi) + "]",
                           k);
    } catch (const NumericalError& e) {
      throw NumericalError(e.what(), k);
    }
  }

  const PairWeights w = problem.weights(report.beta_star);
  const detail::GainSolve solved = problem.solve(w);
  report.gain = solved.gain;
  report.condition = solved.condition;

  StateBelief post;
  post.kind = BeliefKind::posterior;
  post.step = k;
  post.center = prior.center + report.gain * innovation(m, y, lin.predicted);

  const Matrix raw_cov = problem.raw_posterior_cov(report.gain);
  const Matrix raw_shape = problem.raw_posterior_shape(report.gain, w);
  report.raw_cov_asymmetry = asymmetry(raw_cov);
  report.raw_shape_asymmetry = asymmetry(raw_shape);
  post.cov = symmetrized(raw_cov);
  post.shape = symmetrized(raw_shape);
  report.raw_cov_min_eig = min_eigenvalue(post.cov);
  report.raw_shape_min_eig = min_eigenvalue(post.shape);
  report.cov_floored = detail::apply_floor(post.cov, cfg.cov_floor);

  report.trace_cov = raw_cov.trace();
  report.trace_shape = raw_shape.trace();
  report.cost_at_star =
      (1.0 - cfg.eta) * report.trace_cov + cfg.eta * report.trace_shape;

  if (!post.center.allFinite() || !post.cov.allFinite() || !post.shape.allFinite()) {
    throw NumericalError("skf_update: non-finite posterior", k);
  }
  return {std::move(post), std::move(report)};
}

/// One predict + update cycle of the first-order EKF. Bounded perturbations
/// of the model are ignored.
inline std::pair<Vector, Matrix> ekf_step(const Vector& state, const Matrix& cov,
                                          const Vector& u, const Vector& y,
                                          const NonlinearModel& m, int k,
                                          double cov_floor = 1e-14) {
  require_square(cov, m.state_dim, "EKF covariance");
  require_size(y, m.meas_dim, "measurement");

  const ProcessLinearization pl = linearize_process(m, state, u, k);
  const Vector x_prior = pl.predicted;
  Matrix p_prior =
      symmetrized(pl.fx * cov * pl.fx.transpose() + pl.fw * pl.process_noise_cov * pl.fw.transpose());
  detail::apply_floor(p_prior, cov_floor);

  const MeasurementLinearization ml = linearize_measurement(m, x_prior, k);
  const Matrix r = ml.hv * ml.meas_noise_cov * ml.hv.transpose();
  const Matrix pht = p_prior * ml.hx.transpose();
  const Matrix hpht = ml.hx * pht;
  const Matrix gain = detail::solve_gain(pht, hpht + r, k).gain;

  Vector x_post = x_prior + gain * innovation(m, y, ml.predicted);
  Matrix p_post = symmetrized(detail::joseph(gain, ml.hx, p_prior, r));
  detail::apply_floor(p_post, cov_floor);
  if (!x_post.allFinite() || !p_post.allFinite()) {
    throw NumericalError("ekf_step: non-finite estimate", k);
  }
  return {std::move(x_post), std::move(p_post)};
}

}  // namespace skf
