#pragma once

// Built-in invariant checks run by `skf validate`: Minkowski containment by
// sampling, the two-term closed form, the eta = 0 reduction to the EKF and
// stationarity of the closed-form gain. Each check reports its worst
// observed figure against a fixed threshold.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "skf/ellipsoid.hpp"
#include "skf/experiments.hpp"
#include "skf/filter.hpp"
#include "skf/linalg.hpp"

namespace skf {

// --- random inputs --------------------------------------------------------

/// A A^T + floor I with standard normal A, scaled by `scale`.
template <class Rng>
Matrix random_spd(Eigen::Index n, Rng& rng, double scale = 1.0, double floor = 0.1) {
  std::normal_distribution<double> normal;
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = normal(rng);
  return symmetrized(scale * (a * a.transpose() + floor * Matrix::Identity(n, n)));
}

template <class Rng>
Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal;
  Matrix a(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) a(i, j) = normal(rng);
  return a;
}

template <class Rng>
Vector random_vector(Eigen::Index n, Rng& rng, double scale = 1.0) {
  return scale * random_matrix(n, 1, rng);
}

/// A prior belief and a measurement linearization with random SPD blocks,
/// i.e. one filtering step without a model behind it.
struct GainCase {
  StateBelief prior;
  MeasurementLinearization lin;
  double eta = 0.5;
};

template <class Rng>
GainCase random_gain_case(Eigen::Index n, Eigen::Index m, double eta, Rng& rng) {
  GainCase c;
  c.eta = eta;
  c.prior.kind = BeliefKind::prior;
  c.prior.center = random_vector(n, rng);
  c.prior.cov = random_spd(n, rng);
  c.prior.shape = random_spd(n, rng);
  c.lin.hx = random_matrix(m, n, rng);
  c.lin.hv = Matrix::Identity(m, m);
  c.lin.hb = Matrix::Identity(m, m);
  c.lin.meas_noise_cov = random_spd(m, rng);
  c.lin.ubb_meas_shape = random_spd(m, rng);
  c.lin.predicted = Vector::Zero(m);
  c.lin.z_tilde = Vector::Zero(m);
  return c;
}

// --- checks ---------------------------------------------------------------

struct CheckResult {
  std::string name;
  bool passed = false;
  double worst = 0.0;      // observed figure of merit
  double threshold = 0.0;  // pass iff worst <= threshold (or the stated direction)
  std::string detail;
};

using BoundFn = std::function<Ellipsoid(const EllipsoidSum&)>;

inline Ellipsoid default_bound(const EllipsoidSum& s) { return trace_min_sum(s); }

struct ContainmentOptions {
  int families = 200;
  int draws = 10000;
  int max_terms = 4;
  int max_dim = 4;
  double slack = 1e-9;
  std::uint64_t seed = 20240901;
};

/// Samples member-sums of random ellipsoid families (half boundary points,
/// half interior) and checks each against the bound. `worst` is the largest
/// quadratic form seen, so the check passes iff worst <= 1 + slack.
inline CheckResult check_containment(const ContainmentOptions& o,
                                     const BoundFn& bound = default_bound) {
  std::mt19937_64 rng(o.seed);
  std::uniform_int_distribution<int> terms_dist(1, o.max_terms);
  std::uniform_int_distribution<int> dim_dist(1, o.max_dim);
  std::uniform_real_distribution<double> log_scale(-2.0, 2.0);
  CheckResult r{"minkowski containment", true, 0.0, 1.0 + o.slack, {}};
  int outside = 0;
  for (int f = 0; f < o.families; ++f) {
    const int k = terms_dist(rng);
    const Eigen::Index n = dim_dist(rng);
    std::vector<Ellipsoid> terms;
    for (int i = 0; i < k; ++i) {
      terms.emplace_back(random_vector(n, rng),
                         random_spd(n, rng, std::pow(10.0, log_scale(rng))));
    }
    const EllipsoidSum sum(terms);
    const Ellipsoid b = bound(sum);
    Eigen::LLT<Matrix> llt(b.shape());
    if (llt.info() != Eigen::Success) {
      r.passed = false;
      r.detail = "bound shape is not positive definite";
      return r;
    }
    std::vector<Eigen::LLT<Matrix>> factors;
    for (const auto& t : terms) factors.emplace_back(t.shape());
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> unit;
    for (int d = 0; d < o.draws; ++d) {
      const bool boundary = d % 2 == 0;
      Vector x = Vector::Zero(n);
      for (int i = 0; i < k; ++i) {
        Vector u(n);
        for (Eigen::Index j = 0; j < n; ++j) u(j) = normal(rng);
        u /= u.norm();
        if (!boundary) u *= std::pow(unit(rng), 1.0 / static_cast<double>(n));
        x += terms[static_cast<std::size_t>(i)].center() +
             Matrix(factors[static_cast<std::size_t>(i)].matrixL()) * u;
      }
      const double q = llt.matrixL().solve(x - b.center()).squaredNorm();
      r.worst = std::max(r.worst, q);
      if (q > 1.0 + o.slack) ++outside;
    }
  }
  r.passed = outside == 0;
  r.detail = std::to_string(outside) + " of " +
             std::to_string(static_cast<long long>(o.families) * o.draws) + " points outside";
  return r;
}

/// For K = 2 the trace-minimal bound equals the pair bound at
/// beta = sqrt(tr S1 / tr S2); worst is the largest element-wise difference.
inline CheckResult check_pair_closed_form(int cases, std::uint64_t seed, double tol = 1e-10) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim_dist(1, 4);
  CheckResult r{"two-term closed form", true, 0.0, tol, {}};
  for (int c = 0; c < cases; ++c) {
    const Eigen::Index n = dim_dist(rng);
    const Matrix s1 = random_spd(n, rng);
    const Matrix s2 = random_spd(n, rng);
    const Matrix bound =
        trace_min_sum({Ellipsoid(Vector::Zero(n), s1), Ellipsoid(Vector::Zero(n), s2)}).shape();
    const Matrix pair = pair_sum_shape(s1, s2, std::sqrt(s1.trace() / s2.trace()));
    r.worst = std::max(r.worst, (bound - pair).cwiseAbs().maxCoeff());
  }
  r.passed = r.worst <= tol;
  r.detail = std::to_string(cases) + " random pairs";
  return r;
}

/// Example 1 with eta = 0: largest per-step gap between SKF center/cov and
/// the EKF over several trials.
inline CheckResult check_eta_zero_reduction(int trials, std::uint64_t seed, double tol = 1e-9) {
  ExperimentConfig cfg = default_config(ExampleId::example1);
  cfg.eta = 0.0;
  cfg.filter.eta = 0.0;
  cfg.seed = seed;
  CheckResult r{"eta = 0 reduces to the EKF", true, 0.0, tol, {}};
  for (int t = 0; t < trials; ++t) {
    for (const auto& rec : run_trial(cfg, t)) {
      r.worst = std::max({r.worst, (rec.skf_center - rec.ekf_state).cwiseAbs().maxCoeff(),
                          (rec.skf_cov - rec.ekf_cov).cwiseAbs().maxCoeff()});
    }
  }
  r.passed = r.worst <= tol;
  r.detail = std::to_string(trials) + " trials of " + std::to_string(cfg.steps) + " steps";
  return r;
}

/// Central-difference gradient of J with respect to the entries of K, at
/// fixed pair weights, divided by the gradient norm at K = 0.
inline double gain_stationarity(const GainProblem& problem, const PairWeights& w) {
  const Matrix k = problem.gain(w);
  Matrix grad(k.rows(), k.cols());
  Matrix zero_grad(k.rows(), k.cols());
  const Matrix zero = Matrix::Zero(k.rows(), k.cols());
  for (Eigen::Index i = 0; i < k.rows(); ++i) {
    for (Eigen::Index j = 0; j < k.cols(); ++j) {
      const double h = 1e-5 * std::max(1.0, std::abs(k(i, j)));
      Matrix kp = k, km = k;
      kp(i, j) += h;
      km(i, j) -= h;
      grad(i, j) = (problem.cost(kp, w) - problem.cost(km, w)) / (2.0 * h);
      Matrix zp = zero, zm = zero;
      zp(i, j) = h;
      zm(i, j) = -h;
      zero_grad(i, j) = (problem.cost(zp, w) - problem.cost(zm, w)) / (2.0 * h);
    }
  }
  const double scale = zero_grad.norm();
  return scale > 0.0 ? grad.norm() / scale : grad.norm();
}

inline CheckResult check_gain_stationarity(int cases, std::uint64_t seed, double tol = 1e-6) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> dim_dist(1, 4);
  std::uniform_real_distribution<double> log_beta(-3.0, 3.0);
  const double etas[] = {0.25, 0.5, 0.75};
  CheckResult r{"gain stationarity", true, 0.0, tol, {}};
  for (int c = 0; c < cases; ++c) {
    const Eigen::Index n = dim_dist(rng);
    const Eigen::Index m = dim_dist(rng);
    const GainCase g = random_gain_case(n, m, etas[c % 3], rng);
    const GainProblem problem(g.prior, g.lin, g.eta);
    r.worst = std::max(r.worst,
                       gain_stationarity(problem, PairWeights::from_beta(std::exp(log_beta(rng)))));
  }
  r.passed = r.worst <= tol;
  r.detail = std::to_string(cases) + " random configurations";
  return r;
}

struct ValidationOptions {
  bool quick = false;
  std::uint64_t seed = 1;
};

inline std::vector<CheckResult> run_validation(const ValidationOptions& o,
                                               const BoundFn& bound = default_bound) {
  ContainmentOptions co;
  co.seed = o.seed;
  if (o.quick) {
    co.families = 40;
    co.draws = 2000;
  }
  const int cases = o.quick ? 30 : 100;
  return {check_containment(co, bound), check_pair_closed_form(cases, o.seed + 1),
          check_eta_zero_reduction(o.quick ? 3 : 10, o.seed + 2),
          check_gain_stationarity(cases, o.seed + 3)};
}

}  // namespace skf
