#pragma once

// Benchmark experiments: the scalar growth model (example 1) and planar
// range/bearing tracking from two stations (example 2), Monte Carlo trials
// comparing the set-membership filter with the EKF, aggregation, and the
// sensitivity of the bounds to the size of the bounded perturbations.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "skf/ellipsoid.hpp"
#include "skf/filter.hpp"
#include "skf/linalg.hpp"
#include "skf/model.hpp"

namespace skf {

enum class ExampleId { example1, example2 };

inline const char* to_string(ExampleId id) {
  return id == ExampleId::example1 ? "example1" : "example2";
}

/// Piece of the example-2 reference path: constant tangential acceleration
/// and turn rate for a number of steps.
struct TrajectorySegment {
  int steps = 0;
  double accel = 0.0;      // m/s^2
  double turn_rate = 0.0;  // rad/s
};

struct ExperimentConfig {
  ExampleId which = ExampleId::example1;
  int steps = 50;
  int trials = 100;
  std::uint64_t seed = 1;
  double eta = 0.5;

  Vector x0;  // initial truth and initial estimate
  Matrix c0;  // initial posterior covariance
  Matrix s0;  // initial posterior shape

  Matrix process_noise_cov;
  Matrix ubb_process_shape;
  Matrix meas_noise_cov;
  Matrix ubb_meas_shape;

  // example 2 only
  Vector station1;
  Vector station2;
  double dt = 0.1;
  double initial_heading = 0.0;  // rad
  std::vector<TrajectorySegment> trajectory;
  double crossing_halfwidth = 3.0;  // m, distance to the station line counted as crossing

  FilterConfig filter;

  void validate() const {
    if (steps < 1) throw std::invalid_argument("steps must be >= 1");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    filter.validate();
    const auto n = x0.size();
    const Eigen::Index expected = which == ExampleId::example1 ? 1 : 4;
    if (n != expected) throw DimensionError("x0 has the wrong dimension");
    require_square(c0, n, "C0");
    require_square(s0, n, "S0");
    require_square(process_noise_cov, n, "process noise covariance");
    require_square(ubb_process_shape, n, "UBB process shape");
    require_square(meas_noise_cov, expected, "measurement noise covariance");
    require_square(ubb_meas_shape, expected, "UBB measurement shape");
    if (which == ExampleId::example2) {
      require_size(station1, 2, "station1");
      require_size(station2, 2, "station2");
      if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
      if ((station1 - station2).norm() == 0.0) {
        throw std::invalid_argument("stations must be distinct");
      }
    }
  }
};

inline Matrix diag(std::initializer_list<double> values) {
  Vector d(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double v : values) d(i++) = v;
  return d.asDiagonal();
}

inline ExperimentConfig default_config(ExampleId which) {
  ExperimentConfig cfg;
  cfg.which = which;
  if (which == ExampleId::example1) {
    cfg.steps = 50;
    cfg.x0 = Vector::Constant(1, 0.1);
    cfg.c0 = Matrix::Constant(1, 1, 2.0);
    cfg.s0 = Matrix::Constant(1, 1, 1e-3);
    cfg.process_noise_cov = Matrix::Constant(1, 1, 1.0);
    cfg.ubb_process_shape = Matrix::Constant(1, 1, 9.0);
    cfg.meas_noise_cov = Matrix::Constant(1, 1, 1.0);
    cfg.ubb_meas_shape = Matrix::Constant(1, 1, 4.0);
  } else {
    const double deg = std::numbers::pi / 180.0;
    cfg.steps = 300;
    cfg.dt = 0.1;
    cfg.x0 = Vector::Zero(4);
    cfg.c0 = 0.01 * Matrix::Identity(4, 4);
    cfg.s0 = 1e-6 * Matrix::Identity(4, 4);
    cfg.process_noise_cov.resize(4, 4);
    cfg.process_noise_cov << 0.0033, 0, 0.005, 0,
                             0, 0.0033, 0, 0.005,
                             0.005, 0, 0.01, 0,
                             0, 0.005, 0, 0.01;
    cfg.meas_noise_cov = 0.005 * 0.005 * Matrix::Identity(4, 4);
    cfg.ubb_process_shape = diag({1.0, 1.0, 0.25, 0.25});
    cfg.ubb_meas_shape = diag({0.01 * 0.01, 0.01 * 0.01, deg * deg, deg * deg});
    cfg.station1 = Vector{{-50.0, 100.0}};
    cfg.station2 = Vector{{150.0, 100.0}};
    cfg.initial_heading = 103.0 * deg;
    cfg.trajectory = {{20, 4.0, 0.0}, {100, 0.0, -0.12}, {180, 0.0, 0.10}};
  }
  cfg.eta = 0.5;
  cfg.filter.eta = cfg.eta;
  return cfg;
}

// --- models ---------------------------------------------------------------

/// Known input of example 1 at step k (k >= 1).
inline double example1_input(int k) { return 8.0 * std::cos(1.2 * (k - 1)); }

inline NonlinearModel example1_model(const ExperimentConfig& cfg) {
  NonlinearModel m;
  m.state_dim = 1;
  m.input_dim = 1;
  m.meas_dim = 1;
  m.f = [](const Vector& x, const Vector& u, const Vector& w, const std::vector<Vector>& a, int) {
    const double s = x(0);
    return Vector::Constant(1, 0.5 * s + 25.0 * s / (1.0 + s * s) + u(0) + w(0) + a[0](0));
  };
  m.h = [](const Vector& x, const Vector& v, const Vector& b, int) {
    return Vector::Constant(1, x(0) * x(0) / 20.0 + v(0) + b(0));
  };
  m.process_noise_cov = constant_matrix(cfg.process_noise_cov);
  m.ubb_process_shapes = {constant_matrix(cfg.ubb_process_shape)};
  m.meas_noise_cov = constant_matrix(cfg.meas_noise_cov);
  m.ubb_meas_shape = constant_matrix(cfg.ubb_meas_shape);

  const auto one = [](const Vector&, const Vector&, int) { return Matrix::Identity(1, 1); };
  m.jacobians.fx = [](const Vector& x, const Vector&, int) {
    const double s = x(0);
    const double q = 1.0 + s * s;
    return Matrix::Constant(1, 1, 0.5 + 25.0 * (1.0 - s * s) / (q * q));
  };
  m.jacobians.fw = one;
  m.jacobians.fa = {one};
  m.jacobians.hx = [](const Vector& x, int) { return Matrix::Constant(1, 1, x(0) / 10.0); };
  m.jacobians.hv = [](const Vector&, int) { return Matrix::Identity(1, 1); };
  m.jacobians.hb = [](const Vector&, int) { return Matrix::Identity(1, 1); };
  return m;
}

inline Matrix constant_velocity_transition(double dt) {
  Matrix f = Matrix::Identity(4, 4);
  f(0, 2) = dt;
  f(1, 3) = dt;
  return f;
}

/// Ranges and bearings of the planar position from the two stations.
inline Vector range_bearing(const Vector& x, const Vector& s1, const Vector& s2) {
  const double dx1 = x(0) - s1(0), dy1 = x(1) - s1(1);
  const double dx2 = x(0) - s2(0), dy2 = x(1) - s2(1);
  return Vector{{std::hypot(dx1, dy1), std::hypot(dx2, dy2), std::atan2(dy1, dx1),
                 std::atan2(dy2, dx2)}};
}

inline Matrix range_bearing_jacobian(const Vector& x, const Vector& s1, const Vector& s2) {
  Matrix j = Matrix::Zero(4, 4);
  const Vector* st[2] = {&s1, &s2};
  for (int i = 0; i < 2; ++i) {
    const double dx = x(0) - (*st[i])(0);
    const double dy = x(1) - (*st[i])(1);
    const double r2 = dx * dx + dy * dy;
    const double r = std::sqrt(r2);
    j(i, 0) = dx / r;
    j(i, 1) = dy / r;
    j(2 + i, 0) = -dy / r2;
    j(2 + i, 1) = dx / r2;
  }
  return j;
}

inline NonlinearModel example2_model(const ExperimentConfig& cfg) {
  NonlinearModel m;
  m.state_dim = 4;
  m.input_dim = 0;
  m.meas_dim = 4;
  const Matrix f = constant_velocity_transition(cfg.dt);
  const Vector s1 = cfg.station1;
  const Vector s2 = cfg.station2;
  m.f = [f](const Vector& x, const Vector&, const Vector& w, const std::vector<Vector>& a, int) {
    return Vector(f * x + w + a[0]);
  };
  m.h = [s1, s2](const Vector& x, const Vector& v, const Vector& b, int) {
    return Vector(range_bearing(x, s1, s2) + v + b);
  };
  m.process_noise_cov = constant_matrix(cfg.process_noise_cov);
  m.ubb_process_shapes = {constant_matrix(cfg.ubb_process_shape)};
  m.meas_noise_cov = constant_matrix(cfg.meas_noise_cov);
  m.ubb_meas_shape = constant_matrix(cfg.ubb_meas_shape);
  m.angular = {false, false, true, true};

  const auto identity = [](const Vector&, const Vector&, int) { return Matrix::Identity(4, 4); };
  m.jacobians.fx = [f](const Vector&, const Vector&, int) { return f; };
  m.jacobians.fw = identity;
  m.jacobians.fa = {identity};
  m.jacobians.hx = [s1, s2](const Vector& x, int) { return range_bearing_jacobian(x, s1, s2); };
  m.jacobians.hv = [](const Vector&, int) { return Matrix::Identity(4, 4); };
  m.jacobians.hb = [](const Vector&, int) { return Matrix::Identity(4, 4); };
  return m;
}

inline NonlinearModel make_model(const ExperimentConfig& cfg) {
  return cfg.which == ExampleId::example1 ? example1_model(cfg) : example2_model(cfg);
}

inline Vector input_at(const ExperimentConfig& cfg, int k) {
  return cfg.which == ExampleId::example1 ? Vector::Constant(1, example1_input(k)) : Vector{};
}

// --- randomness -----------------------------------------------------------

enum class Stream : std::uint32_t { truth = 1, measurement = 2 };

/// Independent generator for (seed, trial, stream).
inline std::mt19937_64 substream(std::uint64_t seed, int trial, Stream stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(stream)};
  return std::mt19937_64(seq);
}

template <class Rng>
Vector sample_gaussian(const Matrix& cov, Rng& rng) {
  std::normal_distribution<double> normal;
  Vector z(cov.rows());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = normal(rng);
  return psd_sqrt(cov) * z;
}

// --- truth ----------------------------------------------------------------

struct TruthSeries {
  std::vector<Vector> states;        // states[k], k = 0..steps
  std::vector<Vector> measurements;  // measurements[k], k = 1..steps; [0] unused
};

/// Noise-free reference path of example 2.
inline std::vector<Vector> example2_reference_path(const ExperimentConfig& cfg) {
  std::vector<Vector> states;
  states.reserve(static_cast<std::size_t>(cfg.steps) + 1);
  Vector x = cfg.x0;
  states.push_back(x);
  double speed = std::hypot(x(2), x(3));
  double heading = speed > 0.0 ? std::atan2(x(3), x(2)) : cfg.initial_heading;
  std::size_t seg = 0;
  int used = 0;
  for (int k = 1; k <= cfg.steps; ++k) {
    while (seg < cfg.trajectory.size() && used >= cfg.trajectory[seg].steps) {
      ++seg;
      used = 0;
    }
    // the last segment is held when the path is shorter than the run
    const TrajectorySegment cur = cfg.trajectory.empty()
                                      ? TrajectorySegment{}
                                      : cfg.trajectory[std::min(seg, cfg.trajectory.size() - 1)];
    ++used;
    speed += cur.accel * cfg.dt;
    heading += cur.turn_rate * cfg.dt;
    x(2) = speed * std::cos(heading);
    x(3) = speed * std::sin(heading);
    x(0) += x(2) * cfg.dt;
    x(1) += x(3) * cfg.dt;
    states.push_back(x);
  }
  return states;
}

/// Truth states and measurements of one trial. Gaussian terms are normal,
/// bounded terms are uniform over their ellipsoids.
inline TruthSeries simulate_truth(const ExperimentConfig& cfg, int trial) {
  const NonlinearModel m = make_model(cfg);
  auto truth_rng = substream(cfg.seed, trial, Stream::truth);
  auto meas_rng = substream(cfg.seed, trial, Stream::measurement);
  const Ellipsoid process_set(Vector::Zero(cfg.ubb_process_shape.rows()), cfg.ubb_process_shape);
  const Ellipsoid meas_set(Vector::Zero(cfg.ubb_meas_shape.rows()), cfg.ubb_meas_shape);

  TruthSeries out;
  if (cfg.which == ExampleId::example1) {
    out.states.push_back(cfg.x0);
    for (int k = 1; k <= cfg.steps; ++k) {
      const Vector w = sample_gaussian(cfg.process_noise_cov, truth_rng);
      const std::vector<Vector> a{sample_uniform(process_set, truth_rng)};
      out.states.push_back(m.f(out.states.back(), input_at(cfg, k), w, a, k));
      if (!out.states.back().allFinite()) throw NumericalError("truth overflow", k);
    }
  } else {
    out.states = example2_reference_path(cfg);
  }

  out.measurements.assign(1, Vector{});
  for (int k = 1; k <= cfg.steps; ++k) {
    const Vector v = sample_gaussian(cfg.meas_noise_cov, meas_rng);
    const Vector b = sample_uniform(meas_set, meas_rng);
    Vector y = m.h(out.states[static_cast<std::size_t>(k)], v, b, k);
    for (Eigen::Index i = 0; i < y.size(); ++i) {
      if (m.is_angular(i)) y(i) = wrap_angle(y(i));
    }
    out.measurements.push_back(std::move(y));
  }
  return out;
}

// --- trials ---------------------------------------------------------------

struct TrialRecord {
  int k = 0;
  Vector true_state;
  Vector measurement;
  Vector skf_center;
  Matrix skf_cov;
  Matrix skf_shape;
  Vector ekf_state;
  Matrix ekf_cov;
  double beta_star = 1.0;
  BetaMode beta_mode = BetaMode::optimized;
  double skf_dist = 0.0;
  double ekf_dist = 0.0;
  double raw_cov_min_eig = 0.0;
  double raw_shape_min_eig = 0.0;
  double raw_cov_asymmetry = 0.0;
  double raw_shape_asymmetry = 0.0;
  bool cov_floored = false;
};

using Trial = std::vector<TrialRecord>;

/// Number of leading state components that are compared with the truth.
inline Eigen::Index position_dim(const ExperimentConfig& cfg) {
  return cfg.which == ExampleId::example1 ? 1 : 2;
}

inline Matrix position_block(const ExperimentConfig& cfg, const Matrix& m) {
  const auto p = position_dim(cfg);
  return m.topLeftCorner(p, p);
}

/// Largest semi-axis of the position part of a shape.
inline double position_semi_axis(const ExperimentConfig& cfg, const Matrix& shape) {
  return std::sqrt(std::max(0.0, max_eigenvalue(position_block(cfg, shape))));
}

class TrialError : public NumericalError {
 public:
  TrialError(int trial, const NumericalError& e)
      : NumericalError("trial " + std::to_string(trial) + ": " + e.what(), e.step()),
        trial_(trial) {}
  int trial() const noexcept { return trial_; }

 private:
  int trial_;
};

inline Trial run_trial(const ExperimentConfig& cfg, int trial) {
  cfg.validate();
  const NonlinearModel m = make_model(cfg);
  FilterConfig fcfg = cfg.filter;
  fcfg.eta = cfg.eta;
  const auto p = position_dim(cfg);

  Trial records;
  records.reserve(static_cast<std::size_t>(cfg.steps));
  try {
    const TruthSeries truth = simulate_truth(cfg, trial);
    StateBelief post = StateBelief::initial(cfg.x0, cfg.c0, cfg.s0);
    Vector ekf_x = cfg.x0;
    Matrix ekf_p = cfg.c0;
    for (int k = 1; k <= cfg.steps; ++k) {
      const auto idx = static_cast<std::size_t>(k);
      const Vector u = input_at(cfg, k);
      const Vector& y = truth.measurements[idx];

      const StateBelief prior = skf_predict(post, m, u, k, fcfg.cov_floor);
      auto [next, report] = skf_update(prior, y, m, fcfg, k);
      post = std::move(next);
      std::tie(ekf_x, ekf_p) = ekf_step(ekf_x, ekf_p, u, y, m, k, fcfg.cov_floor);

      TrialRecord r;
      r.k = k;
      r.true_state = truth.states[idx];
      r.measurement = y;
      r.skf_center = post.center;
      r.skf_cov = post.cov;
      r.skf_shape = post.shape;
      r.ekf_state = ekf_x;
      r.ekf_cov = ekf_p;
      r.beta_star = report.beta_star;
      r.beta_mode = report.mode;
      r.skf_dist = (post.center.head(p) - r.true_state.head(p)).norm();
      r.ekf_dist = (ekf_x.head(p) - r.true_state.head(p)).norm();
      r.raw_cov_min_eig = report.raw_cov_min_eig;
      r.raw_shape_min_eig = report.raw_shape_min_eig;
      r.raw_cov_asymmetry = report.raw_cov_asymmetry;
      r.raw_shape_asymmetry = report.raw_shape_asymmetry;
      r.cov_floored = report.cov_floored;
      records.push_back(std::move(r));
    }
  } catch (const NumericalError& e) {
    throw TrialError(trial, e);
  }
  return records;
}

/// Runs cfg.trials independent trials on up to `threads` workers. The
/// result order is the trial index, independent of scheduling.
inline std::vector<Trial> run_trials(const ExperimentConfig& cfg, unsigned threads = 1) {
  cfg.validate();
  const auto count = static_cast<std::size_t>(cfg.trials);
  std::vector<Trial> results(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = run_trial(cfg, static_cast<int>(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return results;
}

// --- aggregation ----------------------------------------------------------

inline double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

inline double mean(const std::vector<double>& v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

/// Linear-interpolated quantile, q in [0, 1].
inline double quantile(std::vector<double> v, double q) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(pos));
  const auto j = std::min(i + 1, v.size() - 1);
  return v[i] + (pos - static_cast<double>(i)) * (v[j] - v[i]);
}

inline double l2_norm(const std::vector<double>& d) {
  double s = 0.0;
  for (double x : d) s += x * x;
  return std::sqrt(s);
}

/// Behaviour of the posterior bound where the path crosses the line joining
/// the two stations.
struct CrossingStats {
  int window_begin = -1;  // first and last step inside the window
  int window_end = -1;
  int peak_step = -1;
  double peak_semi_axis = 0.0;
  double median_semi_axis = 0.0;
  double ratio = std::numeric_limits<double>::quiet_NaN();
  double angle_to_normal_deg = std::numeric_limits<double>::quiet_NaN();
};

/// Steps whose true position lies within halfwidth of the segment between
/// the stations.
inline std::vector<int> crossing_window(const ExperimentConfig& cfg, const Trial& trial) {
  const Vector dir = (cfg.station2 - cfg.station1).normalized();
  const double len = (cfg.station2 - cfg.station1).norm();
  const Vector normal{{-dir(1), dir(0)}};
  std::vector<int> steps;
  for (const auto& r : trial) {
    const Vector rel = r.true_state.head(2) - cfg.station1;
    const double along = rel.dot(dir);
    if (along >= 0.0 && along <= len && std::abs(rel.dot(normal)) <= cfg.crossing_halfwidth) {
      steps.push_back(r.k);
    }
  }
  return steps;
}

inline CrossingStats crossing_stats(const ExperimentConfig& cfg, const Trial& trial) {
  CrossingStats cs;
  std::vector<double> axes;
  axes.reserve(trial.size());
  for (const auto& r : trial) axes.push_back(position_semi_axis(cfg, r.skf_shape));
  cs.median_semi_axis = median(axes);
  const auto window = crossing_window(cfg, trial);
  if (window.empty()) return cs;
  cs.window_begin = window.front();
  cs.window_end = window.back();
  for (int k : window) {
    const double a = axes[static_cast<std::size_t>(k - 1)];
    if (a > cs.peak_semi_axis || cs.peak_step < 0) {
      cs.peak_semi_axis = a;
      cs.peak_step = k;
    }
  }
  cs.ratio = cs.peak_semi_axis / cs.median_semi_axis;

  const Matrix block = position_block(cfg, trial[static_cast<std::size_t>(cs.peak_step - 1)].skf_shape);
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(block));
  const Vector principal = es.eigenvectors().col(1);
  const Vector dir = (cfg.station2 - cfg.station1).normalized();
  const Vector normal{{-dir(1), dir(0)}};
  const double c = std::min(1.0, std::abs(principal.dot(normal)));
  cs.angle_to_normal_deg = std::acos(c) * 180.0 / std::numbers::pi;
  return cs;
}

struct StepDistribution {
  std::vector<double> mean, p50, p95;
};

struct Summary {
  ExampleId which = ExampleId::example1;
  int trials = 0;
  int steps = 0;
  std::vector<double> skf_l2, ekf_l2;
  double skf_l2_mean = 0, ekf_l2_mean = 0, skf_l2_median = 0, ekf_l2_median = 0;
  double win_rate = 0;

  // beta over optimized updates
  int beta_count = 0;
  double beta_mean = 0, beta_median = 0, beta_min = 0, beta_max = 0;

  // SKF vs EKF, largest per-step gap over all trials
  double max_center_gap = 0;
  double max_cov_gap = 0;

  // largest position semi-axis per step, median and max over trials
  std::vector<double> semi_axis_median, semi_axis_max;
  double semi_axis_overall_max = 0;
  double semi_axis_overall_median = 0;

  StepDistribution skf_step_dist, ekf_step_dist;

  // numerical hygiene, worst case over all updates
  double worst_cov_min_eig_rel = std::numeric_limits<double>::infinity();  // min eig / max(1, max eig), before flooring
  double worst_shape_min_eig_rel = std::numeric_limits<double>::infinity();
  double worst_asymmetry_rel = 0;
  int floor_count = 0;

  std::vector<CrossingStats> crossings;  // example 2 only
  double bearing_bound_at_85m = 0;       // example 2 only
  double range_bound = 0;
};

inline Summary aggregate(const ExperimentConfig& cfg, const std::vector<Trial>& trials) {
  if (trials.empty()) throw std::invalid_argument("aggregate: no trials");
  Summary s;
  s.which = cfg.which;
  s.trials = static_cast<int>(trials.size());
  s.steps = static_cast<int>(trials.front().size());

  std::vector<double> betas, all_axes;
  const auto steps = static_cast<std::size_t>(s.steps);
  std::vector<std::vector<double>> axes_by_step(steps), skf_by_step(steps), ekf_by_step(steps);
  int wins = 0;
  for (const auto& trial : trials) {
    std::vector<double> ds, de;
    for (const auto& r : trial) {
      ds.push_back(r.skf_dist);
      de.push_back(r.ekf_dist);
      if (r.beta_mode == BetaMode::optimized) betas.push_back(r.beta_star);
      s.max_center_gap = std::max(s.max_center_gap, (r.skf_center - r.ekf_state).cwiseAbs().maxCoeff());
      s.max_cov_gap = std::max(s.max_cov_gap, (r.skf_cov - r.ekf_cov).cwiseAbs().maxCoeff());

      const double axis = position_semi_axis(cfg, r.skf_shape);
      all_axes.push_back(axis);
      const auto i = static_cast<std::size_t>(r.k - 1);
      if (i < steps) {
        axes_by_step[i].push_back(axis);
        skf_by_step[i].push_back(r.skf_dist);
        ekf_by_step[i].push_back(r.ekf_dist);
      }

      const double cov_scale = std::max(1.0, max_eigenvalue(r.skf_cov));
      const double shape_scale = std::max(1.0, max_eigenvalue(r.skf_shape));
      s.worst_cov_min_eig_rel = std::min(s.worst_cov_min_eig_rel, r.raw_cov_min_eig / cov_scale);
      s.worst_shape_min_eig_rel =
          std::min(s.worst_shape_min_eig_rel, r.raw_shape_min_eig / shape_scale);
      s.worst_asymmetry_rel =
          std::max({s.worst_asymmetry_rel, r.raw_cov_asymmetry / cov_scale,
                    r.raw_shape_asymmetry / shape_scale});
      if (r.cov_floored) ++s.floor_count;
    }
    s.skf_l2.push_back(l2_norm(ds));
    s.ekf_l2.push_back(l2_norm(de));
    if (s.skf_l2.back() < s.ekf_l2.back()) ++wins;
  }
  s.skf_l2_mean = mean(s.skf_l2);
  s.ekf_l2_mean = mean(s.ekf_l2);
  s.skf_l2_median = median(s.skf_l2);
  s.ekf_l2_median = median(s.ekf_l2);
  s.win_rate = static_cast<double>(wins) / static_cast<double>(trials.size());

  s.beta_count = static_cast<int>(betas.size());
  if (!betas.empty()) {
    s.beta_mean = mean(betas);
    s.beta_median = median(betas);
    s.beta_min = *std::min_element(betas.begin(), betas.end());
    s.beta_max = *std::max_element(betas.begin(), betas.end());
  }

  for (std::size_t i = 0; i < steps; ++i) {
    s.semi_axis_median.push_back(median(axes_by_step[i]));
    s.semi_axis_max.push_back(axes_by_step[i].empty()
                                  ? 0.0
                                  : *std::max_element(axes_by_step[i].begin(), axes_by_step[i].end()));
    s.skf_step_dist.mean.push_back(mean(skf_by_step[i]));
    s.skf_step_dist.p50.push_back(quantile(skf_by_step[i], 0.5));
    s.skf_step_dist.p95.push_back(quantile(skf_by_step[i], 0.95));
    s.ekf_step_dist.mean.push_back(mean(ekf_by_step[i]));
    s.ekf_step_dist.p50.push_back(quantile(ekf_by_step[i], 0.5));
    s.ekf_step_dist.p95.push_back(quantile(ekf_by_step[i], 0.95));
  }
  s.semi_axis_overall_max = all_axes.empty() ? 0.0 : *std::max_element(all_axes.begin(), all_axes.end());
  s.semi_axis_overall_median = median(all_axes);

  if (cfg.which == ExampleId::example2) {
    for (const auto& trial : trials) s.crossings.push_back(crossing_stats(cfg, trial));
    // half-width of the bearing bound, seen at 85 m, against the range bound
    s.bearing_bound_at_85m = 85.0 * std::sqrt(cfg.ubb_meas_shape(2, 2));
    s.range_bound = std::sqrt(cfg.ubb_meas_shape(0, 0));
  }
  return s;
}

// --- sensitivity ----------------------------------------------------------

struct SweepRow {
  std::string label;
  double scale = 1.0;
  double max_semi_axis = 0.0;     // over all trials and steps
  double median_semi_axis = 0.0;  // over all trials and steps
};

/// Copy of cfg with both bounded-perturbation shapes scaled so that their
/// semi-axes grow by `scale`.
inline ExperimentConfig scaled_bounds(const ExperimentConfig& cfg, double scale) {
  if (!(scale >= 0.0)) throw std::invalid_argument("scale must be non-negative");
  ExperimentConfig out = cfg;
  out.ubb_process_shape *= scale * scale;
  out.ubb_meas_shape *= scale * scale;
  return out;
}

/// The "realistic" variant of the example-2 bounds: a 0.5 m / 0.5 m/s process
/// bound and the unscaled measurement bound.
inline ExperimentConfig realistic_bounds(const ExperimentConfig& cfg) {
  ExperimentConfig out = cfg;
  out.ubb_process_shape = 0.25 * Matrix::Identity(cfg.x0.size(), cfg.x0.size());
  return out;
}

inline SweepRow sweep_row(const ExperimentConfig& cfg, std::string label, double scale,
                          unsigned threads) {
  const auto trials = run_trials(cfg, threads);
  std::vector<double> axes;
  for (const auto& t : trials) {
    for (const auto& r : t) axes.push_back(position_semi_axis(cfg, r.skf_shape));
  }
  return {std::move(label), scale, *std::max_element(axes.begin(), axes.end()), median(axes)};
}

inline std::vector<SweepRow> sensitivity_sweep(const ExperimentConfig& base,
                                               const std::vector<double>& scales,
                                               unsigned threads = 1) {
  std::vector<SweepRow> rows;
  for (double s : scales) {
    if (!(s > 0.0)) throw std::invalid_argument("sensitivity_sweep: scales must be positive");
    std::ostringstream label;
    label << 'x' << s;
    rows.push_back(sweep_row(scaled_bounds(base, s), label.str(), s, threads));
  }
  return rows;
}

}  // namespace skf
