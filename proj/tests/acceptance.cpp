// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Reference values come from the oracles in oracles.hpp.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "oracles.hpp"
#include "skf/ellipsoid.hpp"
#include "skf/experiments.hpp"
#include "skf/filter.hpp"
#include "skf_io.hpp"

using namespace skf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Hygiene {
  double cov_min_rel = std::numeric_limits<double>::infinity();
  double shape_min_rel = std::numeric_limits<double>::infinity();
  double asym_rel = 0.0;
  long updates = 0;

  void add(const Summary& s, long n) {
    cov_min_rel = std::min(cov_min_rel, s.worst_cov_min_eig_rel);
    shape_min_rel = std::min(shape_min_rel, s.worst_shape_min_eig_rel);
    asym_rel = std::max(asym_rel, s.worst_asymmetry_rel);
    updates += n;
  }
};

Hygiene hygiene;

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

Summary run_and_record(const ExperimentConfig& cfg) {
  const auto trials = run_trials(cfg, threads());
  const Summary s = aggregate(cfg, trials);
  hygiene.add(s, static_cast<long>(cfg.trials) * cfg.steps);
  return s;
}

// 1. eta = 0 reduces the SKF to the EKF.
Outcome ekf_reduction() {
  auto cfg = default_config(ExampleId::example1);
  cfg.eta = 0.0;
  double worst = 0.0, slowest = 0.0;
  for (std::uint64_t seed : {1u, 7u, 42u, 1234u}) {
    cfg.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const auto trial = run_trial(cfg, 0);
    slowest = std::max(slowest, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    for (const auto& r : trial) {
      worst = std::max({worst, (r.skf_center - r.ekf_state).cwiseAbs().maxCoeff(),
                        (r.skf_cov - r.ekf_cov).cwiseAbs().maxCoeff()});
    }
    hygiene.add(aggregate(cfg, {trial}), cfg.steps);
  }
  return {worst < 1e-9 && slowest < 1.0,
          "max gap " + num(worst) + " (< 1e-9), slowest 50-step run " + num(slowest) + " s (< 1 s)"};
}

// 2. Sampled member-sums lie in the trace-minimal bound.
Outcome containment() {
  std::mt19937_64 rng(2024);
  std::uniform_int_distribution<int> kd(1, 4), nd(1, 4);
  std::uniform_real_distribution<double> logs(-2.0, 2.0);
  long outside = 0, total = 0;
  for (int f = 0; f < 200; ++f) {
    const int k = kd(rng), n = nd(rng);
    std::vector<Ellipsoid> terms;
    for (int i = 0; i < k; ++i) {
      terms.emplace_back(oracle::gaussian(n, 1, rng).col(0), oracle::spd(n, rng, std::pow(10.0, logs(rng))));
    }
    const Ellipsoid bound = trace_min_sum(terms);
    for (int d = 0; d < 10000; ++d) {
      Vector x = Vector::Zero(n);
      for (const auto& t : terms) x += oracle::ellipsoid_point(t.center(), t.shape(), d % 2 == 0, rng);
      if (!contains(bound, x, 1e-9)) ++outside;
      ++total;
    }
  }
  return {outside == 0, std::to_string(outside) + " of " + std::to_string(total) + " points outside"};
}

// 3. Trace optimality over the simplex family and the two-term closed form.
Outcome trace_optimality() {
  std::mt19937_64 rng(77);
  double worst_excess = -1e300, worst_pair = 0.0;
  for (int f = 0; f < 200; ++f) {
    const int k = 2 + f % 3, n = 1 + (f / 3) % 4;
    std::vector<Ellipsoid> terms;
    for (int i = 0; i < k; ++i) terms.emplace_back(Vector::Zero(n), oracle::spd(n, rng));
    const double tr = trace_min_sum(terms).trace();
    double grid = 1e300;
    for (int s = 0; s < 1000; ++s) {
      const auto alpha = oracle::simplex_point(k, rng);
      double t = 0.0;
      for (int i = 0; i < k; ++i) t += terms[static_cast<std::size_t>(i)].trace() / alpha[static_cast<std::size_t>(i)];
      grid = std::min(grid, t);
    }
    worst_excess = std::max(worst_excess, tr - grid);

    const Matrix s1 = oracle::spd(n, rng), s2 = oracle::spd(n, rng);
    const Matrix b = trace_min_sum({Ellipsoid(Vector::Zero(n), s1), Ellipsoid(Vector::Zero(n), s2)}).shape();
    const double beta = std::sqrt(s1.trace() / s2.trace());
    const Matrix closed = (1 + 1 / beta) * s1 + (1 + beta) * s2;
    worst_pair = std::max(worst_pair, (b - closed).cwiseAbs().maxCoeff());
  }
  return {worst_excess <= 1e-9 && worst_pair <= 1e-10,
          "trace - simplex grid min <= " + num(worst_excess) + " (<= 1e-9), pair closed form gap " +
              num(worst_pair) + " (<= 1e-10)"};
}

NonlinearModel linear_measurement_model(const Matrix& h, const Matrix& cz, const Matrix& sz) {
  NonlinearModel m;
  m.state_dim = static_cast<int>(h.cols());
  m.meas_dim = static_cast<int>(h.rows());
  m.h = [h](const Vector& x, const Vector& v, const Vector& b, int) { return Vector(h * x + v + b); };
  m.meas_noise_cov = constant_matrix(cz);
  m.ubb_meas_shape = constant_matrix(sz);
  return m;
}

// 4. The per-step beta search against a log-grid argmin of J.
Outcome beta_optimizer() {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> dim(1, 4);
  const double etas[] = {0.25, 0.5, 0.75};
  int interior = 0, limits = 0, bad = 0;
  double worst_rel = 0.0, worst_excess = -1e300;
  for (int c = 0; c < 100; ++c) {
    const int n = dim(rng), p = dim(rng);
    const double eta = etas[c % 3];
    const Matrix h = oracle::gaussian(p, n, rng);
    const Matrix cz = oracle::spd(p, rng), sz = oracle::spd(p, rng);
    StateBelief prior{oracle::gaussian(n, 1, rng).col(0), oracle::spd(n, rng), oracle::spd(n, rng),
                      BeliefKind::prior, 1};
    FilterConfig fc;
    fc.eta = eta;
    const auto m = linear_measurement_model(h, cz, sz);
    const auto [post, report] = skf_update(prior, Vector::Zero(p), m, fc, 1);

    const oracle::StepCost cost{prior.cov, prior.shape, h, cz, sz, eta};
    const auto j = [&](double beta) { return cost.profile(beta); };
    const auto g = oracle::log_grid_min(j, -20.0, 20.0, 100000);
    const double at_star = j(report.beta_star);
    worst_excess = std::max(worst_excess, at_star - g.value);
    bool ok = at_star <= g.value + 1e-9;
    if (report.mode == BetaMode::optimized) {
      ++interior;
      const double rel = std::abs(report.beta_star - std::exp(g.t)) / std::exp(g.t);
      worst_rel = std::max(worst_rel, rel);
      ok = ok && rel <= 1e-5;
    } else {
      // infimum approached at a bracket end: no finite argmin to compare;
      // the grid must be flat out to the reported end
      ++limits;
      ok = ok && report.mode == BetaMode::limit &&
           std::abs(at_star - g.value) <= 1e-9 * std::max(1.0, std::abs(g.value));
    }
    if (!ok) ++bad;
  }
  return {bad == 0, std::to_string(interior) + " interior minima, worst beta rel err " + num(worst_rel) +
                        " (<= 1e-5); " + std::to_string(limits) +
                        " limit cases; J(beta*) - grid min <= " + num(worst_excess) + " (<= 1e-9)"};
}

// 5. The closed-form gain is a stationary point of J in K.
Outcome gain_stationarity() {
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> dim(1, 4);
  std::uniform_real_distribution<double> logb(-3.0, 3.0);
  const double etas[] = {0.25, 0.5, 0.75};
  double worst = 0.0;
  for (int c = 0; c < 100; ++c) {
    const int n = dim(rng), p = dim(rng);
    const double eta = etas[c % 3];
    const Matrix h = oracle::gaussian(p, n, rng);
    const Matrix cz = oracle::spd(p, rng), sz = oracle::spd(p, rng);
    StateBelief prior{Vector::Zero(n), oracle::spd(n, rng), oracle::spd(n, rng), BeliefKind::prior, 1};
    MeasurementLinearization lin;
    lin.hx = h;
    lin.hv = lin.hb = Matrix::Identity(p, p);
    lin.meas_noise_cov = cz;
    lin.ubb_meas_shape = sz;
    FilterConfig fc;
    fc.eta = eta;
    const double beta = std::exp(logb(rng));
    const Matrix k = skf_gain(prior, lin, fc, beta);
    const oracle::StepCost cost{prior.cov, prior.shape, h, cz, sz, eta};
    Matrix grad(k.rows(), k.cols()), grad0(k.rows(), k.cols());
    const Matrix zero = Matrix::Zero(k.rows(), k.cols());
    for (Eigen::Index i = 0; i < k.rows(); ++i) {
      for (Eigen::Index jx = 0; jx < k.cols(); ++jx) {
        const double step = 1e-5 * std::max(1.0, std::abs(k(i, jx)));
        Matrix kp = k, km = k, zp = zero, zm = zero;
        kp(i, jx) += step;
        km(i, jx) -= step;
        zp(i, jx) += step;
        zm(i, jx) -= step;
        grad(i, jx) = (cost(kp, beta) - cost(km, beta)) / (2 * step);
        grad0(i, jx) = (cost(zp, beta) - cost(zm, beta)) / (2 * step);
      }
    }
    worst = std::max(worst, grad.norm() / grad0.norm());
  }
  return {worst < 1e-6, "worst |dJ/dK| / |dJ/dK at K=0| = " + num(worst) + " (< 1e-6)"};
}

// 6. Example 1: SKF beats the EKF on average.
Outcome example1_direction() {
  auto cfg = default_config(ExampleId::example1);
  cfg.trials = 100;
  int good = 0;
  std::string blocks;
  const auto t0 = std::chrono::steady_clock::now();
  for (std::uint64_t block = 1; block <= 5; ++block) {
    cfg.seed = block;
    const Summary s = run_and_record(cfg);
    const bool ok = s.skf_l2_mean < s.ekf_l2_mean && s.win_rate > 0.5;
    if (ok) ++good;
    blocks += " [" + num(s.skf_l2_mean) + " vs " + num(s.ekf_l2_mean) + ", win " + num(s.win_rate) + "]";
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return {good >= 4 && secs < 60.0, std::to_string(good) + " of 5 blocks (need 4), skf vs ekf mean l2:" +
                                        blocks + ", " + num(secs) + " s (< 60 s)"};
}

// 7. Example 2: bound widens across the station line, perpendicular to it.
Outcome example2_crossing() {
  auto cfg = default_config(ExampleId::example2);
  cfg.trials = 100;
  cfg.seed = 1;
  const auto t0 = std::chrono::steady_clock::now();
  const Summary s = run_and_record(cfg);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  int ok = 0;
  double min_ratio = 1e300, max_angle = 0.0;
  for (const auto& c : s.crossings) {
    if (c.peak_step < 0) continue;
    min_ratio = std::min(min_ratio, c.ratio);
    max_angle = std::max(max_angle, c.angle_to_normal_deg);
    if (c.ratio > 2.0 && c.angle_to_normal_deg <= 15.0) ++ok;
  }
  return {ok == cfg.trials && secs < 300.0,
          std::to_string(ok) + " of " + std::to_string(cfg.trials) + " trials, min ratio " + num(min_ratio) +
              " (> 2), max angle " + num(max_angle) + " deg (<= 15), " + num(secs) + " s (< 300 s)"};
}

// 8. Bounds grow with the perturbation bounds.
Outcome sensitivity() {
  auto cfg = default_config(ExampleId::example2);
  cfg.trials = 10;
  std::vector<double> axes;
  for (double scale : {1.0, 10.0, 100.0}) {
    const auto scaled = scaled_bounds(cfg, scale);
    const auto trials = run_trials(scaled, threads());
    const Summary s = aggregate(scaled, trials);
    hygiene.add(s, static_cast<long>(scaled.trials) * scaled.steps);
    axes.push_back(s.semi_axis_overall_max);
  }
  const double r1 = axes[1] / axes[0], r2 = axes[2] / axes[1];
  const bool increasing = axes[0] < axes[1] && axes[1] < axes[2];
  const bool proportional = r1 >= 7.0 && r1 <= 13.0 && r2 >= 7.0 && r2 <= 13.0;
  return {increasing && proportional, "max semi-axes " + num(axes[0]) + ", " + num(axes[1]) + ", " +
                                          num(axes[2]) + "; decade ratios " + num(r1) + ", " + num(r2) +
                                          " (within 10 +- 30%)"};
}

std::string csv_of(const ExperimentConfig& cfg, unsigned workers) {
  std::ostringstream out;
  io::write_csv(out, cfg, run_trials(cfg, workers));
  return out.str();
}

// 9. No PD/PSD or symmetry violations anywhere above; reproducible CSVs.
Outcome numerical_hygiene() {
  auto c1 = default_config(ExampleId::example1);
  c1.trials = 8;
  c1.seed = 7;
  auto c2 = default_config(ExampleId::example2);
  c2.trials = 4;
  c2.seed = 7;
  const bool same = csv_of(c1, 1) == csv_of(c1, threads() > 1 ? 4 : 1) &&
                    csv_of(c2, 1) == csv_of(c2, threads() > 1 ? 3 : 1);
  const bool pd = hygiene.cov_min_rel > -1e-10;
  const bool psd = hygiene.shape_min_rel >= -1e-10;
  const bool sym = hygiene.asym_rel <= 1e-10;
  return {pd && psd && sym && same,
          std::to_string(hygiene.updates) + " updates: worst rel cov eig " + num(hygiene.cov_min_rel) +
              ", shape eig " + num(hygiene.shape_min_rel) + ", asymmetry " + num(hygiene.asym_rel) +
              " (limit 1e-10); CSVs " + (same ? "byte-identical" : "DIFFER")};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 EKF reduction at eta = 0", ekf_reduction},
      {"2 Minkowski containment", containment},
      {"3 trace optimality and pair closed form", trace_optimality},
      {"4 beta optimizer vs log grid", beta_optimizer},
      {"5 gain stationarity", gain_stationarity},
      {"6 example 1 SKF vs EKF", example1_direction},
      {"7 example 2 crossing region", example2_crossing},
      {"8 sensitivity to bound size", sensitivity},
      {"9 numerical hygiene and reproducibility", numerical_hygiene},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (!o.pass) ++failed;
    std::printf("%s  criterion %s: %s [%.2f s]\n", o.pass ? "PASS" : "FAIL", name.c_str(),
                o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
