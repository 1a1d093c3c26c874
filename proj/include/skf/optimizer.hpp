#pragma once

// Scalar minimization over beta > 0. The search runs on t = log(beta) with a
// golden-section bracket; if the minimum is pinned to an endpoint the
// offending side is pushed outwards (its distance from the bracket midpoint
// doubles) a bounded number of times. An endpoint at which the objective has
// stopped changing (relative change below kLimitTol over one unit of t) is
// accepted as the limit beta -> 0 or beta -> infinity.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "skf/errors.hpp"

namespace skf {

struct ScalarProblem {
  std::function<double(double beta)> objective;
  double t_lo = -20.0;
  double t_hi = 20.0;
  double tol = 1e-8;
  int max_iters = 200;
  int max_expansions = 5;
};

struct ScalarMinimum {
  double beta = 1.0;
  double value = 0.0;
  int iters = 0;
  double t = 0.0;
  bool at_limit = false;  // infimum approached at a bracket end
};

inline constexpr double kLimitTol = 1e-12;

namespace detail {

inline double checked_eval(const ScalarProblem& p, double t) {
  const double v = p.objective(std::exp(t));
  if (!std::isfinite(v)) {
    throw OptimizerError("minimize_scalar: non-finite objective at log(beta) = " +
                         std::to_string(t));
  }
  return v;
}

}  // namespace detail

inline ScalarMinimum minimize_scalar(const ScalarProblem& p) {
  if (!p.objective) throw std::invalid_argument("minimize_scalar: empty objective");
  if (!(p.t_lo < p.t_hi)) throw std::invalid_argument("minimize_scalar: empty bracket");
  if (!(p.tol > 0.0)) throw std::invalid_argument("minimize_scalar: tolerance must be positive");

  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = p.t_lo;
  double hi = p.t_hi;
  int iters = 0;

  const auto flat = [](double f1, double f2) {
    return std::abs(f1 - f2) <=
           kLimitTol * std::max({std::abs(f1), std::abs(f2), std::numeric_limits<double>::min()});
  };

  for (int expansion = 0;; ++expansion) {
    const double f_lo = detail::checked_eval(p, lo);
    const double f_hi = detail::checked_eval(p, hi);

    double a = lo;
    double b = hi;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = detail::checked_eval(p, c);
    double fd = detail::checked_eval(p, d);
    while (b - a > p.tol) {
      if (++iters > p.max_iters) {
        throw OptimizerError("minimize_scalar: no convergence within " +
                             std::to_string(p.max_iters) + " iterations on [" +
                             std::to_string(lo) + ", " + std::to_string(hi) + "]");
      }
      if (fc <= fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - inv_phi * (b - a);
        fc = detail::checked_eval(p, c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + inv_phi * (b - a);
        fd = detail::checked_eval(p, d);
      }
    }

    double t = fc <= fd ? c : d;
    double value = std::min(fc, fd);

    // A minimum on a plateau reaching an endpoint is the limit at that end.
    if (flat(value, f_lo) && f_lo <= f_hi) return {std::exp(lo), f_lo, iters, lo, true};
    if (flat(value, f_hi)) return {std::exp(hi), f_hi, iters, hi, true};

    const double edge = 1e-6 * (hi - lo) + 10.0 * p.tol;
    const bool at_lo = t - lo <= edge;
    const bool at_hi = hi - t <= edge;
    if (!at_lo && !at_hi) {
      // One Newton step on central differences. Golden section alone cannot
      // resolve t much below sqrt(eps) because the objective is flat there.
      constexpr double h = 1e-4;
      const double fp = detail::checked_eval(p, t + h);
      const double fm = detail::checked_eval(p, t - h);
      const double curvature = fp - 2.0 * value + fm;
      if (curvature > 0.0) {
        const double step = -h * (fp - fm) / (2.0 * curvature);
        if (std::abs(step) <= h) {
          const double fnew = detail::checked_eval(p, t + step);
          if (fnew <= value + 4.0 * std::numeric_limits<double>::epsilon() * std::abs(value)) {
            t += step;
            value = fnew;
          }
        }
      }
      return {std::exp(t), value, iters, t};
    }

    const double end = at_lo ? lo : hi;
    const double f_end = at_lo ? f_lo : f_hi;
    if (flat(f_end, detail::checked_eval(p, at_lo ? end + 1.0 : end - 1.0))) {
      return {std::exp(end), f_end, iters, end, true};
    }

    if (expansion >= p.max_expansions) {
      throw OptimizerError("minimize_scalar: minimum stays at the bracket endpoint log(beta) = " +
                           std::to_string(end) + " (unbounded descent)");
    }
    const double mid = 0.5 * (lo + hi);
    if (at_lo) lo = mid - 2.0 * (mid - lo);
    if (at_hi) hi = mid + 2.0 * (hi - mid);
  }
}

}  // namespace skf
