#pragma once

// Nonlinear discrete-time system
//   x_k = f(x_{k-1}, u_k, w, a_1..a_I, k),   w ~ N(0, C^u),  a_i in E(0, S_i^u)
//   y_k = h(x_k, v, b, k),                   v ~ N(0, C^z),  b in E(0, S^z)
// and its first-order expansion about (center, u, 0, 0).
//
// Step convention: k is the index of the state being produced by f (and of
// the state being measured by h). Noise providers are queried with the same k.

#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skf/errors.hpp"
#include "skf/linalg.hpp"

namespace skf {

using ProcessFn =
    std::function<Vector(const Vector& x, const Vector& u, const Vector& w,
                         const std::vector<Vector>& a, int k)>;
using MeasurementFn =
    std::function<Vector(const Vector& x, const Vector& v, const Vector& b, int k)>;
using MatrixProvider = std::function<Matrix(int k)>;

/// Jacobian provider evaluated at the expansion point (x, u) of step k.
using ProcessJacobianFn = std::function<Matrix(const Vector& x, const Vector& u, int k)>;
using MeasurementJacobianFn = std::function<Matrix(const Vector& x, int k)>;

/// Optional analytic Jacobians; any empty entry falls back to central
/// finite differences.
struct AnalyticJacobians {
  ProcessJacobianFn fx;
  ProcessJacobianFn fw;
  std::vector<ProcessJacobianFn> fa;  // empty, or one per UBB process term
  MeasurementJacobianFn hx;
  MeasurementJacobianFn hv;
  MeasurementJacobianFn hb;
};

inline MatrixProvider constant_matrix(Matrix m) {
  return [m = std::move(m)](int) { return m; };
}

struct NonlinearModel {
  int state_dim = 0;
  int input_dim = 0;
  int meas_dim = 0;

  ProcessFn f;
  MeasurementFn h;

  MatrixProvider process_noise_cov;               // C^u_k
  std::vector<MatrixProvider> ubb_process_shapes;  // S^u_{i,k}, i = 1..I (I may be 0)
  MatrixProvider meas_noise_cov;                   // C^z_k
  MatrixProvider ubb_meas_shape;                   // S^z_k

  /// Measurement components holding angles; their residuals are wrapped
  /// to (-pi, pi]. Empty means no angular components.
  std::vector<bool> angular;

  AnalyticJacobians jacobians;

  std::size_t ubb_process_terms() const { return ubb_process_shapes.size(); }

  bool is_angular(Eigen::Index i) const {
    return static_cast<std::size_t>(i) < angular.size() && angular[static_cast<std::size_t>(i)];
  }
};

/// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::fmod(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  if (r > std::numbers::pi) r -= two_pi;
  return r;
}

/// y - predicted, with angular components wrapped.
inline Vector innovation(const NonlinearModel& m, const Vector& y, const Vector& predicted) {
  require_size(y, predicted.size(), "innovation: measurement");
  Vector r = y - predicted;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    if (m.is_angular(i)) r(i) = wrap_angle(r(i));
  }
  return r;
}

struct ProcessLinearization {
  Matrix fx;               // df/dx
  Matrix fw;               // df/dw
  std::vector<Matrix> fa;  // df/da_i
  Vector u_tilde;          // f(center, u, 0, 0) - fx * center
  Vector predicted;        // f(center, u, 0, 0)
  Matrix process_noise_cov;
  std::vector<Matrix> ubb_process_shapes;
};

struct MeasurementLinearization {
  Matrix hx;
  Matrix hv;
  Matrix hb;
  Vector z_tilde;    // h(center, 0, 0) - hx * center
  Vector predicted;  // h(center, 0, 0)
  Matrix meas_noise_cov;
  Matrix ubb_meas_shape;
};

namespace detail {

inline double fd_step(double x) {
  return std::sqrt(std::numeric_limits<double>::epsilon()) * std::max(1.0, std::abs(x));
}

/// Central-difference Jacobian of g at p. Each column uses its own step
/// sqrt(eps) * max(1, |p_j|), rounded so that p_j +- h is exact.
template <class G>
Matrix central_jacobian(G&& g, const Vector& p, Eigen::Index out_dim, int k) {
  Matrix jac(out_dim, p.size());
  Vector q = p;
  for (Eigen::Index j = 0; j < p.size(); ++j) {
    const double h = fd_step(p(j));
    const volatile double up = p(j) + h;
    const volatile double dn = p(j) - h;
    q(j) = up;
    const Vector gp = g(q);
    q(j) = dn;
    const Vector gm = g(q);
    q(j) = p(j);
    if (!gp.allFinite() || !gm.allFinite()) {
      throw NumericalError("finite-difference Jacobian: non-finite function value", k);
    }
    jac.col(j) = (gp - gm) / (up - dn);
  }
  return jac;
}

inline void require_finite(const Matrix& m, const std::string& what, int k) {
  if (!m.allFinite()) throw NumericalError(what + " is not finite", k);
}

inline void check_provided(const Matrix& m, Eigen::Index rows, Eigen::Index cols,
                           const std::string& what) {
  if (m.rows() != rows || m.cols() != cols) {
    throw DimensionError(what + ": expected " + std::to_string(rows) + "x" +
                         std::to_string(cols) + ", got " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

}  // namespace detail

/// Linearizes the process function about (x_center, u, w = 0, a_i = 0).
inline ProcessLinearization linearize_process(const NonlinearModel& m, const Vector& x_center,
                                              const Vector& u, int k) {
  require_size(x_center, m.state_dim, "linearize_process: center");
  if (!x_center.allFinite()) throw NumericalError("linearize_process: non-finite state", k);

  ProcessLinearization lin;
  lin.process_noise_cov = m.process_noise_cov(k);
  const auto nw = lin.process_noise_cov.rows();
  require_square(lin.process_noise_cov, nw, "process noise covariance");
  const auto terms = m.ubb_process_terms();
  std::vector<Vector> a0;
  for (std::size_t i = 0; i < terms; ++i) {
    lin.ubb_process_shapes.push_back(m.ubb_process_shapes[i](k));
    const auto na = lin.ubb_process_shapes.back().rows();
    require_square(lin.ubb_process_shapes.back(), na, "UBB process shape");
    a0.push_back(Vector::Zero(na));
  }
  const Vector w0 = Vector::Zero(nw);

  lin.predicted = m.f(x_center, u, w0, a0, k);
  require_size(lin.predicted, m.state_dim, "process function output");
  detail::require_finite(lin.predicted, "process function value at expansion point", k);

  const auto n = m.state_dim;
  if (m.jacobians.fx) {
    lin.fx = m.jacobians.fx(x_center, u, k);
  } else {
    lin.fx = detail::central_jacobian(
        [&](const Vector& x) { return m.f(x, u, w0, a0, k); }, x_center, n, k);
  }
  detail::check_provided(lin.fx, n, n, "F_x");

  if (m.jacobians.fw) {
    lin.fw = m.jacobians.fw(x_center, u, k);
  } else {
    lin.fw = detail::central_jacobian(
        [&](const Vector& w) { return m.f(x_center, u, w, a0, k); }, w0, n, k);
  }
  detail::check_provided(lin.fw, n, nw, "F_w");

  for (std::size_t i = 0; i < terms; ++i) {
    Matrix fa;
    if (i < m.jacobians.fa.size() && m.jacobians.fa[i]) {
      fa = m.jacobians.fa[i](x_center, u, k);
    } else {
      auto a = a0;
      fa = detail::central_jacobian(
          [&](const Vector& ai) {
            a[i] = ai;
            return m.f(x_center, u, w0, a, k);
          },
          a0[i], n, k);
    }
    detail::check_provided(fa, n, a0[i].size(), "F_a");
    lin.fa.push_back(std::move(fa));
  }

  detail::require_finite(lin.fx, "F_x", k);
  detail::require_finite(lin.fw, "F_w", k);
  for (const auto& fa : lin.fa) detail::require_finite(fa, "F_a", k);

  lin.u_tilde = lin.predicted - lin.fx * x_center;
  return lin;
}

/// Linearizes the measurement function about (x_center, v = 0, b = 0).
inline MeasurementLinearization linearize_measurement(const NonlinearModel& m,
                                                      const Vector& x_center, int k) {
  require_size(x_center, m.state_dim, "linearize_measurement: center");
  if (!x_center.allFinite()) throw NumericalError("linearize_measurement: non-finite state", k);

  MeasurementLinearization lin;
  lin.meas_noise_cov = m.meas_noise_cov(k);
  lin.ubb_meas_shape = m.ubb_meas_shape(k);
  const auto nv = lin.meas_noise_cov.rows();
  const auto nb = lin.ubb_meas_shape.rows();
  require_square(lin.meas_noise_cov, nv, "measurement noise covariance");
  require_square(lin.ubb_meas_shape, nb, "UBB measurement shape");
  const Vector v0 = Vector::Zero(nv);
  const Vector b0 = Vector::Zero(nb);
  const auto p = m.meas_dim;

  lin.predicted = m.h(x_center, v0, b0, k);
  require_size(lin.predicted, p, "measurement function output");
  detail::require_finite(lin.predicted, "measurement function value at expansion point", k);

  if (m.jacobians.hx) {
    lin.hx = m.jacobians.hx(x_center, k);
  } else {
    lin.hx = detail::central_jacobian([&](const Vector& x) { return m.h(x, v0, b0, k); },
                                      x_center, p, k);
  }
  detail::check_provided(lin.hx, p, m.state_dim, "H_x");

  if (m.jacobians.hv) {
    lin.hv = m.jacobians.hv(x_center, k);
  } else {
    lin.hv = detail::central_jacobian([&](const Vector& v) { return m.h(x_center, v, b0, k); },
                                      v0, p, k);
  }
  detail::check_provided(lin.hv, p, nv, "H_v");

  if (m.jacobians.hb) {
    lin.hb = m.jacobians.hb(x_center, k);
  } else {
    lin.hb = detail::central_jacobian([&](const Vector& b) { return m.h(x_center, v0, b, k); },
                                      b0, p, k);
  }
  detail::check_provided(lin.hb, p, nb, "H_b");

  detail::require_finite(lin.hx, "H_x", k);
  detail::require_finite(lin.hv, "H_v", k);
  detail::require_finite(lin.hb, "H_b", k);

  lin.z_tilde = lin.predicted - lin.hx * x_center;
  return lin;
}

}  // namespace skf
