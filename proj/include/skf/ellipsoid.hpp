#pragma once

// Ellipsoidal set calculus. An ellipsoid E(c, S) is the set
// { x : (x - c)^T S^{-1} (x - c) <= 1 } with S symmetric positive
// semi-definite. Shapes with a (numerically) singular S are kept as valid
// operands of affine maps and Minkowski bounds, but cannot answer
// membership queries.

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "skf/errors.hpp"
#include "skf/linalg.hpp"

namespace skf {

inline constexpr double kSymmetryTol = 1e-10;
inline constexpr double kDegenerateEigenvalue = 1e-12;
inline constexpr double kZeroTrace = 1e-14;

class Ellipsoid {
 public:
  /// Throws DimensionError on non-conforming sizes and std::invalid_argument
  /// when the shape is asymmetric or indefinite.
  Ellipsoid(Vector center, Matrix shape) : center_(std::move(center)) {
    require_square(shape, center_.size(), "ellipsoid shape");
    if (!center_.allFinite() || !shape.allFinite()) {
      throw std::invalid_argument("ellipsoid: non-finite center or shape");
    }
    if (asymmetry(shape) > kSymmetryTol) {
      throw std::invalid_argument("ellipsoid: shape is not symmetric");
    }
    shape_ = symmetrized(shape);
    min_eig_ = min_eigenvalue(shape_);
    const double scale = std::max(1.0, max_eigenvalue(shape_));
    if (min_eig_ < -kSymmetryTol * scale) {
      throw std::invalid_argument("ellipsoid: shape is not positive semi-definite");
    }
  }

  /// Ball of the given radius centered at the origin.
  static Ellipsoid ball(Eigen::Index n, double radius = 1.0) {
    return {Vector::Zero(n), Matrix::Identity(n, n) * radius * radius};
  }

  const Vector& center() const noexcept { return center_; }
  const Matrix& shape() const noexcept { return shape_; }
  Eigen::Index dim() const noexcept { return center_.size(); }
  double trace() const { return shape_.trace(); }
  bool degenerate() const noexcept { return min_eig_ < kDegenerateEigenvalue; }

  /// Semi-axis lengths, ascending.
  Vector semi_axes() const { return symmetric_eigenvalues(shape_).cwiseMax(0.0).cwiseSqrt(); }

 private:
  Vector center_;
  Matrix shape_;
  double min_eig_ = 0.0;
};

/// Ordered list of summands of a Minkowski sum.
class EllipsoidSum {
 public:
  explicit EllipsoidSum(std::vector<Ellipsoid> terms) : terms_(std::move(terms)) {
    if (terms_.empty()) throw std::invalid_argument("ellipsoid sum needs at least one term");
    const auto n = terms_.front().dim();
    for (const auto& t : terms_) {
      if (t.dim() != n) throw DimensionError("ellipsoid sum: terms differ in dimension");
    }
  }

  const std::vector<Ellipsoid>& terms() const noexcept { return terms_; }
  std::size_t size() const noexcept { return terms_.size(); }
  Eigen::Index dim() const { return terms_.front().dim(); }

 private:
  std::vector<Ellipsoid> terms_;
};

/// Image { a x + b : x in e }.
inline Ellipsoid affine_image(const Ellipsoid& e, const Matrix& a, const Vector& b) {
  if (a.cols() != e.dim() || a.rows() != b.size()) {
    throw DimensionError("affine_image: map is " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " for a " + std::to_string(e.dim()) +
                         "-dim ellipsoid and offset of length " + std::to_string(b.size()));
  }
  return {a * e.center() + b, symmetrized(a * e.shape() * a.transpose())};
}

inline Ellipsoid affine_image(const Ellipsoid& e, const Matrix& a) {
  return affine_image(e, a, Vector::Zero(a.rows()));
}

/// Membership test (x - c)^T S^{-1} (x - c) <= 1 + slack, via Cholesky solve.
inline bool contains(const Ellipsoid& e, const Vector& x, double slack = 0.0) {
  require_size(x, e.dim(), "contains: point");
  if (e.degenerate()) {
    throw DegenerateEllipsoidError("contains: shape is singular (flat ellipsoid)");
  }
  Eigen::LLT<Matrix> llt(e.shape());
  if (llt.info() != Eigen::Success) {
    throw DegenerateEllipsoidError("contains: shape is not positive definite");
  }
  const Vector d = x - e.center();
  const Vector z = llt.matrixL().solve(d);
  return z.squaredNorm() <= 1.0 + slack;
}

/// (1 + 1/beta) s1 + (1 + beta) s2: a member of the two-term outer-bound family.
inline Matrix pair_sum_shape(const Matrix& s1, const Matrix& s2, double beta) {
  if (!(beta > 0.0)) throw std::invalid_argument("pair_sum_shape: beta must be positive");
  require_square(s1, s1.rows(), "pair_sum_shape: first shape");
  require_square(s2, s1.rows(), "pair_sum_shape: second shape");
  return symmetrized((1.0 + 1.0 / beta) * s1 + (1.0 + beta) * s2);
}

/// Trace-minimal member of the outer-bound family of a Minkowski sum:
/// center = sum of centers, shape = (sum_k sqrt(tr S_k)) (sum_k S_k / sqrt(tr S_k)).
/// Summands with trace <= kZeroTrace are points and only shift the center.
inline Ellipsoid trace_min_sum(const EllipsoidSum& sum) {
  if (sum.size() == 1) return sum.terms().front();
  const auto n = sum.dim();
  Vector center = Vector::Zero(n);
  Matrix weighted = Matrix::Zero(n, n);
  double root_trace_sum = 0.0;
  for (const auto& t : sum.terms()) {
    center += t.center();
    const double tr = t.trace();
    if (tr <= kZeroTrace) continue;
    const double root = std::sqrt(tr);
    root_trace_sum += root;
    weighted += t.shape() / root;
  }
  return {center, symmetrized(root_trace_sum * weighted)};
}

inline Ellipsoid trace_min_sum(std::vector<Ellipsoid> terms) {
  return trace_min_sum(EllipsoidSum(std::move(terms)));
}

/// count points on the boundary of e, obtained by mapping uniform directions
/// through the Cholesky factor of the shape. Deterministic given seed.
inline std::vector<Vector> sample_boundary(const Ellipsoid& e, int count, std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("sample_boundary: count must be >= 1");
  if (e.degenerate()) throw DegenerateEllipsoidError("sample_boundary: shape is singular");
  Eigen::LLT<Matrix> llt(e.shape());
  if (llt.info() != Eigen::Success) {
    throw DegenerateEllipsoidError("sample_boundary: shape is not positive definite");
  }
  const Matrix l = llt.matrixL();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<Vector> out;
  out.reserve(static_cast<std::size_t>(count));
  Vector u(e.dim());
  while (static_cast<int>(out.size()) < count) {
    for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = normal(rng);
    const double norm = u.norm();
    if (norm < 1e-300) continue;
    out.push_back(e.center() + l * (u / norm));
  }
  return out;
}

/// Uniform draw from the solid ellipsoid. Works for singular shapes too (the
/// draw then lies in the flat set), since it maps through the symmetric root.
template <class Rng>
Vector sample_uniform(const Ellipsoid& e, Rng& rng) {
  const auto n = e.dim();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unit;
  Vector u(n);
  double norm = 0.0;
  do {
    for (Eigen::Index i = 0; i < n; ++i) u(i) = normal(rng);
    norm = u.norm();
  } while (norm < 1e-300);
  const double radius = std::pow(unit(rng), 1.0 / static_cast<double>(n));
  return e.center() + psd_sqrt(e.shape()) * (u * (radius / norm));
}

}  // namespace skf
