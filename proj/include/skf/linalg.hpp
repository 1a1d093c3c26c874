#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <string>

#include "skf/errors.hpp"

namespace skf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Largest absolute difference between m and its transpose.
inline double asymmetry(const Matrix& m) {
  if (m.size() == 0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

/// Eigenvalues (ascending) of the symmetric part of m.
inline Vector symmetric_eigenvalues(const Matrix& m) {
  if (m.size() == 0) return Vector{};
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
  return es.eigenvalues();
}

inline double min_eigenvalue(const Matrix& m) {
  const Vector ev = symmetric_eigenvalues(m);
  return ev.size() ? ev.minCoeff() : 0.0;
}

inline double max_eigenvalue(const Matrix& m) {
  const Vector ev = symmetric_eigenvalues(m);
  return ev.size() ? ev.maxCoeff() : 0.0;
}

/// Symmetric square root of a PSD matrix; tiny negative eigenvalues are clipped.
inline Matrix psd_sqrt(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
  const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * root.asDiagonal() * es.eigenvectors().transpose();
}

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline void require_square(const Matrix& m, Eigen::Index n, const std::string& what) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionError(what + ": expected " + std::to_string(n) + "x" + std::to_string(n) +
                         ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
}

inline void require_size(const Vector& v, Eigen::Index n, const std::string& what) {
  if (v.size() != n) {
    throw DimensionError(what + ": expected length " + std::to_string(n) + ", got " +
                         std::to_string(v.size()));
  }
}

}  // namespace skf
