#pragma once

// Small, allocation-free Eigen types sized for the built-in models.
// Ambient dimension N <= 6, chart dimension d <= 4.

#include <Eigen/Dense>

namespace folilab {

inline constexpr int kMaxAmbient = 6;
inline constexpr int kMaxChart = 4;

using AmbientVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxAmbient, 1>;
using ChartVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxChart, 1>;
using AmbientMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxAmbient>;
using ChartMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxChart, kMaxChart>;

/// N x d matrix of chart partial derivatives (columns are d psi / d x_k).
using Jacobian = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxAmbient, kMaxChart>;

/// d x N (or p x N) matrix mapping ambient tangent vectors to chart displacements.
using Pullback = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxChart, kMaxAmbient>;

namespace detail {

template <int n>
void fixed_inverse(const ChartMatrix& m, ChartMatrix& out, double& det) {
  const Eigen::Matrix<double, n, n> f = m;
  det = f.determinant();
  out = f.inverse();
}

}  // namespace detail

/// Inverse and determinant of a small square matrix through the closed-form fixed-size routines.
inline ChartMatrix small_inverse(const ChartMatrix& m, double* det = nullptr) {
  ChartMatrix out(m.rows(), m.cols());
  double dummy = 0.0;
  double& d = det ? *det : dummy;
  switch (m.rows()) {
    case 1:
      d = m(0, 0);
      out(0, 0) = 1.0 / m(0, 0);
      break;
    case 2: detail::fixed_inverse<2>(m, out, d); break;
    case 3: detail::fixed_inverse<3>(m, out, d); break;
    default: detail::fixed_inverse<4>(m, out, d); break;
  }
  return out;
}

inline double small_determinant(const ChartMatrix& m) {
  switch (m.rows()) {
    case 0: return 1.0;
    case 1: return m(0, 0);
    case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3: return Eigen::Matrix3d(m).determinant();
    default: return Eigen::Matrix4d(m).determinant();
  }
}

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

}  // namespace folilab
