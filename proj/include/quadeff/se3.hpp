#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace quadeff {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Vec4 = Eigen::Vector4d;
using Mat4 = Eigen::Matrix4d;

/// Skew-symmetric matrix of v, so that hat(v) * w == v.cross(w).
inline Mat3 hat(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

/// Inverse of hat(). Throws std::invalid_argument when M is not antisymmetric
/// to within `tol` (max-norm of M + M^T).
inline Vec3 vee(const Mat3& m, double tol = 1e-9) {
  if ((m + m.transpose()).cwiseAbs().maxCoeff() > tol) {
    throw std::invalid_argument("vee: matrix is not skew-symmetric");
  }
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

/// Exact exponential of hat(w) via the Rodrigues formula.
inline Mat3 so3_exp(const Vec3& w) {
  const double theta_sq = w.squaredNorm();
  const double theta = std::sqrt(theta_sq);
  double a;  // sin(theta) / theta
  double b;  // (1 - cos(theta)) / theta^2
  if (theta < 1e-6) {
    a = 1.0 - theta_sq / 6.0;
    b = 0.5 - theta_sq / 24.0;
  } else {
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta_sq;
  }
  const Mat3 k = hat(w);
  return Mat3::Identity() + a * k + b * (k * k);
}

/// First-order truncation I + hat(w) * dt. Not a rotation in general.
inline Mat3 so3_exp_first_order(const Vec3& w, double dt) {
  return Mat3::Identity() + hat(w) * dt;
}

/// Distance of R from SO(3) measured as max |R^T R - I|.
inline double orthonormality_error(const Mat3& r) {
  return (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
}

/// Nearest rotation (polar factor) of an arbitrary 3x3 matrix.
inline Mat3 orthonormalize(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  if ((u * v.transpose()).determinant() < 0.0) {
    u.col(2) *= -1.0;
  }
  return u * v.transpose();
}

}  // namespace quadeff
