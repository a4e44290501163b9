#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "quadeff/dynamics.hpp"
#include "quadeff/se3.hpp"

namespace quadeff {

struct Gains {
  Vec3 k_x = Vec3(9.0, 9.0, 12.0);
  Vec3 k_v = Vec3(7.0, 7.0, 12.0);
  Vec3 k_R = Vec3(10.0, 10.0, 10.0);
  Vec3 k_omega = Vec3(2.0, 2.0, 2.0);

  void validate() const {
    if (!((k_x.array() > 0.0).all() && (k_v.array() > 0.0).all() && (k_R.array() > 0.0).all() &&
          (k_omega.array() > 0.0).all())) {
      throw std::invalid_argument("Gains: diagonal entries must be positive");
    }
  }
};

/// Reference for the tracking controller. R_d is filled in by the controller.
struct DesiredState {
  Vec3 x_d = Vec3::Zero();
  Vec3 v_d = Vec3::Zero();
  Vec3 a_d = Vec3::Zero();
  Vec3 b1_d = Vec3::UnitX();
  Vec3 omega_d = Vec3::Zero();
  Vec3 omega_dot_d = Vec3::Zero();
};

struct TrackingErrors {
  Vec3 e_x;
  Vec3 e_v;
  Vec3 e_R;
  Vec3 e_omega;
};

class ControlError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kRotationTolerance = 1e-6;

inline TrackingErrors tracking_errors(const QuadState& s, const DesiredState& des, const Mat3& R_d) {
  if (orthonormality_error(s.R) > kRotationTolerance || orthonormality_error(R_d) > kRotationTolerance) {
    throw ControlError("tracking_errors: rotation input is not orthonormal");
  }
  const Mat3 rel = R_d.transpose() * s.R;
  TrackingErrors e;
  e.e_x = s.x - des.x_d;
  e.e_v = s.v - des.v_d;
  e.e_R = 0.5 * vee(rel - rel.transpose());
  e.e_omega = s.omega - s.R.transpose() * R_d * des.omega_d;
  return e;
}

/// The (un-normalized) thrust vector -k_x e_x - k_v e_v - m g e3 + m a_d.
inline Vec3 thrust_vector(const Vec3& e_x, const Vec3& e_v, const Vec3& a_d, const QuadParams& p, const Gains& k) {
  return -k.k_x.cwiseProduct(e_x) - k.k_v.cwiseProduct(e_v) - p.mass * p.gravity * Vec3::UnitZ() + p.mass * a_d;
}

/// Desired attitude [b2 x b3, b2, b3] with b3 opposing the thrust vector and
/// b2 = (b3 x b1_d) / |b3 x b1_d|.
inline Mat3 desired_attitude(const Vec3& e_x, const Vec3& e_v, const Vec3& a_d, const Vec3& b1_d,
                             const QuadParams& p, const Gains& k) {
  const Vec3 a = thrust_vector(e_x, e_v, a_d, p, k);
  const double norm = a.norm();
  if (!(norm >= 1e-9)) {
    throw ControlError("desired_attitude: degenerate thrust direction");
  }
  const Vec3 b3 = -a / norm;
  const Vec3 b3_cross_b1 = b3.cross(b1_d);
  const double side = b3_cross_b1.norm();
  if (!(side >= 1e-9)) {
    throw ControlError("desired_attitude: heading direction is parallel to thrust axis");
  }
  const Vec3 b2 = b3_cross_b1 / side;
  Mat3 R_d;
  R_d.col(0) = b2.cross(b3);
  R_d.col(1) = b2;
  R_d.col(2) = b3;
  return R_d;
}

struct ControlOutput {
  Wrench wrench;
  Mat3 R_d;
  TrackingErrors errors;
};

/// Geometric SE(3) tracking law. Returns the commanded wrench together with
/// the desired attitude and errors it was computed from.
inline ControlOutput control_wrench(const QuadState& s, const DesiredState& des, const QuadParams& p,
                                    const Gains& k) {
  const Vec3 e_x = s.x - des.x_d;
  const Vec3 e_v = s.v - des.v_d;
  ControlOutput out;
  out.R_d = desired_attitude(e_x, e_v, des.a_d, des.b1_d, p, k);
  out.errors = tracking_errors(s, des, out.R_d);

  out.wrench.thrust = -thrust_vector(e_x, e_v, des.a_d, p, k).dot(s.R.col(2));

  const Vec3 j_omega = p.inertia.cwiseProduct(s.omega);
  const Mat3 rt_rd = s.R.transpose() * out.R_d;
  const Vec3 feed_forward = hat(s.omega) * rt_rd * des.omega_d - rt_rd * des.omega_dot_d;
  out.wrench.moment = -k.k_R.cwiseProduct(out.errors.e_R) - k.k_omega.cwiseProduct(out.errors.e_omega) +
                      s.omega.cross(j_omega) - p.inertia.cwiseProduct(feed_forward);
  return out;
}

/// Horizontal circle of radius 3 m at 1 m altitude (z = -1, down-positive),
/// period 10 s, with the heading rotating at half the orbital rate.
inline DesiredState circle_trajectory(double t) {
  if (t < 0.0) {
    throw std::invalid_argument("circle_trajectory: t must be non-negative");
  }
  constexpr double radius = 3.0;
  constexpr double w = 0.2 * std::numbers::pi;
  constexpr double w_heading = 0.1 * std::numbers::pi;
  const double c = std::cos(w * t);
  const double s = std::sin(w * t);
  DesiredState d;
  d.x_d = Vec3(radius * c, radius * s, -1.0);
  d.v_d = Vec3(-radius * w * s, radius * w * c, 0.0);
  d.a_d = Vec3(-radius * w * w * c, -radius * w * w * s, 0.0);
  d.b1_d = Vec3(std::cos(w_heading * t), std::sin(w_heading * t), 0.0);
  return d;
}

/// Stationary hover reference at `position`, heading along +x.
inline DesiredState hover_trajectory(const Vec3& position) {
  DesiredState d;
  d.x_d = position;
  return d;
}

}  // namespace quadeff
