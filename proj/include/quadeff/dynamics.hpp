#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "quadeff/random.hpp"
#include "quadeff/se3.hpp"

namespace quadeff {

/// Rigid-body and geometry parameters of the vehicle. Defaults describe an
/// F450-class frame.
struct QuadParams {
  double mass = 1.0;                           // kg
  Vec3 inertia = Vec3(0.01466, 0.01466, 0.02848);  // diag(Jxx, Jyy, Jzz), kg m^2
  double arm = 0.225;                          // m
  double c_tau_f = 0.009012;                   // m
  double gravity = 9.81;                       // m/s^2

  void validate() const {
    if (!(mass > 0.0 && arm > 0.0 && c_tau_f > 0.0 && gravity > 0.0 && (inertia.array() > 0.0).all())) {
      throw std::invalid_argument("QuadParams: all parameters must be strictly positive");
    }
  }
  Mat3 inertia_matrix() const { return inertia.asDiagonal(); }
};

/// Position and velocity are inertial (z down); R maps body to inertial;
/// omega is the body-frame angular velocity.
struct QuadState {
  Vec3 x = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Mat3 R = Mat3::Identity();
  Vec3 omega = Vec3::Zero();

  bool all_finite() const {
    return x.allFinite() && v.allFinite() && R.allFinite() && omega.allFinite();
  }
};

struct Wrench {
  double thrust = 0.0;  // collective, N
  Vec3 moment = Vec3::Zero();

  Vec4 stacked() const { return Vec4(thrust, moment.x(), moment.y(), moment.z()); }
  static Wrench from_stacked(const Vec4& w) { return {w(0), w.tail<3>()}; }
};

struct MotorThrusts {
  Vec4 f = Vec4::Zero();  // N, motors 1..4
};

struct EfficiencyVector {
  Vec4 eta = Vec4::Ones();

  static EfficiencyVector constant(double value) { return {Vec4::Constant(value)}; }
};

/// Maps motor thrusts to [collective thrust; M1; M2; M3].
inline Mat4 allocation_matrix(const QuadParams& p) {
  const double d = p.arm;
  const double c = p.c_tau_f;
  Mat4 lambda;
  lambda << 1.0, 1.0, 1.0, 1.0,
            -d, d, d, -d,
            d, d, -d, -d,
            -c, c, -c, c;
  return lambda;
}

inline MotorThrusts thrusts_from_wrench(const Wrench& cmd, const Mat4& lambda) {
  Eigen::FullPivLU<Mat4> lu(lambda);
  if (!lu.isInvertible()) {
    throw std::logic_error("thrusts_from_wrench: allocation matrix is singular");
  }
  return {lu.solve(cmd.stacked())};
}

/// Delivered wrench Lambda * diag(eta) * f.
inline Wrench apply_efficiency(const MotorThrusts& f, const EfficiencyVector& s, const Mat4& lambda) {
  return Wrench::from_stacked(lambda * s.eta.cwiseProduct(f.f));
}

/// Multiplicative log-normal actuator noise: f_i * exp(eps_i), eps_i ~ N(0, sigma_f).
inline MotorThrusts perturb_thrusts(const MotorThrusts& f, double sigma_f, NormalSource& rng) {
  if (sigma_f < 0.0) {
    throw std::invalid_argument("perturb_thrusts: sigma_f must be non-negative");
  }
  if (sigma_f == 0.0) {
    return f;
  }
  MotorThrusts out = f;
  for (int i = 0; i < 4; ++i) {
    out.f(i) *= std::exp(rng(0.0, sigma_f));
  }
  return out;
}

struct ClipResult {
  MotorThrusts thrusts;
  std::array<bool, 4> clipped{};

  bool any() const { return clipped[0] || clipped[1] || clipped[2] || clipped[3]; }
};

inline ClipResult clip_thrusts(const MotorThrusts& f, double f_min, double f_max) {
  if (f_min > f_max) {
    throw std::invalid_argument("clip_thrusts: f_min > f_max");
  }
  ClipResult out{f, {}};
  for (int i = 0; i < 4; ++i) {
    const double clamped = std::clamp(f.f(i), f_min, f_max);
    out.clipped[static_cast<std::size_t>(i)] = clamped != f.f(i);
    out.thrusts.f(i) = clamped;
  }
  return out;
}

/// Translational acceleration g*e3 - f*R*e3/m in the down-positive frame.
inline Vec3 linear_acceleration(const Mat3& R, double thrust, const QuadParams& p) {
  return Vec3(0.0, 0.0, p.gravity) - (thrust / p.mass) * R.col(2);
}

/// Body angular acceleration J^-1 (M - omega x J omega).
inline Vec3 angular_acceleration(const Vec3& omega, const Vec3& moment, const QuadParams& p) {
  const Vec3 j_omega = p.inertia.cwiseProduct(omega);
  return (moment - omega.cross(j_omega)).cwiseQuotient(p.inertia);
}

/// One explicit step of the truth model. Velocity, position and body rate use
/// the Euler/kinematic updates; the attitude is advanced by the exact
/// exponential of the updated body rate.
inline QuadState step(const QuadState& s, const Wrench& actual, const QuadParams& p, double dt) {
  if (!(dt > 0.0)) {
    throw std::invalid_argument("step: dt must be positive");
  }
  const Vec3 acc = linear_acceleration(s.R, actual.thrust, p);
  QuadState next;
  next.v = s.v + acc * dt;
  next.x = s.x + s.v * dt + 0.5 * acc * dt * dt;
  next.omega = s.omega + angular_acceleration(s.omega, actual.moment, p) * dt;
  next.R = s.R * so3_exp(next.omega * dt);
  return next;
}

}  // namespace quadeff
