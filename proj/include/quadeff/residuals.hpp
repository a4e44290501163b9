#pragma once

#include <cmath>
#include <span>
#include <stdexcept>

#include "quadeff/dynamics.hpp"
#include "quadeff/se3.hpp"

namespace quadeff {

/// One measured transition together with the commanded (pre-noise,
/// pre-clip) motor thrusts that produced it.
struct WindowSegment {
  QuadState state_t;
  QuadState state_t1;
  MotorThrusts f_cmd;
  double dt = 0.0;
  double t = 0.0;  // time of state_t
};

inline constexpr int kResidualsPerSegment = 10;

using SegmentResidualVector = Eigen::Matrix<double, kResidualsPerSegment, 1>;
using SegmentJacobian = Eigen::Matrix<double, kResidualsPerSegment, 4>;

/// Residual channels of one segment. Stacked order is v, x, omega, R.
struct SegmentResidual {
  Vec3 r_v = Vec3::Zero();
  Vec3 r_x = Vec3::Zero();
  Vec3 r_omega = Vec3::Zero();
  double r_R = 0.0;

  SegmentResidualVector stacked() const {
    SegmentResidualVector out;
    out << r_v, r_x, r_omega, r_R;
    return out;
  }
};

struct Prediction {
  Vec3 v;
  Vec3 x;
  Vec3 omega;
  Mat3 delta_R;
};

/// One-step model prediction from seg.state_t with the wrench delivered by
/// efficiency s. The incremental rotation is the first-order form built from
/// the propagated body rate.
inline Prediction predict_next(const WindowSegment& seg, const EfficiencyVector& s, const QuadParams& p) {
  const Wrench w = apply_efficiency(seg.f_cmd, s, allocation_matrix(p));
  const Vec3 acc = linear_acceleration(seg.state_t.R, w.thrust, p);
  Prediction out;
  out.v = seg.state_t.v + acc * seg.dt;
  out.x = seg.state_t.x + seg.state_t.v * seg.dt + 0.5 * acc * seg.dt * seg.dt;
  out.omega = seg.state_t.omega + angular_acceleration(seg.state_t.omega, w.moment, p) * seg.dt;
  out.delta_R = so3_exp_first_order(out.omega, seg.dt);
  return out;
}

namespace detail {

// Antisymmetric part of the measured increment, (dR32 - dR23, dR13 - dR31, dR21 - dR12).
inline Vec3 rotation_axis_terms(const Mat3& dR) {
  return Vec3(dR(2, 1) - dR(1, 2), dR(0, 2) - dR(2, 0), dR(1, 0) - dR(0, 1));
}

}  // namespace detail

/// Residuals measured-minus-predicted. The rotation residual
/// 1/2 tr[I - dR^T dR_hat] with dR_hat = I + hat(w) dt is evaluated as
/// 1/2 tr[I - dR^T] - dt/2 * w . axis(dR), which keeps the s-dependent part
/// free of the cancellation against tr(I).
inline SegmentResidual segment_residual(const WindowSegment& seg, const EfficiencyVector& s, const QuadParams& p) {
  const Wrench w = apply_efficiency(seg.f_cmd, s, allocation_matrix(p));
  const double dt = seg.dt;
  const QuadState& a = seg.state_t;
  const QuadState& b = seg.state_t1;

  // Thrust-independent parts first so they cancel exactly between nearby s.
  const Vec3 gravity_dv = Vec3(0.0, 0.0, p.gravity * dt);
  const Vec3 thrust_axis = a.R.col(2) * (w.thrust / p.mass);

  SegmentResidual r;
  r.r_v = ((b.v - a.v) - gravity_dv) + thrust_axis * dt;
  r.r_x = ((b.x - a.x - a.v * dt) - 0.5 * gravity_dv * dt) + thrust_axis * (0.5 * dt * dt);

  const Vec3 drift = a.omega + angular_acceleration(a.omega, Vec3::Zero(), p) * dt;
  const Vec3 torque_rate = w.moment.cwiseQuotient(p.inertia) * dt;
  r.r_omega = (b.omega - drift) - torque_rate;

  const Mat3 dR = a.R.transpose() * b.R;
  const Vec3 axis = detail::rotation_axis_terms(dR);
  const double static_part = 0.5 * ((1.0 - dR(0, 0)) + (1.0 - dR(1, 1)) + (1.0 - dR(2, 2)));
  const Vec3 omega_hat = drift + torque_rate;
  r.r_R = static_part - 0.5 * dt * omega_hat.dot(axis);
  return r;
}

/// Analytic d r / d s for one segment. Columns follow motors 1..4.
inline SegmentJacobian segment_jacobian(const WindowSegment& seg, const EfficiencyVector& /*s*/, const QuadParams& p) {
  const Mat4 lambda = allocation_matrix(p);
  const double dt = seg.dt;
  const Vec3 thrust_axis = seg.state_t.R.col(2);
  const Mat3 dR = seg.state_t.R.transpose() * seg.state_t1.R;
  const Vec3 axis = detail::rotation_axis_terms(dR);

  SegmentJacobian jac;
  for (int i = 0; i < 4; ++i) {
    const double f = seg.f_cmd.f(i);
    // d omega_hat / d eta_i
    const Vec3 domega = lambda.block<3, 1>(1, i).cwiseQuotient(p.inertia) * (f * dt);
    jac.block<3, 1>(0, i) = thrust_axis * (f * dt / p.mass);
    jac.block<3, 1>(3, i) = thrust_axis * (f * dt * dt / (2.0 * p.mass));
    jac.block<3, 1>(6, i) = -domega;
    jac(9, i) = -0.5 * dt * axis.dot(domega);
  }
  return jac;
}

struct StackedWindow {
  Eigen::VectorXd r;
  Eigen::MatrixXd J;  // rows = 10 n, cols = 4
};

/// Residuals and Jacobian of all segments in order, each scaled by 1/sqrt(n).
inline StackedWindow stack_window(std::span<const WindowSegment> segments, const EfficiencyVector& s,
                                  const QuadParams& p) {
  if (segments.empty()) {
    throw std::invalid_argument("stack_window: empty window");
  }
  const auto n = static_cast<Eigen::Index>(segments.size());
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  StackedWindow out{Eigen::VectorXd(kResidualsPerSegment * n), Eigen::MatrixXd(kResidualsPerSegment * n, 4)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& seg = segments[static_cast<std::size_t>(i)];
    out.r.segment<kResidualsPerSegment>(kResidualsPerSegment * i) = scale * segment_residual(seg, s, p).stacked();
    out.J.block<kResidualsPerSegment, 4>(kResidualsPerSegment * i, 0) = scale * segment_jacobian(seg, s, p);
  }
  return out;
}

}  // namespace quadeff
