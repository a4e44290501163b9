#pragma once

#include <algorithm>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "quadeff/dynamics.hpp"
#include "quadeff/residuals.hpp"
#include "quadeff/se3.hpp"

namespace quadeff {

// Filter baseline: the efficiencies are appended to the kinematic state as
// random walks and estimated jointly with an extended Kalman filter.
//
// State layout: [x(3) v(3) omega(3) vec(R)(9, column-major) eta(4)].

inline constexpr int kEkfStateDim = 22;
inline constexpr int kEkfMeasDim = 18;

using EkfVector = Eigen::Matrix<double, kEkfStateDim, 1>;
using EkfMatrix = Eigen::Matrix<double, kEkfStateDim, kEkfStateDim>;
using EkfMeasVector = Eigen::Matrix<double, kEkfMeasDim, 1>;
using EkfMeasMatrix = Eigen::Matrix<double, kEkfMeasDim, kEkfMeasDim>;

namespace ekf_index {
inline constexpr int x = 0;
inline constexpr int v = 3;
inline constexpr int omega = 6;
inline constexpr int rot = 9;
inline constexpr int eta = 18;
}  // namespace ekf_index

struct EkfState {
  EkfVector mean = EkfVector::Zero();
  EkfMatrix cov = EkfMatrix::Identity();

  Vec4 eta() const { return mean.segment<4>(ekf_index::eta); }
};

/// Continuous-time process noise densities (variance per second) and the
/// measurement noise standard deviation.
struct EkfNoise {
  double q_x = 1e-10;
  double q_v = 1e-4;
  double q_omega = 1e-2;
  double q_rot = 1e-10;
  double q_eta = 1e-4;
  double meas_sigma = 1e-3;

  EkfMatrix process() const {
    EkfVector d = EkfVector::Zero();
    d.segment<3>(ekf_index::x).setConstant(q_x);
    d.segment<3>(ekf_index::v).setConstant(q_v);
    d.segment<3>(ekf_index::omega).setConstant(q_omega);
    d.segment<9>(ekf_index::rot).setConstant(q_rot);
    d.segment<4>(ekf_index::eta).setConstant(q_eta);
    return d.asDiagonal();
  }
  EkfMeasMatrix measurement() const {
    return EkfMeasMatrix::Identity() * (meas_sigma * meas_sigma);
  }
  void validate() const {
    if (!(q_x >= 0.0 && q_v >= 0.0 && q_omega >= 0.0 && q_rot >= 0.0 && q_eta >= 0.0 && meas_sigma > 0.0)) {
      throw std::invalid_argument("EkfNoise: variances must be non-negative and meas_sigma positive");
    }
  }
};

struct EkfConfig {
  EkfNoise noise;
  double initial_eta = 0.5;
  double initial_eta_var = 0.1;
  double initial_state_var = 1e-6;
  double report_min = 0.0;
  double report_max = 1.2;
};

class EkfError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline EkfMeasVector ekf_measurement(const QuadState& s) {
  EkfMeasVector z;
  z << s.x, s.v, s.omega, s.R.reshaped();
  return z;
}

/// Discrete transition shared with the window predictor: Euler translation
/// and rate, first-order attitude increment. The attitude used for the
/// thrust direction is the nearest rotation to the filtered vec(R).
inline EkfVector ekf_transition(const EkfVector& m, const MotorThrusts& f_cmd, const QuadParams& p, double dt) {
  const Vec3 x = m.segment<3>(ekf_index::x);
  const Vec3 v = m.segment<3>(ekf_index::v);
  const Vec3 omega = m.segment<3>(ekf_index::omega);
  const Mat3 r_raw = m.segment<9>(ekf_index::rot).reshaped(3, 3);
  const EfficiencyVector eta{m.segment<4>(ekf_index::eta)};

  const Wrench w = apply_efficiency(f_cmd, eta, allocation_matrix(p));
  const Vec3 acc = linear_acceleration(orthonormalize(r_raw), w.thrust, p);
  const Vec3 omega_next = omega + angular_acceleration(omega, w.moment, p) * dt;
  const Mat3 r_next = r_raw * so3_exp_first_order(omega_next, dt);

  EkfVector out = m;
  out.segment<3>(ekf_index::x) = x + v * dt + 0.5 * acc * dt * dt;
  out.segment<3>(ekf_index::v) = v + acc * dt;
  out.segment<3>(ekf_index::omega) = omega_next;
  out.segment<9>(ekf_index::rot) = r_next.reshaped();
  return out;
}

/// Central-difference Jacobian of the transition, step h.
inline EkfMatrix ekf_transition_jacobian(const EkfVector& m, const MotorThrusts& f_cmd, const QuadParams& p,
                                         double dt, double h = 1e-6) {
  EkfMatrix F;
  for (int j = 0; j < kEkfStateDim; ++j) {
    EkfVector plus = m;
    EkfVector minus = m;
    plus(j) += h;
    minus(j) -= h;
    F.col(j) = (ekf_transition(plus, f_cmd, p, dt) - ekf_transition(minus, f_cmd, p, dt)) / (2.0 * h);
  }
  return F;
}

inline void symmetrize(EkfMatrix& m) { m = 0.5 * (m + m.transpose()).eval(); }

inline EkfState ekf_predict(const EkfState& state, const MotorThrusts& f_cmd, const QuadParams& p,
                            const EkfNoise& noise, double dt) {
  const EkfMatrix F = ekf_transition_jacobian(state.mean, f_cmd, p, dt);
  EkfState out;
  out.mean = ekf_transition(state.mean, f_cmd, p, dt);
  out.cov = F * state.cov * F.transpose() + noise.process() * dt;
  symmetrize(out.cov);
  return out;
}

/// Linear full-state update (H selects the first 18 states), Joseph form.
inline EkfState ekf_update(const EkfState& state, const EkfMeasVector& z, const EkfMeasMatrix& meas_cov) {
  using HMatrix = Eigen::Matrix<double, kEkfMeasDim, kEkfStateDim>;
  HMatrix H = HMatrix::Zero();
  H.leftCols<kEkfMeasDim>().setIdentity();

  const EkfMeasMatrix S = H * state.cov * H.transpose() + meas_cov;
  Eigen::LLT<EkfMeasMatrix> llt(S);
  if (llt.info() != Eigen::Success) {
    throw EkfError("ekf_update: innovation covariance is not positive definite");
  }
  const Eigen::Matrix<double, kEkfStateDim, kEkfMeasDim> K = llt.solve(H * state.cov).transpose();
  const EkfMeasVector innovation = z - H * state.mean;

  EkfState out;
  out.mean = state.mean + K * innovation;
  const EkfMatrix ikh = EkfMatrix::Identity() - K * H;
  out.cov = ikh * state.cov * ikh.transpose() + K * meas_cov * K.transpose();
  symmetrize(out.cov);
  return out;
}

struct EkfRecord {
  double t = 0.0;
  EfficiencyVector eta;  // clamped to the reporting range
  EfficiencyVector eta_raw;
};

/// Streaming filter: predict with each segment's commanded thrusts, update
/// with its end state, and report on the same cadence as the window
/// estimator (after `window` segments, then every `stride`).
class EkfEstimator {
 public:
  EkfEstimator(const QuadParams& params, const EkfConfig& cfg, std::size_t window, std::size_t stride)
      : params_(params), cfg_(cfg), window_(window), stride_(stride) {
    cfg_.noise.validate();
    if (window == 0 || stride == 0) {
      throw std::invalid_argument("EkfEstimator: window and stride must be positive");
    }
  }

  std::optional<EkfRecord> push(const WindowSegment& seg) {
    if (!initialized_) {
      state_.mean << ekf_measurement(seg.state_t), Vec4::Constant(cfg_.initial_eta);
      EkfVector var = EkfVector::Constant(cfg_.initial_state_var);
      var.segment<4>(ekf_index::eta).setConstant(cfg_.initial_eta_var);
      state_.cov = var.asDiagonal();
      initialized_ = true;
    }
    state_ = ekf_predict(state_, seg.f_cmd, params_, cfg_.noise, seg.dt);
    state_ = ekf_update(state_, ekf_measurement(seg.state_t1), cfg_.noise.measurement());
    ++pushed_;
    if (pushed_ < window_ || (pushed_ - window_) % stride_ != 0) {
      return std::nullopt;
    }
    EkfRecord rec;
    rec.t = seg.t + seg.dt;
    rec.eta_raw = EfficiencyVector{state_.eta()};
    rec.eta = EfficiencyVector{state_.eta().cwiseMax(cfg_.report_min).cwiseMin(cfg_.report_max)};
    return rec;
  }

  const EkfState& state() const { return state_; }

 private:
  QuadParams params_;
  EkfConfig cfg_;
  std::size_t window_;
  std::size_t stride_;
  EkfState state_;
  bool initialized_ = false;
  std::size_t pushed_ = 0;
};

inline std::vector<EkfRecord> ekf_run(std::span<const WindowSegment> stream, const QuadParams& params,
                                      const EkfConfig& cfg, std::size_t window, std::size_t stride) {
  EkfEstimator ekf(params, cfg, window, stride);
  std::vector<EkfRecord> out;
  for (const auto& seg : stream) {
    if (auto rec = ekf.push(seg)) {
      out.push_back(*rec);
    }
  }
  return out;
}

}  // namespace quadeff
