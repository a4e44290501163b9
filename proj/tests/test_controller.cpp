#include <gtest/gtest.h>

#include "quadeff/controller.hpp"

using namespace quadeff;

TEST(Controller, HoverDesiredAttitudeIsIdentity) {
  QuadParams p;
  Gains k;
  const Mat3 r = desired_attitude(Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::UnitX(), p, k);
  EXPECT_LT((r.col(2) - Vec3::UnitZ()).norm(), 1e-15);
  EXPECT_LT((r - Mat3::Identity()).norm(), 1e-15);
}

TEST(Controller, DesiredAttitudeIsRotation) {
  QuadParams p;
  Gains k;
  const Mat3 r = desired_attitude(Vec3(0.3, -0.5, 0.2), Vec3(0.1, 0.4, -0.3), Vec3(1, 2, -1),
                                  Vec3(1, 1, 0).normalized(), p, k);
  EXPECT_LT(orthonormality_error(r), 1e-12);
  EXPECT_NEAR(r.determinant(), 1.0, 1e-12);
}

TEST(Controller, B3InvariantToThrustScale) {
  QuadParams p;
  Gains k;
  const Vec3 ex(0.2, 0.1, -0.3);
  const Vec3 ev(0.1, 0.0, 0.2);
  const Mat3 a = desired_attitude(ex, ev, Vec3::Zero(), Vec3::UnitX(), p, k);
  Gains k2 = k;
  k2.k_x *= 3.0;
  k2.k_v *= 3.0;
  QuadParams p2 = p;
  p2.mass *= 3.0;
  const Mat3 b = desired_attitude(ex, ev, Vec3::Zero(), Vec3::UnitX(), p2, k2);
  EXPECT_LT((a - b).norm(), 1e-12);
}

TEST(Controller, DegenerateThrustThrows) {
  QuadParams p;
  Gains k;
  // m a_d cancels gravity exactly.
  EXPECT_THROW(desired_attitude(Vec3::Zero(), Vec3::Zero(), Vec3(0, 0, p.gravity), Vec3::UnitX(), p, k),
               ControlError);
  EXPECT_THROW(desired_attitude(Vec3::Zero(), Vec3::Zero(), Vec3::Zero(), Vec3::UnitZ(), p, k), ControlError);
}

TEST(Controller, HoverWrenchBalancesGravity) {
  QuadParams p;
  Gains k;
  QuadState s;
  s.x = Vec3(0, 0, -1);
  const ControlOutput out = control_wrench(s, hover_trajectory(Vec3(0, 0, -1)), p, k);
  EXPECT_NEAR(out.wrench.thrust, p.mass * p.gravity, 1e-12);
  EXPECT_LT(out.wrench.moment.norm(), 1e-15);
}

TEST(Controller, NonOrthonormalInputThrows) {
  QuadState s;
  s.R(0, 0) = 1.1;
  EXPECT_THROW(tracking_errors(s, DesiredState{}, Mat3::Identity()), ControlError);
}

TEST(Controller, CircleDerivativesMatchFiniteDifferences) {
  for (double t : {0.3, 2.7, 7.1}) {
    const double h = 1e-5;
    const DesiredState a = circle_trajectory(t - h);
    const DesiredState b = circle_trajectory(t + h);
    const DesiredState c = circle_trajectory(t);
    EXPECT_LT(((b.x_d - a.x_d) / (2 * h) - c.v_d).norm(), 1e-8);
    EXPECT_LT(((b.v_d - a.v_d) / (2 * h) - c.a_d).norm(), 1e-8);
    EXPECT_NEAR(c.x_d.head<2>().norm(), 3.0, 1e-12);
    EXPECT_EQ(c.x_d.z(), -1.0);
  }
  EXPECT_THROW(circle_trajectory(-1.0), std::invalid_argument);
}

namespace {

double closed_loop_error(QuadState s, double t_end, bool circle) {
  QuadParams p;
  Gains k;
  const double dt = 0.004;
  const Mat4 l = allocation_matrix(p);
  double t = 0.0;
  DesiredState d;
  for (; t < t_end - 1e-12; t += dt) {
    d = circle ? circle_trajectory(t) : hover_trajectory(Vec3(0, 0, -1));
    const ControlOutput out = control_wrench(s, d, p, k);
    const MotorThrusts f = thrusts_from_wrench(out.wrench, l);
    s = step(s, apply_efficiency(f, EfficiencyVector{}, l), p, dt);
  }
  d = circle ? circle_trajectory(t) : hover_trajectory(Vec3(0, 0, -1));
  return (s.x - d.x_d).norm();
}

}  // namespace

TEST(Controller, RecoversFromHoverOffset) {
  QuadState s;
  s.x = Vec3(0.5, -0.3, -0.6);
  s.R = so3_exp(Vec3(0.1, -0.1, 0.3));
  EXPECT_LT(closed_loop_error(s, 3.0, false), 0.05);
}

TEST(Controller, TracksCircle) {
  QuadParams p;
  Gains k;
  const DesiredState d0 = circle_trajectory(0.0);
  QuadState s;
  s.x = d0.x_d + Vec3(0.2, 0.2, 0.1);
  s.v = d0.v_d;
  s.R = desired_attitude(Vec3::Zero(), Vec3::Zero(), d0.a_d, d0.b1_d, p, k);
  EXPECT_LT(closed_loop_error(s, 10.0, true), 0.05);
}
