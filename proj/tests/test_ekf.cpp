#include <gtest/gtest.h>

#include <random>

#include "quadeff/ekf_baseline.hpp"
#include "test_support.hpp"

using namespace quadeff;

namespace {

EkfState diagonal_state(double var) {
  EkfState st;
  st.mean.setZero();
  st.mean.segment<9>(ekf_index::rot) = Mat3::Identity().reshaped();
  st.mean.segment<4>(ekf_index::eta).setConstant(0.5);
  st.cov = EkfMatrix::Identity() * var;
  return st;
}

bool is_psd(const EkfMatrix& m) {
  Eigen::SelfAdjointEigenSolver<EkfMatrix> es(m);
  return es.eigenvalues().minCoeff() >= -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff());
}

}  // namespace

TEST(Ekf, ScalarGainOnUncorrelatedState) {
  EkfState st = diagonal_state(4.0);
  const EkfMeasMatrix r = EkfMeasMatrix::Identity() * 1.0;
  EkfMeasVector z = st.mean.head<18>();
  z(3) += 1.0;
  const EkfState up = ekf_update(st, z, r);
  EXPECT_NEAR(up.mean(3), st.mean(3) + 4.0 / 5.0, 1e-14);
  EXPECT_NEAR(up.cov(3, 3), 4.0 * 1.0 / 5.0, 1e-14);
  EXPECT_EQ(up.eta(), st.eta());
  EXPECT_EQ(up.cov(20, 20), 4.0);
}

TEST(Ekf, ZeroInnovationKeepsMean) {
  EkfState st = diagonal_state(0.1);
  const EkfState up = ekf_update(st, st.mean.head<18>(), EkfMeasMatrix::Identity() * 1e-6);
  EXPECT_LT((up.mean - st.mean).norm(), 1e-15);
  EXPECT_TRUE(is_psd(up.cov));
  EXPECT_LE(up.cov.trace(), st.cov.trace());
}

TEST(Ekf, HugeMeasurementNoiseIgnoresData) {
  EkfState st = diagonal_state(0.1);
  EkfMeasVector z = st.mean.head<18>() + EkfMeasVector::Ones();
  const EkfState up = ekf_update(st, z, EkfMeasMatrix::Identity() * 1e12);
  EXPECT_LT((up.mean - st.mean).norm(), 1e-11);
}

TEST(Ekf, TransitionMatchesWindowPredictor) {
  QuadParams p;
  std::mt19937_64 g(1);
  const Vec4 eta(0.9, 0.8, 0.95, 1.0);
  for (int i = 0; i < 20; ++i) {
    const WindowSegment seg = test::random_segment(g, eta, p);
    EkfVector m;
    m << ekf_measurement(seg.state_t), eta;
    const EkfVector n = ekf_transition(m, seg.f_cmd, p, seg.dt);
    const Prediction pr = predict_next(seg, EfficiencyVector{eta}, p);
    EXPECT_LT((n.segment<3>(ekf_index::x) - pr.x).norm(), 1e-14);
    EXPECT_LT((n.segment<3>(ekf_index::v) - pr.v).norm(), 1e-14);
    EXPECT_LT((n.segment<3>(ekf_index::omega) - pr.omega).norm(), 1e-14);
    const Mat3 r_next = n.segment<9>(ekf_index::rot).reshaped(3, 3);
    EXPECT_LT((r_next - seg.state_t.R * pr.delta_R).norm(), 1e-14);
    EXPECT_EQ(n.segment<4>(ekf_index::eta), eta);
  }
}

TEST(Ekf, JacobianKnownBlocks) {
  QuadParams p;
  EkfVector m = diagonal_state(1.0).mean;
  const double dt = 0.004;
  const EkfMatrix f = ekf_transition_jacobian(m, MotorThrusts{Vec4::Constant(2.45)}, p, dt);
  EXPECT_LT((f.block<3, 3>(ekf_index::x, ekf_index::v) - Mat3::Identity() * dt).norm(), 1e-9);
  EXPECT_LT((f.block<4, 4>(ekf_index::eta, ekf_index::eta) - Mat4::Identity()).norm(), 1e-9);
  // d v_z / d eta_i = -f_i dt / m at level attitude.
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(f(ekf_index::v + 2, ekf_index::eta + i), -2.45 * dt / p.mass, 1e-8);
  }
}

TEST(Ekf, NoiseMatrices) {
  EkfNoise n;
  const EkfMatrix q = n.process();
  EXPECT_EQ(q(ekf_index::eta, ekf_index::eta), n.q_eta);
  EXPECT_EQ(q(ekf_index::v, ekf_index::v), n.q_v);
  EXPECT_EQ(n.measurement()(0, 0), n.meas_sigma * n.meas_sigma);
  n.q_eta = -1.0;
  EXPECT_THROW(n.validate(), std::invalid_argument);
}

TEST(Ekf, CovarianceStaysPositiveSemidefinite) {
  QuadParams p;
  std::mt19937_64 g(2);
  const Vec4 eta(0.9, 0.8, 0.95, 1.0);
  EkfConfig cfg;
  EkfEstimator ekf(p, cfg, 50, 5);
  QuadState s;
  s.x = Vec3(0, 0, -1);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Mat4 l = allocation_matrix(p);
  const int steps = 20000;
  for (int k = 0; k < steps; ++k) {
    WindowSegment seg;
    seg.dt = 0.004;
    seg.t = k * seg.dt;
    seg.state_t = s;
    seg.f_cmd.f = Vec4::Constant(2.6) + 0.05 * Vec4(u(g), u(g), u(g), u(g));
    // Keep the attitude bounded with a crude rate damper.
    seg.f_cmd.f += thrusts_from_wrench(Wrench{0.0, -0.02 * s.omega - 0.1 * vee(s.R - s.R.transpose())}, l).f;
    seg.state_t1 = step(s, apply_efficiency(seg.f_cmd, EfficiencyVector{eta}, l), p, seg.dt);
    s = seg.state_t1;
    ekf.push(seg);
    if (k % 2000 == 0) {
      ASSERT_TRUE(is_psd(ekf.state().cov));
    }
  }
  EXPECT_TRUE(is_psd(ekf.state().cov));
  EXPECT_TRUE(ekf.state().cov.allFinite());
}

TEST(Ekf, ConvergesOnNoiseFreeStream) {
  QuadParams p;
  std::mt19937_64 g(3);
  const Vec4 eta(0.9, 0.8, 0.95, 1.0);
  const auto segs = test::random_window(g, eta, p, 400);
  // Segments are independent draws, so chain them into a stream of
  // measurements: each update uses its own start state as the prior mean.
  EkfConfig cfg;
  EkfState st;
  st.mean << ekf_measurement(segs[0].state_t), Vec4::Constant(cfg.initial_eta);
  EkfVector var = EkfVector::Constant(cfg.initial_state_var);
  var.segment<4>(ekf_index::eta).setConstant(cfg.initial_eta_var);
  st.cov = var.asDiagonal();
  for (const auto& seg : segs) {
    st.mean.head<18>() = ekf_measurement(seg.state_t);
    st = ekf_predict(st, seg.f_cmd, p, cfg.noise, seg.dt);
    st = ekf_update(st, ekf_measurement(seg.state_t1), cfg.noise.measurement());
  }
  EXPECT_LT((st.eta() - eta).cwiseAbs().maxCoeff(), 1e-2);
}

TEST(Ekf, ReportCadenceMatchesWindowEstimator) {
  QuadParams p;
  std::mt19937_64 g(4);
  const auto segs = test::random_window(g, Vec4::Ones(), p, 30);
  const auto recs = ekf_run(segs, p, EkfConfig{}, 10, 5);
  ASSERT_EQ(recs.size(), 5u);
  EXPECT_NEAR(recs[0].t, segs[9].t + segs[9].dt, 1e-15);
  for (const auto& r : recs) {
    EXPECT_TRUE((r.eta.eta.array() >= 0.0).all() && (r.eta.eta.array() <= 1.2).all());
  }
}
