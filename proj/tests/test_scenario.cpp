#include <gtest/gtest.h>

#include <filesystem>

#include "quadeff/csv.hpp"
#include "quadeff/scenario.hpp"

using namespace quadeff;
namespace fs = std::filesystem;

namespace {

ScenarioSpec short_spec(double duration = 2.0) {
  ScenarioSpec s;
  s.duration = duration;
  s.seed = 7;
  s.sigma_f = 0.07;
  s.estimator.window = 20;
  return s;
}

fs::path temp_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("quadeff_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST(Scenario, InitialEfficiency) {
  ScenarioSpec s;
  s.eta0 = Vec4(1.0, 0.95, 0.9, 1.0);
  EXPECT_EQ(true_efficiency(s, 0.0).eta, s.eta0);
  s.degradation = VoltageDegradation{};
  EXPECT_EQ(true_efficiency(s, 0.0).eta, s.eta0);
}

TEST(Scenario, VoltageDegradationFormula) {
  ScenarioSpec s;
  s.duration = 30.0;
  s.degradation = VoltageDegradation{0.05, 12.6, 10.6};
  const Vec4 end = true_efficiency(s, 30.0).eta;
  EXPECT_NEAR(end(0), std::exp(-0.1), 1e-15);
  EXPECT_NEAR(std::exp(-0.1), 0.9048, 1e-4);
  const Vec4 mid = true_efficiency(s, 15.0).eta;
  EXPECT_NEAR(mid(2), std::exp(-0.05), 1e-15);
}

TEST(Scenario, FaultOverrideIsHalfOpen) {
  ScenarioSpec s;
  s.faults = {{1, 10.0, 13.0, 0.5}};
  EXPECT_EQ(true_efficiency(s, 9.999).eta(1), 1.0);
  EXPECT_EQ(true_efficiency(s, 10.0).eta(1), 0.5);
  EXPECT_EQ(true_efficiency(s, 12.999).eta(1), 0.5);
  EXPECT_EQ(true_efficiency(s, 13.0).eta(1), 1.0);
  EXPECT_EQ(true_efficiency(s, 11.0).eta(0), 1.0);
  s.degradation = VoltageDegradation{};
  EXPECT_EQ(true_efficiency(s, 11.0).eta(1), 0.5);
}

TEST(Scenario, ValidationRejectsBadFaults) {
  ScenarioSpec s;
  s.faults = {{0, 10.0, 40.0, 0.5}};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.faults = {{5, 1.0, 2.0, 0.5}};
  EXPECT_THROW(s.validate(), std::invalid_argument);
  s.faults.clear();
  s.sigma_f = -1.0;
  EXPECT_THROW(s.validate(), std::invalid_argument);
}

TEST(Scenario, MetricsClosedForms) {
  MetricsConfig cfg;
  cfg.warmup = 0.0;
  std::vector<double> t;
  std::vector<Vec4> truth;
  std::vector<Vec4> est;
  for (int i = 0; i < 100; ++i) {
    t.push_back(0.1 * i);
    truth.push_back(Vec4::Constant(0.9));
    est.push_back(Vec4(0.9, 0.95, 0.9, 0.9));
  }
  est[40](2) = 1.2;
  const MethodMetrics m = compute_metrics("x", t, est, truth, cfg);
  EXPECT_EQ(m.motors[0].rmse, 0.0);
  EXPECT_EQ(m.motors[0].std, 0.0);
  EXPECT_EQ(m.motors[0].max_spike, 0.0);
  EXPECT_NEAR(m.motors[1].rmse, 0.05, 1e-12);
  EXPECT_NEAR(m.motors[1].std, 0.0, 1e-7);
  EXPECT_NEAR(m.motors[1].max_spike, 0.05, 1e-12);
  EXPECT_NEAR(m.motors[2].max_spike, 0.3, 1e-12);
}

TEST(Scenario, MetricsSkipSettlingForRmseOnly) {
  MetricsConfig cfg;
  cfg.warmup = 0.0;
  cfg.settle = 0.5;
  std::vector<double> t;
  std::vector<Vec4> truth;
  std::vector<Vec4> est;
  for (int i = 0; i < 100; ++i) {
    t.push_back(0.1 * i);
    truth.push_back(Vec4::Constant(i < 50 ? 1.0 : 0.5));
    est.push_back(Vec4::Constant(i < 53 ? 1.0 : 0.5));
  }
  const MethodMetrics m = compute_metrics("x", t, est, truth, cfg);
  EXPECT_EQ(m.motors[0].rmse, 0.0);
  EXPECT_NEAR(m.motors[0].max_spike, 0.5, 1e-15);
}

TEST(Scenario, MetricsErrors) {
  MetricsConfig cfg;
  EXPECT_THROW(compute_metrics("x", {}, {}, {}, cfg), MetricsError);
  EXPECT_THROW(compute_metrics("x", {0.0}, {Vec4::Ones()}, {}, cfg), MetricsError);
  EXPECT_THROW(compute_metrics("x", {0.0}, {Vec4::Ones()}, {Vec4::Ones()}, cfg), MetricsError);
}

TEST(Scenario, RunIsTimeAligned) {
  const ScenarioSpec s = short_spec();
  const RunTrace tr = run_scenario(s);
  EXPECT_EQ(tr.steps.size(), s.steps());
  EXPECT_EQ(tr.irls.size(), tr.ekf.size());
  EXPECT_EQ(tr.irls.size(), tr.irls_truth.size());
  for (std::size_t i = 0; i < tr.irls.size(); ++i) {
    EXPECT_DOUBLE_EQ(tr.irls[i].t, tr.ekf[i].t);
  }
  EXPECT_EQ(tr.weights.size(), tr.irls.size() * s.estimator.window);
}

TEST(Scenario, NoiseFreeNominalIsFlat) {
  ScenarioSpec s = short_spec(3.0);
  s.sigma_f = 0.0;
  const RunTrace tr = run_scenario(s);
  for (const auto& r : tr.irls) {
    EXPECT_LT((r.s_hat.eta - Vec4::Ones()).cwiseAbs().maxCoeff(), 1e-4);
  }
  EXPECT_LT((tr.ekf.back().eta.eta - Vec4::Ones()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(Scenario, SameSeedSameTrace) {
  const ScenarioSpec s = short_spec();
  const RunTrace a = run_scenario(s);
  const RunTrace b = run_scenario(s);
  ASSERT_EQ(a.irls.size(), b.irls.size());
  for (std::size_t i = 0; i < a.irls.size(); ++i) {
    EXPECT_EQ(a.irls[i].s_hat.eta, b.irls[i].s_hat.eta);
    EXPECT_EQ(a.ekf[i].eta.eta, b.ekf[i].eta.eta);
  }
  ScenarioSpec other = s;
  other.seed = 8;
  EXPECT_NE(run_scenario(other).irls.back().s_hat.eta, a.irls.back().s_hat.eta);
}

TEST(Scenario, TamperDoesNotTouchPlant) {
  const ScenarioSpec s = short_spec();
  RunOptions opts;
  opts.tamper = [](std::size_t, WindowSegment& seg) { seg.state_t1.v += Vec3::Constant(1.0); };
  const RunTrace a = run_scenario(s);
  const RunTrace b = run_scenario(s, opts);
  EXPECT_EQ(a.steps.back().state.x, b.steps.back().state.x);
}

TEST(Scenario, MetricsSurviveCsvRoundTrip) {
  const ScenarioSpec s = short_spec(3.0);
  const RunTrace tr = run_scenario(s);
  const fs::path dir = temp_dir("roundtrip");
  write_estimates(dir / "estimates.csv", tr.irls);
  const CsvTable t = read_csv(dir / "estimates.csv");
  ASSERT_EQ(t.rows.size(), tr.irls.size());
  std::vector<double> times;
  std::vector<Vec4> est;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    times.push_back(t.number(i, "t"));
    est.push_back(Vec4(t.number(i, "eta1"), t.number(i, "eta2"), t.number(i, "eta3"), t.number(i, "eta4")));
    EXPECT_EQ(est.back(), tr.irls[i].s_hat.eta);
  }
  std::vector<Vec4> truth;
  for (const auto& e : tr.irls_truth) truth.push_back(e.eta);
  const MethodMetrics from_csv = compute_metrics("irls", times, est, truth, s.metrics);
  const MethodMetrics direct = irls_metrics(tr, s.metrics);
  for (int m = 0; m < 4; ++m) {
    EXPECT_NEAR(from_csv.motors[m].rmse, direct.motors[m].rmse, 1e-12);
    EXPECT_NEAR(from_csv.motors[m].max_spike, direct.motors[m].max_spike, 1e-12);
  }
}

TEST(Scenario, NonFiniteStateAborts) {
  ScenarioSpec s = short_spec();
  s.sigma_f = 400.0;
  RunOptions opts{false, false, false, {}};
  EXPECT_THROW(run_scenario(s, opts), NumericalAbort);
}
