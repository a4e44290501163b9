#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadeff/controller.hpp"
#include "quadeff/dynamics.hpp"
#include "quadeff/ekf_baseline.hpp"
#include "quadeff/irls_estimator.hpp"
#include "quadeff/random.hpp"

namespace quadeff {

enum class Trajectory { Circle, Hover };

struct FaultInterval {
  int motor = 0;  // zero-based
  double t_start = 0.0;
  double t_end = 0.0;
  double eta = 0.5;
};

/// Exponential efficiency loss driven by a battery voltage that falls
/// linearly from v_start to v_end over the run.
struct VoltageDegradation {
  double xi = 0.05;  // 1/V
  double v_start = 12.6;
  double v_end = 10.8;
};

struct MetricsConfig {
  double warmup = 1.0;            // s after the first estimate excluded from every metric
  double settle = 0.5;            // s after each truth jump excluded from RMSE and std
  double jump_threshold = 0.01;   // tick-to-tick truth change treated as a discontinuity
};

struct ScenarioSpec {
  std::string name = "scenario";
  double duration = 30.0;
  double dt = 0.004;
  Trajectory trajectory = Trajectory::Circle;
  QuadParams params;
  Gains gains;
  Vec4 eta0 = Vec4::Ones();
  std::optional<VoltageDegradation> degradation;
  std::vector<FaultInterval> faults;
  double sigma_f = 0.0;
  bool clipping = false;
  double f_min = 0.0;
  double f_max = 6.0;
  std::uint64_t seed = 0;
  EstimatorConfig estimator;
  EkfConfig ekf;
  MetricsConfig metrics;

  std::size_t steps() const { return static_cast<std::size_t>(std::llround(duration / dt)); }

  void validate() const {
    if (!(duration > 0.0 && dt > 0.0 && dt <= duration)) {
      throw std::invalid_argument("scenario: duration and dt must be positive with dt <= duration");
    }
    if (!(sigma_f >= 0.0)) {
      throw std::invalid_argument("scenario: sigma_f must be non-negative");
    }
    if (clipping && !(f_min <= f_max)) {
      throw std::invalid_argument("scenario: clipping requires f_min <= f_max");
    }
    for (const auto& f : faults) {
      if (f.motor < 0 || f.motor > 3) {
        throw std::invalid_argument("scenario: fault motor out of range");
      }
      if (!(f.t_start >= 0.0 && f.t_start < f.t_end && f.t_end <= duration)) {
        throw std::invalid_argument("scenario: fault interval must lie within the run");
      }
    }
    if (!(eta0.array() > 0.0).all()) {
      throw std::invalid_argument("scenario: initial efficiencies must be positive");
    }
    params.validate();
    gains.validate();
    estimator.validate();
    ekf.noise.validate();
  }
};

/// Ground-truth efficiency at time t: degradation profile with fault
/// overrides applied exactly on [t_start, t_end).
inline EfficiencyVector true_efficiency(const ScenarioSpec& spec, double t) {
  EfficiencyVector eta{spec.eta0};
  if (spec.degradation) {
    const auto& d = *spec.degradation;
    const double frac = std::clamp(t / spec.duration, 0.0, 1.0);
    const double dv = (d.v_end - d.v_start) * frac;
    eta.eta *= std::exp(d.xi * dv);
  }
  for (const auto& f : spec.faults) {
    if (t >= f.t_start && t < f.t_end) {
      eta.eta(f.motor) = f.eta;
    }
  }
  return eta;
}

inline DesiredState desired_at(const ScenarioSpec& spec, double t) {
  switch (spec.trajectory) {
    case Trajectory::Circle:
      return circle_trajectory(t);
    case Trajectory::Hover:
      return hover_trajectory(Vec3(0.0, 0.0, -1.0));
  }
  return circle_trajectory(t);
}

class NumericalAbort : public std::runtime_error {
 public:
  NumericalAbort(const std::string& what, std::size_t step) : std::runtime_error(what), step_(step) {}
  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// One row of the per-window weight log (final IRLS iteration).
struct WeightRow {
  std::size_t window = 0;
  double t = 0.0;
  std::size_t segment = 0;
  double weight = 0.0;
  double zscore = 0.0;
  bool rejected = false;
};

struct KktRow {
  std::size_t window = 0;
  int irls_iter = 0;
  IterationRecord record;
};

struct StepRecord {
  double t = 0.0;
  EfficiencyVector truth;
  QuadState state;
  MotorThrusts f_cmd;
  bool clipped = false;
};

struct RunTrace {
  std::vector<StepRecord> steps;
  std::vector<EstimateRecord> irls;
  std::vector<EfficiencyVector> irls_truth;  // truth of the last segment at each estimate
  std::vector<EkfRecord> ekf;
  std::vector<EfficiencyVector> ekf_truth;
  std::vector<WeightRow> weights;
  std::vector<KktRow> kkt;
};

struct RunOptions {
  bool irls = true;
  bool ekf = true;
  bool diagnostics = true;
  // Applied to each segment before the estimators see it (never to the plant).
  std::function<void(std::size_t index, WindowSegment&)> tamper;
};

/// Closed-loop run: controller -> allocation -> truth efficiency, thrust
/// noise and clipping -> plant. Both estimators consume the same segment
/// stream. Deterministic for a fixed seed.
inline RunTrace run_scenario(const ScenarioSpec& spec, const RunOptions& opts = {}) {
  spec.validate();
  const QuadParams& p = spec.params;
  const Mat4 lambda = allocation_matrix(p);
  NormalSource rng(spec.seed);

  QuadState state;
  {
    const DesiredState d0 = desired_at(spec, 0.0);
    state.x = d0.x_d;
    state.v = d0.v_d;
    state.R = desired_attitude(Vec3::Zero(), Vec3::Zero(), d0.a_d, d0.b1_d, p, spec.gains);
  }

  std::optional<OnlineEstimator> irls;
  std::optional<EkfEstimator> ekf;
  if (opts.irls) {
    irls.emplace(p, spec.estimator);
  }
  if (opts.ekf) {
    ekf.emplace(p, spec.ekf, spec.estimator.window, spec.estimator.stride);
  }

  RunTrace trace;
  const std::size_t n_steps = spec.steps();
  trace.steps.reserve(n_steps);
  std::size_t window_index = 0;

  for (std::size_t k = 0; k < n_steps; ++k) {
    const double t = static_cast<double>(k) * spec.dt;
    if (!state.all_finite()) {
      throw NumericalAbort("non-finite vehicle state", k);
    }
    ControlOutput ctl;
    try {
      ctl = control_wrench(state, desired_at(spec, t), p, spec.gains);
    } catch (const ControlError& e) {
      throw NumericalAbort(e.what(), k);
    }
    const MotorThrusts f_cmd = thrusts_from_wrench(ctl.wrench, lambda);
    const EfficiencyVector eta = true_efficiency(spec, t);

    MotorThrusts delivered = perturb_thrusts(f_cmd, spec.sigma_f, rng);
    bool clipped = false;
    if (spec.clipping) {
      const ClipResult c = clip_thrusts(delivered, spec.f_min, spec.f_max);
      delivered = c.thrusts;
      clipped = c.any();
    }
    const QuadState next = step(state, apply_efficiency(delivered, eta, lambda), p, spec.dt);
    if (!next.all_finite()) {
      throw NumericalAbort("non-finite vehicle state", k + 1);
    }
    trace.steps.push_back({t, eta, state, f_cmd, clipped});

    WindowSegment seg{state, next, f_cmd, spec.dt, t};
    if (opts.tamper) {
      opts.tamper(k, seg);
    }
    if (irls) {
      EstimateDiagnostics diag;
      if (auto rec = irls->push(seg, opts.diagnostics ? &diag : nullptr)) {
        trace.irls.push_back(*rec);
        trace.irls_truth.push_back(eta);
        if (opts.diagnostics) {
          for (std::size_t i = 0; i < diag.weights.w.size(); ++i) {
            trace.weights.push_back({window_index, rec->t, i, diag.weights.w[i], diag.zscores[i],
                                     static_cast<bool>(diag.weights.rejected[i])});
          }
          for (std::size_t j = 0; j < diag.solves.size(); ++j) {
            for (const auto& row : diag.solves[j].trace) {
              trace.kkt.push_back({window_index, static_cast<int>(j + 1), row});
            }
          }
        }
        ++window_index;
      }
    }
    if (ekf) {
      try {
        if (auto rec = ekf->push(seg)) {
          trace.ekf.push_back(*rec);
          trace.ekf_truth.push_back(eta);
        }
      } catch (const EkfError& e) {
        throw NumericalAbort(e.what(), k);
      }
    }
    state = next;
  }
  return trace;
}

struct MotorMetrics {
  double rmse = 0.0;
  double std = 0.0;
  double max_spike = 0.0;
};

struct MethodMetrics {
  std::string method;
  std::array<MotorMetrics, 4> motors{};

  /// Root of the mean squared per-motor RMSE.
  double pooled_rmse() const {
    double acc = 0.0;
    for (const auto& m : motors) {
      acc += m.rmse * m.rmse;
    }
    return std::sqrt(acc / 4.0);
  }
};

class MetricsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Error statistics of an estimate series against truth sampled at the same
/// times. Samples before `first_t + warmup` are ignored. Spikes include
/// truth transitions; RMSE and std skip `settle` seconds after each jump.
inline MethodMetrics compute_metrics(const std::string& method, const std::vector<double>& t,
                                     const std::vector<Vec4>& estimate, const std::vector<Vec4>& truth,
                                     const MetricsConfig& cfg) {
  if (t.size() != estimate.size() || t.size() != truth.size()) {
    throw MetricsError("compute_metrics: series lengths differ");
  }
  if (t.empty()) {
    throw MetricsError("compute_metrics: empty trace");
  }
  const double t_begin = t.front() + cfg.warmup;
  MethodMetrics out;
  out.method = method;
  for (int m = 0; m < 4; ++m) {
    double last_jump = -1e300;
    double sum = 0.0;
    double sum_sq = 0.0;
    std::size_t count = 0;
    double spike = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (i > 0 && std::abs(truth[i](m) - truth[i - 1](m)) > cfg.jump_threshold) {
        last_jump = t[i];
      }
      if (t[i] < t_begin) {
        continue;
      }
      const double err = estimate[i](m) - truth[i](m);
      spike = std::max(spike, std::abs(err));
      if (t[i] < last_jump + cfg.settle) {
        continue;
      }
      sum += err;
      sum_sq += err * err;
      ++count;
    }
    if (count == 0) {
      throw MetricsError("compute_metrics: no samples after the transient");
    }
    const double n = static_cast<double>(count);
    const double mean = sum / n;
    auto& mm = out.motors[static_cast<std::size_t>(m)];
    mm.rmse = std::sqrt(sum_sq / n);
    mm.std = std::sqrt(std::max(sum_sq / n - mean * mean, 0.0));
    mm.max_spike = spike;
  }
  return out;
}

inline MethodMetrics irls_metrics(const RunTrace& trace, const MetricsConfig& cfg) {
  std::vector<double> t;
  std::vector<Vec4> est;
  std::vector<Vec4> truth;
  for (std::size_t i = 0; i < trace.irls.size(); ++i) {
    t.push_back(trace.irls[i].t);
    est.push_back(trace.irls[i].s_hat.eta);
    truth.push_back(trace.irls_truth[i].eta);
  }
  return compute_metrics("irls", t, est, truth, cfg);
}

inline MethodMetrics ekf_metrics(const RunTrace& trace, const MetricsConfig& cfg) {
  std::vector<double> t;
  std::vector<Vec4> est;
  std::vector<Vec4> truth;
  for (std::size_t i = 0; i < trace.ekf.size(); ++i) {
    t.push_back(trace.ekf[i].t);
    est.push_back(trace.ekf[i].eta.eta);
    truth.push_back(trace.ekf_truth[i].eta);
  }
  return compute_metrics("ekf", t, est, truth, cfg);
}

struct Calibration {
  double q_eta = 0.0;
  double irls_rmse = 0.0;
  double ekf_rmse = 0.0;

  double ratio() const { return ekf_rmse / irls_rmse; }
};

/// Picks the EKF efficiency random-walk density whose pooled RMSE on `spec`
/// is closest (in log ratio) to the window estimator's, scanning a log grid
/// and refining by bisection on log(q).
inline Calibration calibrate_ekf(ScenarioSpec spec, double q_lo = 1e-8, double q_hi = 1.0, int refine = 12) {
  RunOptions irls_only{true, false, false, {}};
  const double target = irls_metrics(run_scenario(spec, irls_only), spec.metrics).pooled_rmse();

  RunOptions ekf_only{false, true, false, {}};
  const auto ekf_rmse = [&](double q) {
    spec.ekf.noise.q_eta = q;
    return ekf_metrics(run_scenario(spec, ekf_only), spec.metrics).pooled_rmse();
  };

  std::vector<double> grid;
  for (double q = q_lo; q <= q_hi * 1.0000001; q *= 10.0) {
    grid.push_back(q);
  }
  std::vector<double> err(grid.size());
  Calibration best{grid.front(), target, ekf_rmse(grid.front())};
  err[0] = std::log(best.ekf_rmse / target);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    const double rmse = ekf_rmse(grid[i]);
    err[i] = std::log(rmse / target);
    if (std::abs(err[i]) < std::abs(std::log(best.ratio()))) {
      best = {grid[i], target, rmse};
    }
  }
  // Refine inside the first bracket where the log-ratio changes sign.
  for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
    if ((err[i] < 0.0) == (err[i + 1] < 0.0)) {
      continue;
    }
    double lo = std::log(grid[i]);
    double hi = std::log(grid[i + 1]);
    const bool rising = err[i] < err[i + 1];
    for (int r = 0; r < refine; ++r) {
      const double mid = 0.5 * (lo + hi);
      const double rmse = ekf_rmse(std::exp(mid));
      const double e = std::log(rmse / target);
      if (std::abs(e) < std::abs(std::log(best.ratio()))) {
        best = {std::exp(mid), target, rmse};
      }
      if ((e < 0.0) == rising) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    break;
  }
  return best;
}

}  // namespace quadeff
