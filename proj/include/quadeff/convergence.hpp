#pragma once

#include <limits>
#include <vector>

#include "quadeff/scenario.hpp"

namespace quadeff {

/// One Newton iterate of the single-window convergence experiment. The first
/// row (irls_iter = newton_iter = 0) is the initial guess.
struct ConvergenceRow {
  int irls_iter = 0;
  int newton_iter = 0;
  Vec4 s = Vec4::Zero();
  double r_dual_norm = 0.0;
  double r_cent_norm = 0.0;
  double gap = 0.0;
};

struct ConvergenceResult {
  EstimateRecord estimate;
  EfficiencyVector truth;
  std::vector<ConvergenceRow> rows;
  std::vector<KktRow> kkt;
};

/// Simulates until the first window is full, then runs the estimator on it
/// from the configured initial guess (also used as the smoothness anchor).
inline ConvergenceResult run_convergence(const ScenarioSpec& spec) {
  ScenarioSpec short_spec = spec;
  const std::size_t n = spec.estimator.window;
  short_spec.duration = static_cast<double>(n) * spec.dt;
  short_spec.faults.clear();
  for (const auto& f : spec.faults) {
    if (f.t_start < short_spec.duration) {
      FaultInterval g = f;
      g.t_end = std::min(g.t_end, short_spec.duration);
      short_spec.faults.push_back(g);
    }
  }
  if (short_spec.steps() < n) {
    short_spec.duration = static_cast<double>(n + 1) * spec.dt;
  }

  SlidingWindow window(n);
  RunOptions opts{false, false, false, {}};
  opts.tamper = [&](std::size_t, WindowSegment& seg) {
    if (!window.full()) {
      window.push_segment(seg);
    }
  };
  const RunTrace trace = run_scenario(short_spec, opts);
  if (!window.full()) {
    throw std::logic_error("run_convergence: window did not fill");
  }

  ConvergenceResult out;
  const EfficiencyVector guess = EfficiencyVector::constant(spec.estimator.initial_guess);
  EstimateDiagnostics diag;
  out.estimate = estimate(window, guess, spec.params, spec.estimator, &diag);
  out.truth = trace.steps.at(n - 1).truth;

  // Residual norms are not defined before the first weighting; only the gap is.
  const double nan = std::numeric_limits<double>::quiet_NaN();
  out.rows.push_back({0, 0, pull_inside(guess.eta, spec.estimator.solver), nan, nan,
                      surrogate_gap(pull_inside(guess.eta, spec.estimator.solver), Dual::Ones(), spec.estimator.solver)});
  for (std::size_t j = 0; j < diag.solves.size(); ++j) {
    for (const auto& rec : diag.solves[j].trace) {
      const int k = static_cast<int>(j + 1);
      out.rows.push_back({k, rec.iteration, rec.s, rec.r_dual_norm, rec.r_cent_norm, rec.gap});
      out.kkt.push_back({0, k, rec});
    }
  }
  return out;
}

}  // namespace quadeff
