#pragma once

#include <cmath>
#include <deque>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "quadeff/ipm_solver.hpp"
#include "quadeff/residuals.hpp"
#include "quadeff/robust_weights.hpp"

namespace quadeff {

/// Per-channel weights of one segment's residual (the diagonal of G_i).
struct LocalWeights {
  Vec3 g_v = Vec3::Ones();
  Vec3 g_x = Vec3::Ones();
  Vec3 g_omega = Vec3(1.0, 1.0, 100.0);
  double g_R = 10.0;

  SegmentResidualVector diagonal() const {
    SegmentResidualVector d;
    d << g_v, g_x, g_omega, g_R;
    return d;
  }
  void validate() const {
    if (!((diagonal().array() > 0.0).all())) {
      throw std::invalid_argument("LocalWeights: all channel weights must be positive");
    }
  }
};

struct EstimatorConfig {
  std::size_t window = 50;
  std::size_t stride = 5;
  int irls_iters = 3;
  double initial_guess = 0.5;
  LocalWeights local;
  WeightConfig weights;
  SolverConfig solver;

  void validate() const {
    if (window == 0 || stride == 0 || irls_iters < 1) {
      throw std::invalid_argument("EstimatorConfig: window, stride and irls_iters must be positive");
    }
    if (!(initial_guess > solver.eta_min && initial_guess < solver.eta_max)) {
      throw std::invalid_argument("EstimatorConfig: initial guess must lie strictly inside the bounds");
    }
    local.validate();
    weights.validate();
    solver.validate();
  }
};

/// Fixed-capacity, time-ordered buffer of the most recent segments.
class SlidingWindow {
 public:
  explicit SlidingWindow(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
      throw std::invalid_argument("SlidingWindow: capacity must be positive");
    }
  }

  /// Appends a segment, evicting the oldest when full. All segments must share
  /// the same dt.
  void push_segment(const WindowSegment& seg) {
    if (!(seg.dt > 0.0)) {
      throw std::invalid_argument("SlidingWindow: segment dt must be positive");
    }
    if (!segments_.empty() && std::abs(seg.dt - segments_.front().dt) > 1e-12 * segments_.front().dt) {
      throw std::invalid_argument("SlidingWindow: segment dt does not match the window");
    }
    if (segments_.size() == capacity_) {
      segments_.pop_front();
    }
    segments_.push_back(seg);
  }

  std::size_t size() const { return segments_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool full() const { return segments_.size() == capacity_; }
  const WindowSegment& operator[](std::size_t i) const { return segments_[i]; }
  std::vector<WindowSegment> segments() const { return {segments_.begin(), segments_.end()}; }

 private:
  std::size_t capacity_;
  std::deque<WindowSegment> segments_;
};

/// Diagonal of blockdiag(w_0 G_0, ..., w_{n-1} G_{n-1}).
inline Eigen::VectorXd assemble_G(const SegmentWeights& weights, const LocalWeights& local, std::size_t n) {
  if (weights.w.size() != n) {
    throw std::invalid_argument("assemble_G: weight count does not match window length");
  }
  const SegmentResidualVector g = local.diagonal();
  Eigen::VectorXd diag(static_cast<Eigen::Index>(kResidualsPerSegment * n));
  for (std::size_t i = 0; i < n; ++i) {
    diag.segment<kResidualsPerSegment>(static_cast<Eigen::Index>(kResidualsPerSegment * i)) = weights.w[i] * g;
  }
  return diag;
}

struct EstimateRecord {
  double t = 0.0;
  EfficiencyVector s_hat;
  int irls_iters = 0;
  std::size_t rejected = 0;
  double gap = 0.0;
  bool converged = false;
  bool degenerate_window = false;  // all segments rejected; unit weights used
};

/// Everything `estimate` computed on the way, for logging.
struct EstimateDiagnostics {
  std::vector<double> zscores;      // final IRLS iteration
  SegmentWeights weights;           // final IRLS iteration
  std::vector<SolveResult> solves;  // one per IRLS iteration
};

inline Vec4 pull_inside(const Vec4& s, const SolverConfig& cfg) {
  const double margin = 1e-6 * (cfg.eta_max - cfg.eta_min);
  return s.cwiseMax(cfg.eta_min + margin).cwiseMin(cfg.eta_max - margin);
}

/// Robustly reweighted window estimate. Each outer iteration scores the
/// segments at the previous iterate, rebuilds G and re-solves the
/// box-constrained problem starting from that iterate and its duals.
inline EstimateRecord estimate(const SlidingWindow& window, const EfficiencyVector& s_prev, const QuadParams& params,
                               const EstimatorConfig& cfg, EstimateDiagnostics* diag = nullptr) {
  if (!window.full()) {
    throw std::invalid_argument("estimate: window is not full");
  }
  const std::vector<WindowSegment> segments = window.segments();
  const std::size_t n = segments.size();
  const auto model = [&](const Vec4& s) { return stack_window(segments, EfficiencyVector{s}, params); };
  const SegmentResidualVector local = cfg.local.diagonal();

  EstimateRecord rec;
  rec.t = segments.back().t + segments.back().dt;
  rec.converged = true;
  Vec4 s = pull_inside(s_prev.eta, cfg.solver);
  // Duals carry over between outer iterations so the gap keeps falling.
  Dual lambda = Dual::Ones();

  std::vector<SegmentResidualVector> residuals(n);
  for (int k = 1; k <= cfg.irls_iters; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      residuals[i] = segment_residual(segments[i], EfficiencyVector{s}, params).stacked();
    }
    const std::vector<double> energies = residual_energies(residuals, local);
    std::vector<double> z = robust_zscores(energies, cfg.weights.eps_min);
    SegmentWeights weights;
    try {
      weights = weights_from_zscores(z, cfg.weights);
    } catch (const DegenerateWindowError&) {
      weights.w.assign(n, 1.0);
      weights.rejected.assign(n, false);
      rec.degenerate_window = true;
    }

    const Eigen::VectorXd g = assemble_G(weights, cfg.local, n);
    SolveResult result = solve(model, g, s_prev.eta, s, lambda, cfg.solver);
    s = result.s;
    lambda = result.lambda;
    rec.irls_iters = k;
    rec.rejected = weights.rejected_count();
    rec.gap = result.gap;
    rec.converged = rec.converged && result.converged();

    if (diag != nullptr) {
      if (k == cfg.irls_iters) {
        diag->zscores = std::move(z);
        diag->weights = std::move(weights);
      }
      diag->solves.push_back(std::move(result));
    }
  }
  rec.s_hat = EfficiencyVector{s};
  return rec;
}

/// Streaming driver: feeds segments into the window and emits an estimate
/// every `stride` segments once the window is full. Each estimate's
/// smoothness anchor is the previous estimate.
class OnlineEstimator {
 public:
  OnlineEstimator(const QuadParams& params, const EstimatorConfig& cfg)
      : params_(params), cfg_(cfg), window_(cfg.window), s_prev_(EfficiencyVector::constant(cfg.initial_guess)) {
    cfg_.validate();
  }

  std::optional<EstimateRecord> push(const WindowSegment& seg, EstimateDiagnostics* diag = nullptr) {
    window_.push_segment(seg);
    ++pushed_;
    if (!window_.full() || (pushed_ - cfg_.window) % cfg_.stride != 0) {
      return std::nullopt;
    }
    EstimateRecord rec = estimate(window_, s_prev_, params_, cfg_, diag);
    s_prev_ = rec.s_hat;
    return rec;
  }

  const SlidingWindow& window() const { return window_; }
  const EfficiencyVector& last_estimate() const { return s_prev_; }

 private:
  QuadParams params_;
  EstimatorConfig cfg_;
  SlidingWindow window_;
  EfficiencyVector s_prev_;
  std::size_t pushed_ = 0;
};

/// Batch form of the streaming estimator.
inline std::vector<EstimateRecord> run_online(std::span<const WindowSegment> stream, const QuadParams& params,
                                              const EstimatorConfig& cfg) {
  OnlineEstimator est(params, cfg);
  std::vector<EstimateRecord> out;
  for (const auto& seg : stream) {
    if (auto rec = est.push(seg)) {
      out.push_back(*rec);
    }
  }
  return out;
}

}  // namespace quadeff
