#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "quadeff/residuals.hpp"

namespace quadeff {

/// Tunables of the interior-point solver.
struct SolverConfig {
  double mu = 10.0;          // barrier growth factor
  double eps_feas = 1e-8;    // stop when |r_dual| <= eps_feas ...
  double eps_gap = 1e-12;    // ... and surrogate gap <= eps_gap
  double kappa = 0.01;       // sufficient decrease
  double zeta = 0.5;         // backtracking factor
  double eps_tol = 1e-12;    // slack in the decrease test
  double gamma = 1e-9;       // temporal smoothness weight
  double eta_min = 0.01;
  double eta_max = 1.05;
  int max_newton_iters = 50;

  void validate() const {
    if (!(mu > 1.0 && eps_feas > 0.0 && eps_gap > 0.0 && kappa > 0.0 && kappa < 1.0 && zeta > 0.0 &&
          zeta < 1.0 && eps_tol >= 0.0 && gamma >= 0.0 && eta_min < eta_max && max_newton_iters > 0)) {
      throw std::invalid_argument("SolverConfig: invalid parameters");
    }
  }
};

inline constexpr int kNumConstraints = 8;

using Dual = Eigen::Matrix<double, kNumConstraints, 1>;
using ConstraintJacobian = Eigen::Matrix<double, kNumConstraints, 4>;
using KktMatrix = Eigen::Matrix<double, 4 + kNumConstraints, 4 + kNumConstraints>;
using KktVector = Eigen::Matrix<double, 4 + kNumConstraints, 1>;

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Constraints {
  Dual phi;
  ConstraintJacobian d_phi;
};

/// Box constraints in standard form phi(s) <= 0: upper bounds first, then lower.
inline Constraints constraints(const Vec4& s, const SolverConfig& cfg) {
  Constraints c;
  c.phi.head<4>() = s.array() - cfg.eta_max;
  c.phi.tail<4>() = cfg.eta_min - s.array();
  c.d_phi.topRows<4>() = Mat4::Identity();
  c.d_phi.bottomRows<4>() = -Mat4::Identity();
  return c;
}

inline bool strictly_interior(const Vec4& s, const SolverConfig& cfg) {
  return (constraints(s, cfg).phi.array() < 0.0).all();
}

/// Surrogate duality gap -phi(s)^T lambda.
inline double surrogate_gap(const Vec4& s, const Dual& lambda, const SolverConfig& cfg) {
  return -constraints(s, cfg).phi.dot(lambda);
}

/// Weighted least-squares data at one primal point: gradient J^T G r and
/// Gauss-Newton Hessian J^T G J of 1/2 |r|_G^2.
struct LeastSquaresTerms {
  Vec4 gradient;
  Mat4 hessian;
};

inline LeastSquaresTerms least_squares_terms(const Eigen::VectorXd& r, const Eigen::MatrixXd& J,
                                             const Eigen::VectorXd& g_diag) {
  if (r.size() != J.rows() || r.size() != g_diag.size() || J.cols() != 4) {
    throw std::invalid_argument("least_squares_terms: dimension mismatch");
  }
  const Eigen::MatrixXd gj = g_diag.asDiagonal() * J;
  return {gj.transpose() * r, J.transpose() * gj};
}

struct KKTResidual {
  Vec4 r_dual;
  Dual r_cent;

  KktVector stacked() const {
    KktVector v;
    v << r_dual, r_cent;
    return v;
  }
  double norm() const { return std::sqrt(r_dual.squaredNorm() + r_cent.squaredNorm()); }
};

inline KKTResidual kkt_residual(const Vec4& s, const Dual& lambda, const Vec4& s_prev, const LeastSquaresTerms& ls,
                                double beta, const SolverConfig& cfg) {
  const Constraints c = constraints(s, cfg);
  if (!(c.phi.array() < 0.0).all()) {
    throw SolverError("kkt_residual: primal point is not strictly interior");
  }
  KKTResidual out;
  out.r_dual = ls.gradient + cfg.gamma * (s - s_prev) + c.d_phi.transpose() * lambda;
  out.r_cent = -lambda.cwiseProduct(c.phi) - Dual::Constant(1.0 / beta);
  return out;
}

inline KKTResidual kkt_residual(const Vec4& s, const Dual& lambda, const Vec4& s_prev, const Eigen::VectorXd& r,
                                const Eigen::MatrixXd& J, const Eigen::VectorXd& g_diag, double beta,
                                const SolverConfig& cfg) {
  return kkt_residual(s, lambda, s_prev, least_squares_terms(r, J, g_diag), beta, cfg);
}

struct NewtonStep {
  Vec4 ds;
  Dual dlambda;
  double relative_residual = 0.0;  // |K dy + r_kkt| / |r_kkt|
};

/// Primal-dual Newton direction from the 12x12 linearized KKT system.
inline NewtonStep newton_step(const Vec4& s, const Dual& lambda, const LeastSquaresTerms& ls,
                              const KKTResidual& residual, const SolverConfig& cfg) {
  const Constraints c = constraints(s, cfg);
  KktMatrix k = KktMatrix::Zero();
  k.topLeftCorner<4, 4>() = ls.hessian + cfg.gamma * Mat4::Identity();
  k.topRightCorner<4, kNumConstraints>() = c.d_phi.transpose();
  k.bottomLeftCorner<kNumConstraints, 4>() = -(lambda.asDiagonal() * c.d_phi);
  k.bottomRightCorner<kNumConstraints, kNumConstraints>() = (-c.phi).asDiagonal();

  const KktVector rhs = -residual.stacked();
  Eigen::FullPivLU<KktMatrix> lu(k);
  if (!lu.isInvertible()) {
    throw SolverError("newton_step: KKT matrix is singular");
  }
  const KktVector dy = lu.solve(rhs);
  if (!dy.allFinite()) {
    throw SolverError("newton_step: non-finite direction");
  }
  NewtonStep out;
  out.ds = dy.head<4>();
  out.dlambda = dy.tail<kNumConstraints>();
  const double rhs_norm = rhs.norm();
  out.relative_residual = rhs_norm > 0.0 ? (k * dy - rhs).norm() / rhs_norm : (k * dy).norm();
  return out;
}

/// Largest alpha in [0, 1] keeping lambda + alpha * dlambda >= 0.
inline double max_step(const Dual& lambda, const Dual& dlambda) {
  double alpha = 1.0;
  for (int i = 0; i < kNumConstraints; ++i) {
    if (dlambda(i) < 0.0) {
      alpha = std::min(alpha, -lambda(i) / dlambda(i));
    }
  }
  return alpha;
}

inline constexpr double kMinStep = 1e-12;

/// Backtracking from 0.99 * alpha_max until the trial point is strictly
/// interior and |r_kkt(trial)| <= (1 - kappa alpha) |r_kkt| + eps_tol.
/// `trial_norm(s, lambda)` evaluates the KKT norm at an interior trial point
/// with the current barrier parameter. Returns 0 if alpha underflows.
template <typename TrialNorm>
  requires std::invocable<TrialNorm, const Vec4&, const Dual&>
double line_search(const Vec4& s, const Dual& lambda, const NewtonStep& step, double current_norm,
                   const SolverConfig& cfg, TrialNorm&& trial_norm) {
  double alpha = 0.99 * max_step(lambda, step.dlambda);
  while (alpha >= kMinStep) {
    const Vec4 s_trial = s + alpha * step.ds;
    if (strictly_interior(s_trial, cfg)) {
      const Dual lambda_trial = lambda + alpha * step.dlambda;
      const double norm = trial_norm(s_trial, lambda_trial);
      if (norm <= (1.0 - cfg.kappa * alpha) * current_norm + cfg.eps_tol) {
        return alpha;
      }
    }
    alpha *= cfg.zeta;
  }
  return 0.0;
}

/// One row of the convergence log, recorded after each accepted update.
struct IterationRecord {
  int iteration = 0;
  double r_dual_norm = 0.0;
  double r_cent_norm = 0.0;
  double gap = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  Vec4 s = Vec4::Zero();
  Dual lambda = Dual::Zero();
};

enum class SolveStatus { Converged, IterationLimit, StepFailure };

inline const char* to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::Converged:
      return "converged";
    case SolveStatus::IterationLimit:
      return "iteration_limit";
    case SolveStatus::StepFailure:
      return "step_failure";
  }
  return "unknown";
}

struct SolveResult {
  Vec4 s;
  Dual lambda;
  SolveStatus status = SolveStatus::IterationLimit;
  double r_dual_norm = 0.0;
  double gap = 0.0;
  std::vector<IterationRecord> trace;

  bool converged() const { return status == SolveStatus::Converged; }
};

/// Anything that maps a primal point to stacked residuals and Jacobian.
template <typename M>
concept ResidualModel = requires(const M& m, const Vec4& s) {
  { m(s) } -> std::convertible_to<StackedWindow>;
};

/// Primal-dual interior-point loop for
///   min 1/2 |r(s)|_G^2 + gamma/2 |s - s_prev|^2  s.t.  eta_min <= s_i <= eta_max.
/// Stops when |r_dual| <= eps_feas and the surrogate gap <= eps_gap. Hitting
/// the iteration cap or a failed line search returns the current iterate with
/// the corresponding status instead of throwing.
template <ResidualModel Model>
SolveResult solve(const Model& model, const Eigen::VectorXd& g_diag, const Vec4& s_prev, const Vec4& s0,
                  const Dual& lambda0, const SolverConfig& cfg) {
  if (!strictly_interior(s0, cfg)) {
    throw SolverError("solve: initial point is not strictly interior");
  }
  if (!(lambda0.array() > 0.0).all()) {
    throw SolverError("solve: initial dual variables must be positive");
  }

  const auto terms_at = [&](const Vec4& s) {
    const StackedWindow w = model(s);
    return least_squares_terms(w.r, w.J, g_diag);
  };

  SolveResult out{s0, lambda0, SolveStatus::IterationLimit, 0.0, 0.0, {}};
  Vec4& s = out.s;
  Dual& lambda = out.lambda;
  LeastSquaresTerms ls = terms_at(s);

  for (int it = 1; it <= cfg.max_newton_iters + 1; ++it) {
    const double gap = surrogate_gap(s, lambda, cfg);
    const Vec4 r_dual = ls.gradient + cfg.gamma * (s - s_prev) + constraints(s, cfg).d_phi.transpose() * lambda;
    out.gap = gap;
    out.r_dual_norm = r_dual.norm();
    if (out.r_dual_norm <= cfg.eps_feas && gap <= cfg.eps_gap) {
      out.status = SolveStatus::Converged;
      break;
    }
    if (it > cfg.max_newton_iters) {
      out.status = SolveStatus::IterationLimit;
      break;
    }

    const double beta = cfg.mu * kNumConstraints / gap;
    const KKTResidual residual = kkt_residual(s, lambda, s_prev, ls, beta, cfg);
    const NewtonStep step = newton_step(s, lambda, ls, residual, cfg);

    LeastSquaresTerms trial_terms = ls;
    const auto trial_norm = [&](const Vec4& s_trial, const Dual& lambda_trial) {
      trial_terms = terms_at(s_trial);
      return kkt_residual(s_trial, lambda_trial, s_prev, trial_terms, beta, cfg).norm();
    };
    const double alpha = line_search(s, lambda, step, residual.norm(), cfg, trial_norm);
    if (alpha == 0.0) {
      out.status = SolveStatus::StepFailure;
      break;
    }
    s += alpha * step.ds;
    lambda += alpha * step.dlambda;
    // The last trial evaluated is the accepted one.
    ls = trial_terms;

    const KKTResidual after = kkt_residual(s, lambda, s_prev, ls, beta, cfg);
    out.trace.push_back({it, after.r_dual.norm(), after.r_cent.norm(), surrogate_gap(s, lambda, cfg), alpha, beta, s,
                         lambda});
  }
  return out;
}

}  // namespace quadeff
