#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "quadeff/residuals.hpp"

namespace quadeff {

/// Soft-decay / hard-rejection settings for segment reweighting.
struct WeightConfig {
  double z_soft = 2.5;
  double p = 4.0;
  double w_min = 0.05;
  double z_hard = 6.0;
  double eps_min = 1e-9;

  void validate() const {
    if (!(z_soft > 0.0 && p > 0.0 && w_min >= 0.0 && w_min < 1.0 && z_hard > z_soft && eps_min > 0.0)) {
      throw std::invalid_argument("WeightConfig: invalid thresholds");
    }
  }
};

struct SegmentWeights {
  std::vector<double> w;
  std::vector<bool> rejected;

  std::size_t rejected_count() const {
    return static_cast<std::size_t>(std::count(rejected.begin(), rejected.end(), true));
  }
};

class DegenerateWindowError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Median with the even-length convention (mean of the two central values).
inline double median(std::span<const double> values) {
  if (values.empty()) {
    throw std::invalid_argument("median: empty input");
  }
  std::vector<double> tmp(values.begin(), values.end());
  const std::size_t mid = tmp.size() / 2;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid), tmp.end());
  const double upper = tmp[mid];
  if (tmp.size() % 2 == 1) {
    return upper;
  }
  const double lower = *std::max_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

/// e_i = r_i^T G_i r_i with G_i = diag(local).
inline std::vector<double> residual_energies(std::span<const SegmentResidualVector> residuals,
                                             const SegmentResidualVector& local) {
  if (residuals.empty()) {
    throw std::invalid_argument("residual_energies: no segments");
  }
  std::vector<double> e;
  e.reserve(residuals.size());
  for (const auto& r : residuals) {
    e.push_back(r.cwiseProduct(r).dot(local));
  }
  return e;
}

inline constexpr double kMadConsistency = 1.4826;

/// |e_i - median(e)| / max(1.4826 * median|e - median(e)|, eps_min).
inline std::vector<double> robust_zscores(std::span<const double> e, double eps_min) {
  const double m = median(e);
  std::vector<double> dev(e.size());
  std::transform(e.begin(), e.end(), dev.begin(), [m](double v) { return std::abs(v - m); });
  const double mad = kMadConsistency * median(dev);
  const double denom = std::max(mad, eps_min);
  for (double& d : dev) {
    d /= denom;
  }
  return dev;
}

/// Throws DegenerateWindowError if every segment would be rejected.
inline SegmentWeights weights_from_zscores(std::span<const double> z, const WeightConfig& cfg) {
  SegmentWeights out;
  out.w.reserve(z.size());
  out.rejected.reserve(z.size());
  for (const double zi : z) {
    const bool reject = zi > cfg.z_hard;
    const double soft = std::max(1.0 / (1.0 + std::pow(zi / cfg.z_soft, cfg.p)), cfg.w_min);
    out.w.push_back(reject ? 0.0 : soft);
    out.rejected.push_back(reject);
  }
  if (!z.empty() && out.rejected_count() == z.size()) {
    throw DegenerateWindowError("weights_from_zscores: every segment was hard-rejected");
  }
  return out;
}

}  // namespace quadeff
