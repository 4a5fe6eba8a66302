#pragma once

#include "cbebf/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace cbebf {

struct ReturnPoint {
  SparseVec x;
  double ret = 0.0;  // Monte Carlo return U(x)
};

struct ReturnsSample {
  std::vector<ReturnPoint> points;
  std::size_t horizon_used = 0;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

/// Smallest H with γ^H·R_max/(1−γ) ≤ tol, so truncating the discounted sum
/// after H rewards is biased by at most tol.
inline std::size_t return_horizon(double gamma, double tol, double r_max) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("return_horizon: gamma must lie in [0, 1)");
  if (!(tol > 0.0)) throw std::invalid_argument("return_horizon: tol must be positive");
  if (!(r_max >= 0.0)) throw std::invalid_argument("return_horizon: r_max must be >= 0");
  if (gamma == 0.0 || r_max == 0.0) return 1;
  const double ratio = tol * (1.0 - gamma) / r_max;
  if (ratio >= 1.0) return 1;
  const double h = std::ceil(std::log(ratio) / std::log(gamma));
  return std::max<std::size_t>(1, static_cast<std::size_t>(h));
}

inline double default_return_tolerance(double gamma, double r_max) { return 1e-3 * r_max / (1.0 - gamma); }

/// U(x_i) = Σ_{t<H} γᵗ r_{i+t} for every i with a full horizon (i + H ≤ n).
inline ReturnsSample monte_carlo_returns(const Trajectory& traj, double gamma, double tol, double r_max) {
  const std::size_t h = return_horizon(gamma, tol, r_max);
  const std::size_t n = traj.size();
  if (n < h) throw std::invalid_argument("monte_carlo_returns: trajectory shorter than the return horizon");
  ReturnsSample sample;
  sample.horizon_used = h;
  sample.points.reserve(n - h + 1);
  for (std::size_t i = 0; i + h <= n; ++i) {
    double u = 0.0;
    for (std::size_t t = h; t-- > 0;) u = traj[i + t].reward + gamma * u;
    sample.points.push_back({traj[i].x, u});
  }
  return sample;
}

inline double rp_error(std::span<const double> returns, std::span<const double> predictions) {
  if (returns.empty()) throw std::invalid_argument("rp_error: empty sample");
  if (returns.size() != predictions.size()) throw std::invalid_argument("rp_error: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < returns.size(); ++i) {
    const double diff = returns[i] - predictions[i];
    s += diff * diff;
  }
  return std::sqrt(s / static_cast<double>(returns.size()));
}

/// Root-mean-square of U(x) − V(x) over the sample, V given as a callable.
template <class ValueFn>
double rp_error(const ValueFn& value_of, const ReturnsSample& sample) {
  if (sample.empty()) throw std::invalid_argument("rp_error: empty sample");
  double s = 0.0;
  for (const auto& p : sample.points) {
    const double diff = p.ret - value_of(p.x);
    s += diff * diff;
  }
  return std::sqrt(s / static_cast<double>(sample.size()));
}

}  // namespace cbebf
