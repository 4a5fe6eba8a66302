#pragma once

#include "cbebf/tile_coder.hpp"
#include "cbebf/trajectory.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace cbebf {

/// Synthetic continuous benchmark: a mean-reverting random walk on [0,1]^dims
/// under a fixed policy,
///   x' = clip(center + reversion·(x − center) + step_std·N(0, I)),
///   r  = clip(mean(x) + reward_noise·N(0, 1), 0, 1).
/// Observations append a constant policy coordinate to the state.
struct RandomWalkDomain {
  std::size_t dims = 5;
  double center = 0.1;
  double reversion = 0.9;
  double step_std = 0.03;
  double reward_noise = 0.5;
  double policy_feature = 0.5;

  static constexpr double r_max = 1.0;

  void validate() const {
    if (dims < 1) throw std::invalid_argument("RandomWalkDomain: dims must be >= 1");
    if (!(center >= 0.0 && center <= 1.0)) throw std::invalid_argument("RandomWalkDomain: center must lie in [0, 1]");
    if (!(reversion >= 0.0 && reversion < 1.0)) throw std::invalid_argument("RandomWalkDomain: reversion must lie in [0, 1)");
    if (!(step_std > 0.0)) throw std::invalid_argument("RandomWalkDomain: step_std must be positive");
    if (!(reward_noise >= 0.0)) throw std::invalid_argument("RandomWalkDomain: reward_noise must be >= 0");
    if (!(policy_feature >= 0.0 && policy_feature <= 1.0)) {
      throw std::invalid_argument("RandomWalkDomain: policy_feature must lie in [0, 1]");
    }
  }

  std::size_t observation_dims() const noexcept { return dims + 1; }

  /// Draw from the stationary law of the unclipped walk, then clip.
  std::vector<double> start(std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, step_std / std::sqrt(1.0 - reversion * reversion));
    std::vector<double> x(dims);
    for (auto& xi : x) xi = std::clamp(center + normal(rng), 0.0, 1.0);
    return x;
  }

  std::vector<double> step(const std::vector<double>& x, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, step_std);
    std::vector<double> next(dims);
    for (std::size_t j = 0; j < dims; ++j) {
      next[j] = std::clamp(center + reversion * (x[j] - center) + normal(rng), 0.0, 1.0);
    }
    return next;
  }

  double reward(const std::vector<double>& x, std::mt19937_64& rng) const {
    std::normal_distribution<double> normal(0.0, reward_noise);
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(dims);
    return std::clamp(mean + (reward_noise > 0.0 ? normal(rng) : 0.0), 0.0, r_max);
  }

  std::vector<double> observe(const std::vector<double>& x) const {
    std::vector<double> obs(x);
    obs.push_back(policy_feature);
    return obs;
  }
};

/// Unit-box tile coder over the domain's observation space.
inline TileCoder make_tile_coder(const RandomWalkDomain& domain, std::size_t tiles_per_dim, std::size_t n_grids,
                                 std::uint64_t seed) {
  return TileCoder::random(domain.observation_dims(), tiles_per_dim, n_grids,
                           std::vector<Interval>(domain.observation_dims(), Interval{0.0, 1.0}), seed);
}

/// n chained transitions from the domain's start distribution, tile coded.
inline Trajectory sample_trajectory(const RandomWalkDomain& domain, std::size_t n, std::uint64_t seed,
                                    const TileCoder& coder) {
  domain.validate();
  if (coder.n_dims() != domain.observation_dims()) {
    throw std::invalid_argument("sample_trajectory: tile coder arity does not match the domain");
  }
  if (n == 0) return {};
  std::mt19937_64 rng(seed);
  std::vector<Transition> out;
  out.reserve(n);
  auto state = domain.start(rng);
  SparseVec x = coder.encode(domain.observe(state));
  for (std::size_t t = 0; t < n; ++t) {
    const double r = domain.reward(state, rng);
    state = domain.step(state, rng);
    SparseVec next = coder.encode(domain.observe(state));
    out.push_back({x, r, next});
    x = std::move(next);
  }
  return Trajectory(std::move(out));
}

}  // namespace cbebf
