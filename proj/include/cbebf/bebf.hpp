#pragma once

#include "cbebf/projection.hpp"
#include "cbebf/random.hpp"
#include "cbebf/returns.hpp"
#include "cbebf/sparse_linalg.hpp"
#include "cbebf/trajectory.hpp"

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iterator>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace cbebf {

/// Linear value function V(x) = xᵀw over the original D-dimensional features.
struct ValueEstimate {
  Vector weights;

  static ValueEstimate zeros(std::size_t dim) { return {Vector::Zero(static_cast<Eigen::Index>(dim))}; }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(weights.size()); }
};

inline double value_at(const ValueEstimate& v, const SparseVec& x) { return sparse_dot(x, v.weights); }

/// δ_t = r_t + γV(x_{t+1}) − V(x_t).
inline Vector td_errors(const Trajectory& traj, const ValueEstimate& v, double gamma) {
  Vector delta(static_cast<Eigen::Index>(traj.size()));
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const auto& tr = traj[t];
    delta[static_cast<Eigen::Index>(t)] = tr.reward + gamma * value_at(v, tr.next) - value_at(v, tr.x);
  }
  return delta;
}

struct FixedStopping {};

/// Keep the iterate with the lowest validation RP error; halt after
/// `patience` consecutive iterations without strict improvement.
struct ValidationStopping {
  std::size_t patience = 5;
};

using StoppingRule = std::variant<FixedStopping, ValidationStopping>;

struct CbebfConfig {
  std::size_t num_bebfs = 0;
  /// d_1 … d_m; a single entry is used for every iteration.
  std::vector<std::size_t> projection_sizes{20};
  double gamma = 0.9;
  std::uint64_t seed = 0;
  StoppingRule stopping = FixedStopping{};

  /// Projection size of iteration i (1-based).
  std::size_t projection_size(std::size_t i) const {
    if (projection_sizes.size() == 1) return projection_sizes.front();
    return projection_sizes.at(i - 1);
  }

  void validate() const {
    if (projection_sizes.empty()) throw std::invalid_argument("CbebfConfig: empty projection schedule");
    if (projection_sizes.size() != 1 && projection_sizes.size() < num_bebfs) {
      throw std::invalid_argument("CbebfConfig: projection schedule shorter than num_bebfs");
    }
    for (auto d : projection_sizes) {
      if (d < 1) throw std::invalid_argument("CbebfConfig: projection sizes must be >= 1");
    }
    if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("CbebfConfig: gamma must lie in [0, 1)");
    if (const auto* v = std::get_if<ValidationStopping>(&stopping); v && v->patience < 1) {
      throw std::invalid_argument("CbebfConfig: patience must be >= 1");
    }
  }
};

struct IterationRecord {
  std::size_t d = 0;
  std::optional<double> validation_rp_error;
  double wall_time_ms = 0.0;
};

struct FitReport {
  std::size_t iterations_run = 0;
  std::vector<IterationRecord> per_iteration;  // iterations 1..iterations_run
  std::size_t selected_iteration = 0;          // number of BEBFs in the returned estimate
};

/// One generated BEBF ψ(x) = xᵀΦw′, with Φ identified by its seed.
struct BebfStep {
  std::uint64_t projection_seed = 0;
  std::size_t d = 0;
  Vector coefficients;  // w′
};

struct CbebfFit {
  ValueEstimate value;
  FitReport report;
  std::vector<BebfStep> steps;        // exactly the BEBFs summed into value
  std::vector<std::size_t> support;   // coordinates of value.weights that are materialized
};

struct FitOptions {
  /// Held-out points with Monte Carlo returns; required for ValidationStopping.
  const ReturnsSample* validation = nullptr;
  /// Additional points whose coordinates must be evaluable after the fit.
  std::span<const SparseVec> extra_points;
  /// Called with the current estimate after 0, 1, …, iterations_run BEBFs.
  std::function<void(std::size_t, const ValueEstimate&)> on_iteration;
};

inline std::uint64_t iteration_seed(std::uint64_t master, std::size_t iteration) {
  return derive_seed(master, {0x62656266ULL, iteration});
}

namespace detail {

inline void collect_indices(const SparseVec& x, std::vector<std::size_t>& out) {
  for (const auto& e : x.entries()) out.push_back(e.index);
}

inline std::size_t position_of(const std::vector<std::size_t>& support, std::size_t index) {
  const auto it = std::lower_bound(support.begin(), support.end(), index);
  return static_cast<std::size_t>(it - support.begin());
}

}  // namespace detail

/// Σ over steps of (Φᵢw′ᵢ)[index] for each requested index, regenerating
/// every Φᵢ row from its seed.
inline Vector replay_weights(std::span<const BebfStep> steps, std::size_t big_dim, std::span<const std::size_t> indices) {
  Vector out = Vector::Zero(static_cast<Eigen::Index>(indices.size()));
  for (const auto& step : steps) {
    const ProjectionMatrix phi(big_dim, step.d, step.projection_seed);
    Vector row(static_cast<Eigen::Index>(step.d));
    for (std::size_t p = 0; p < indices.size(); ++p) {
      phi.row(indices[p], {row.data(), step.d});
      out[static_cast<Eigen::Index>(p)] += row.dot(step.coefficients);
    }
  }
  return out;
}

/// Makes the coordinates touched by `points` evaluable in fit.value.
inline void extend_support(CbebfFit& fit, std::span<const SparseVec> points) {
  std::vector<std::size_t> fresh;
  for (const auto& x : points) {
    detail::require_same_dim(fit.value.dim(), x.dim(), "extend_support");
    for (const auto& e : x.entries()) {
      if (!std::binary_search(fit.support.begin(), fit.support.end(), e.index)) fresh.push_back(e.index);
    }
  }
  std::sort(fresh.begin(), fresh.end());
  fresh.erase(std::unique(fresh.begin(), fresh.end()), fresh.end());
  if (fresh.empty()) return;
  const Vector values = replay_weights(fit.steps, fit.value.dim(), fresh);
  for (std::size_t p = 0; p < fresh.size(); ++p) fit.value.weights[static_cast<Eigen::Index>(fresh[p])] = values[static_cast<Eigen::Index>(p)];
  std::vector<std::size_t> merged;
  merged.reserve(fit.support.size() + fresh.size());
  std::merge(fit.support.begin(), fit.support.end(), fresh.begin(), fresh.end(), std::back_inserter(merged));
  fit.support = std::move(merged);
}

/// Simplified compressed BEBF generation. Starting from w = 0, each
/// iteration draws a fresh projection Φᵢ (D×dᵢ), regresses the TD errors of
/// the current estimate on Φᵢᵀx_t by OLS, and adds Φᵢw′ to w.
///
/// Φᵢw′ is accumulated only on the support: the coordinates touched by the
/// training trajectory, the validation sample and options.extra_points. Rows
/// of Φᵢ are generated lazily, so an iteration costs
/// O(n·k·dᵢ + n·dᵢ² + |support|·dᵢ) independent of D.
inline CbebfFit cbebf_fit(const Trajectory& traj, const CbebfConfig& cfg, const FitOptions& options = {}) {
  using Clock = std::chrono::steady_clock;
  cfg.validate();
  if (traj.empty()) throw std::invalid_argument("cbebf_fit: empty trajectory");
  const std::size_t big_dim = traj.dim();
  const bool use_validation = std::holds_alternative<ValidationStopping>(cfg.stopping);
  if (use_validation && (options.validation == nullptr || options.validation->empty())) {
    throw std::invalid_argument("cbebf_fit: validation stopping needs a validation sample");
  }

  std::vector<std::size_t> support;
  for (const auto& tr : traj) {
    detail::collect_indices(tr.x, support);
    detail::collect_indices(tr.next, support);
  }
  if (options.validation != nullptr) {
    for (const auto& p : options.validation->points) {
      detail::require_same_dim(big_dim, p.x.dim(), "cbebf_fit validation");
      detail::collect_indices(p.x, support);
    }
  }
  for (const auto& x : options.extra_points) {
    detail::require_same_dim(big_dim, x.dim(), "cbebf_fit extra point");
    detail::collect_indices(x, support);
  }
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());

  // training inputs as (support position, value) lists
  const std::size_t n = traj.size();
  std::vector<std::size_t> offsets(n + 1, 0);
  std::vector<std::pair<std::size_t, double>> inputs;
  for (std::size_t t = 0; t < n; ++t) {
    for (const auto& e : traj[t].x.entries()) inputs.emplace_back(detail::position_of(support, e.index), e.value);
    offsets[t + 1] = inputs.size();
  }

  CbebfFit fit;
  fit.value = ValueEstimate::zeros(big_dim);
  auto& w = fit.value.weights;

  const auto validation_error = [&] {
    return rp_error([&](const SparseVec& x) { return value_at(fit.value, x); }, *options.validation);
  };

  double best_error = std::numeric_limits<double>::infinity();
  std::size_t best_iteration = 0;
  std::size_t since_best = 0;
  Vector best_snapshot;
  if (use_validation) {
    best_error = validation_error();
    best_snapshot = Vector::Zero(static_cast<Eigen::Index>(support.size()));
  }
  if (options.on_iteration) options.on_iteration(0, fit.value);

  std::vector<double> rows;
  for (std::size_t i = 1; i <= cfg.num_bebfs; ++i) {
    const auto started = Clock::now();
    const std::size_t d = cfg.projection_size(i);
    const ProjectionMatrix phi(big_dim, d, iteration_seed(cfg.seed, i));

    const Vector delta = td_errors(traj, fit.value, cfg.gamma);

    rows.resize(support.size() * d);
    for (std::size_t p = 0; p < support.size(); ++p) phi.row(support[p], {rows.data() + p * d, d});

    DenseMatrix z = DenseMatrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (std::size_t t = 0; t < n; ++t) {
      double* zt = z.row(static_cast<Eigen::Index>(t)).data();
      for (std::size_t q = offsets[t]; q < offsets[t + 1]; ++q) {
        const double* r = rows.data() + inputs[q].first * d;
        const double a = inputs[q].second;
        for (std::size_t j = 0; j < d; ++j) zt[j] += a * r[j];
      }
    }

    const OlsSolution ols = ols_fit(z, delta);
    const Vector& coef = ols.weights;
    for (std::size_t p = 0; p < support.size(); ++p) {
      const double* r = rows.data() + p * d;
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += r[j] * coef[static_cast<Eigen::Index>(j)];
      w[static_cast<Eigen::Index>(support[p])] += s;
    }
    fit.steps.push_back({phi.seed(), d, coef});

    IterationRecord record;
    record.d = d;
    if (options.validation != nullptr) record.validation_rp_error = validation_error();
    record.wall_time_ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
    fit.report.per_iteration.push_back(record);
    fit.report.iterations_run = i;
    if (options.on_iteration) options.on_iteration(i, fit.value);

    if (use_validation) {
      const double err = *record.validation_rp_error;
      if (err < best_error) {
        best_error = err;
        best_iteration = i;
        since_best = 0;
        for (std::size_t p = 0; p < support.size(); ++p) best_snapshot[static_cast<Eigen::Index>(p)] = w[static_cast<Eigen::Index>(support[p])];
      } else if (++since_best >= std::get<ValidationStopping>(cfg.stopping).patience) {
        break;
      }
    }
  }

  if (use_validation) {
    for (std::size_t p = 0; p < support.size(); ++p) w[static_cast<Eigen::Index>(support[p])] = best_snapshot[static_cast<Eigen::Index>(p)];
    fit.steps.resize(best_iteration);
    fit.report.selected_iteration = best_iteration;
  } else {
    fit.report.selected_iteration = fit.report.iterations_run;
  }
  fit.support = std::move(support);
  return fit;
}

}  // namespace cbebf
