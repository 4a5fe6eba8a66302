#pragma once

#include "cbebf/projection.hpp"
#include "cbebf/sparse_linalg.hpp"
#include "cbebf/trajectory.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace cbebf {

struct LstdSolution {
  Vector weights;
  double ridge = 0.0;
};

/// LSTD on features z = project(x): solves (A + ridge·I)w = b with
/// A = Σ z_t(z_t − γz_{t+1})ᵀ, b = Σ z_t r_t and ridge = 1e-8·|tr A|/d.
template <class Projector>
LstdSolution compressed_lstd(const Trajectory& traj, const Projector& project, std::size_t d, double gamma) {
  if (traj.empty()) throw std::invalid_argument("compressed_lstd: empty trajectory");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("compressed_lstd: gamma must lie in [0, 1)");
  const auto dd = static_cast<Eigen::Index>(d);
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dd, dd);
  Vector b = Vector::Zero(dd);
  for (const auto& tr : traj) {
    const Vector z = project(tr.x);
    const Vector zn = project(tr.next);
    a.noalias() += z * (z - gamma * zn).transpose();
    b.noalias() += tr.reward * z;
  }
  LstdSolution sol;
  sol.ridge = 1e-8 * std::abs(a.trace()) / static_cast<double>(d);
  a.diagonal().array() += sol.ridge;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw std::runtime_error("compressed_lstd: singular system");
  sol.weights = lu.solve(b);
  if (!sol.weights.allFinite()) throw std::runtime_error("compressed_lstd: non-finite solution");
  return sol;
}

/// LSTD in a random D×d Gaussian projection of the features (CLSTD).
struct CompressedLstd {
  ProjectionMatrix projection;
  LstdSolution solution;

  double value_at(const SparseVec& x) const { return projection.project(x).dot(solution.weights); }
};

inline CompressedLstd clstd_fit(const Trajectory& traj, std::size_t d, double gamma, std::uint64_t seed) {
  if (traj.empty()) throw std::invalid_argument("clstd_fit: empty trajectory");
  ProjectionMatrix phi(traj.dim(), d, seed);
  auto sol = compressed_lstd(traj, [&](const SparseVec& x) { return phi.project(x); }, d, gamma);
  return {std::move(phi), std::move(sol)};
}

/// Full-dimensional LSTD for one-hot features. The system is restricted to
/// states visited as x_t; weights of unvisited states are zero. Equivalent to
/// (I − γP̂)⁻¹R̂ on the empirical model.
inline LstdSolution tabular_lstd(const Trajectory& traj, double gamma) {
  if (traj.empty()) throw std::invalid_argument("tabular_lstd: empty trajectory");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("tabular_lstd: gamma must lie in [0, 1)");
  const auto state_of = [](const SparseVec& x) {
    if (x.nnz() != 1 || x.entries()[0].value != 1.0) throw std::invalid_argument("tabular_lstd: features must be one-hot");
    return x.entries()[0].index;
  };

  std::unordered_map<std::size_t, Eigen::Index> local;
  std::vector<std::size_t> visited;
  for (const auto& tr : traj) {
    const auto s = state_of(tr.x);
    state_of(tr.next);
    if (local.emplace(s, static_cast<Eigen::Index>(visited.size())).second) visited.push_back(s);
  }

  const auto v = static_cast<Eigen::Index>(visited.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(v, v);
  Vector b = Vector::Zero(v);
  for (const auto& tr : traj) {
    const auto i = local.at(state_of(tr.x));
    a(i, i) += 1.0;
    if (const auto it = local.find(state_of(tr.next)); it != local.end()) a(i, it->second) -= gamma;
    b[i] += tr.reward;
  }

  LstdSolution sol;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) {
    sol.ridge = 1e-8 * std::abs(a.trace()) / static_cast<double>(v);
    a.diagonal().array() += sol.ridge;
    lu.compute(a);
    if (!lu.isInvertible()) throw std::runtime_error("tabular_lstd: singular system");
  }
  const Vector local_w = lu.solve(b);
  sol.weights = Vector::Zero(static_cast<Eigen::Index>(traj.dim()));
  for (Eigen::Index i = 0; i < v; ++i) sol.weights[static_cast<Eigen::Index>(visited[static_cast<std::size_t>(i)])] = local_w[i];
  return sol;
}

}  // namespace cbebf
