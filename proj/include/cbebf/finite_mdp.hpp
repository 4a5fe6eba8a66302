#pragma once

#include "cbebf/random.hpp"
#include "cbebf/sparse_linalg.hpp"
#include "cbebf/trajectory.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cbebf {

/// Tabular Markov chain under a fixed policy: row-stochastic P, per-state
/// expected reward R ∈ [0, R_max], discount γ ∈ [0, 1).
class FiniteMdp {
 public:
  FiniteMdp(Eigen::MatrixXd transition, Vector reward, double gamma)
      : transition_(std::move(transition)), reward_(std::move(reward)), gamma_(gamma) {
    const auto s = transition_.rows();
    if (s < 1 || transition_.cols() != s) throw std::invalid_argument("FiniteMdp: P must be square and non-empty");
    if (reward_.size() != s) throw std::invalid_argument("FiniteMdp: R length must equal the number of states");
    if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw std::invalid_argument("FiniteMdp: gamma must lie in [0, 1)");
    if (!transition_.allFinite() || (transition_.array() < 0.0).any()) {
      throw std::invalid_argument("FiniteMdp: P entries must be finite and non-negative");
    }
    for (Eigen::Index i = 0; i < s; ++i) {
      if (std::abs(transition_.row(i).sum() - 1.0) > 1e-9) {
        throw std::invalid_argument("FiniteMdp: row " + std::to_string(i) + " of P does not sum to 1");
      }
    }
    if (!reward_.allFinite() || (reward_.array() < 0.0).any()) {
      throw std::invalid_argument("FiniteMdp: rewards must be finite and non-negative");
    }
    r_max_ = reward_.maxCoeff();
  }

  std::size_t n_states() const noexcept { return static_cast<std::size_t>(transition_.rows()); }
  const Eigen::MatrixXd& transition() const noexcept { return transition_; }
  const Vector& reward() const noexcept { return reward_; }
  double gamma() const noexcept { return gamma_; }
  double r_max() const noexcept { return r_max_; }

 private:
  Eigen::MatrixXd transition_;
  Vector reward_;
  double gamma_;
  double r_max_ = 0.0;
};

/// Reads "S gamma", then S rows of P, then one row of R (whitespace separated).
inline FiniteMdp read_finite_mdp(std::istream& in) {
  long long s = 0;
  double gamma = 0.0;
  if (!(in >> s >> gamma)) throw std::runtime_error("mdp file: expected header 'S gamma'");
  if (s < 1) throw std::runtime_error("mdp file: S must be positive");
  Eigen::MatrixXd p(s, s);
  for (long long i = 0; i < s; ++i) {
    for (long long j = 0; j < s; ++j) {
      if (!(in >> p(i, j))) {
        throw std::runtime_error("mdp file: truncated transition matrix at row " + std::to_string(i));
      }
    }
  }
  Vector r(s);
  for (long long i = 0; i < s; ++i) {
    if (!(in >> r[i])) throw std::runtime_error("mdp file: truncated reward row");
  }
  std::string extra;
  if (in >> extra) throw std::runtime_error("mdp file: unexpected trailing token '" + extra + "'");
  return FiniteMdp(std::move(p), std::move(r), gamma);
}

inline FiniteMdp load_finite_mdp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open mdp file: " + path);
  return read_finite_mdp(in);
}

inline void write_finite_mdp(std::ostream& out, const FiniteMdp& m) {
  std::ostringstream os;
  os.precision(17);
  os << m.n_states() << ' ' << m.gamma() << '\n';
  for (Eigen::Index i = 0; i < m.transition().rows(); ++i) {
    for (Eigen::Index j = 0; j < m.transition().cols(); ++j) os << (j ? " " : "") << m.transition()(i, j);
    os << '\n';
  }
  for (Eigen::Index i = 0; i < m.reward().size(); ++i) os << (i ? " " : "") << m.reward()[i];
  os << '\n';
  out << os.str();
}

/// V^π = (I − γP)⁻¹R by a direct solve.
inline Vector exact_value(const FiniteMdp& m) {
  const auto s = static_cast<Eigen::Index>(m.n_states());
  const Eigen::MatrixXd a = Eigen::MatrixXd::Identity(s, s) - m.gamma() * m.transition();
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
  if (!lu.isInvertible()) throw std::runtime_error("exact_value: singular Bellman system");
  Vector v = lu.solve(m.reward());
  const double residual = (a * v - m.reward()).lpNorm<Eigen::Infinity>();
  if (!(residual <= 1e-9 * std::max(m.r_max(), 1.0))) {
    throw std::runtime_error("exact_value: residual too large");
  }
  return v;
}

/// T v = R + γPv.
inline Vector bellman_apply(const FiniteMdp& m, const Eigen::Ref<const Vector>& v) {
  detail::require_same_dim(m.n_states(), static_cast<std::size_t>(v.size()), "bellman_apply");
  return m.reward() + m.gamma() * (m.transition() * v);
}

/// e_v = T v − v.
inline Vector bellman_error(const FiniteMdp& m, const Eigen::Ref<const Vector>& v) {
  return bellman_apply(m, v) - v;
}

namespace detail {

/// Number of closed communicating classes of the chain's support graph.
inline std::size_t count_closed_classes(const Eigen::MatrixXd& p) {
  const auto s = static_cast<std::size_t>(p.rows());
  std::vector<std::vector<char>> reach(s, std::vector<char>(s, 0));
  std::vector<std::size_t> stack;
  for (std::size_t src = 0; src < s; ++src) {
    auto& seen = reach[src];
    seen[src] = 1;
    stack.assign(1, src);
    while (!stack.empty()) {
      const auto u = stack.back();
      stack.pop_back();
      for (std::size_t v = 0; v < s; ++v) {
        if (p(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) > 0.0 && !seen[v]) {
          seen[v] = 1;
          stack.push_back(v);
        }
      }
    }
  }
  std::vector<char> counted(s, 0);
  std::size_t classes = 0;
  for (std::size_t i = 0; i < s; ++i) {
    if (counted[i]) continue;
    bool closed = true;
    for (std::size_t j = 0; j < s && closed; ++j) {
      if (reach[i][j] && !reach[j][i]) closed = false;
    }
    if (!closed) continue;
    ++classes;
    for (std::size_t j = 0; j < s; ++j) {
      if (reach[i][j]) counted[j] = 1;
    }
  }
  return classes;
}

}  // namespace detail

/// Stationary distribution ρ with ρP = ρ, by power iteration from the uniform
/// distribution. Throws if ρ is not unique or the iteration fails to converge
/// (e.g. on periodic chains).
inline Vector stationary_distribution(const FiniteMdp& m, std::size_t max_iterations = 1'000'000) {
  const auto& p = m.transition();
  if (detail::count_closed_classes(p) != 1) {
    throw std::runtime_error("stationary_distribution: chain has more than one closed class");
  }
  const auto s = p.rows();
  Eigen::RowVectorXd rho = Eigen::RowVectorXd::Constant(s, 1.0 / static_cast<double>(s));
  Eigen::RowVectorXd next(s);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    next.noalias() = rho * p;
    next /= next.sum();
    const double change = (next - rho).lpNorm<1>();
    rho.swap(next);
    if (change <= 1e-13) break;
  }
  const double residual = (rho * p - rho).lpNorm<1>();
  if (!(residual <= 1e-10)) {
    throw std::runtime_error("stationary_distribution: power iteration did not converge");
  }
  return rho.transpose();
}

/// Upper-triangular dependence matrix Γ_n of a time-homogeneous chain:
/// γ_ij = √(sup_{x,y} TV(P^{j−i}(x,·), P^{j−i}(y,·))), γ_ii = 1.
class MixingMatrix {
 public:
  explicit MixingMatrix(std::vector<double> by_lag) : by_lag_(std::move(by_lag)) {
    if (by_lag_.empty() || by_lag_[0] != 1.0) throw std::invalid_argument("MixingMatrix: lag 0 must equal 1");
  }

  std::size_t n() const noexcept { return by_lag_.size(); }
  /// γ for lag j − i.
  double at_lag(std::size_t lag) const { return by_lag_.at(lag); }
  double operator()(std::size_t i, std::size_t j) const { return j < i ? 0.0 : by_lag_.at(j - i); }

  Eigen::MatrixXd dense() const {
    const auto n = static_cast<Eigen::Index>(by_lag_.size());
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = i; j < n; ++j) g(i, j) = by_lag_[static_cast<std::size_t>(j - i)];
    }
    return g;
  }

 private:
  std::vector<double> by_lag_;
};

inline double total_variation(const Eigen::Ref<const Eigen::RowVectorXd>& a,
                              const Eigen::Ref<const Eigen::RowVectorXd>& b) {
  return 0.5 * (a - b).lpNorm<1>();
}

inline MixingMatrix mixing_matrix(const FiniteMdp& m, std::size_t n) {
  if (n < 1) throw std::invalid_argument("mixing_matrix: horizon must be >= 1");
  const auto& p = m.transition();
  const auto s = p.rows();
  std::vector<double> by_lag(n, 1.0);
  Eigen::MatrixXd power = p;
  for (std::size_t lag = 1; lag < n; ++lag) {
    double worst = 0.0;
    for (Eigen::Index x = 0; x < s; ++x) {
      for (Eigen::Index y = x + 1; y < s; ++y) worst = std::max(worst, total_variation(power.row(x), power.row(y)));
    }
    by_lag[lag] = std::sqrt(std::min(worst, 1.0));
    if (lag + 1 < n) power = power * p;
  }
  return MixingMatrix(std::move(by_lag));
}

/// Spectral norm ‖Γ‖ by power iteration on ΓᵀΓ.
inline double operator_norm(const MixingMatrix& g, double tol = 1e-10, std::size_t max_iterations = 100'000) {
  const Eigen::MatrixXd dense = g.dense();
  const Eigen::MatrixXd gram = dense.transpose() * dense;
  Vector v = Vector::Ones(gram.rows()).normalized();
  double lambda = 0.0;
  for (std::size_t it = 0; it < max_iterations; ++it) {
    Vector w = gram * v;
    const double next = v.dot(w);
    v = w.normalized();
    if (std::abs(next - lambda) <= tol * std::max(next, 1.0)) {
      lambda = next;
      break;
    }
    lambda = next;
  }
  return std::sqrt(lambda);
}

/// Featurizer mapping state s to the unit vector e_s.
struct OneHot {
  std::size_t n_states;
  SparseVec operator()(std::size_t s) const { return SparseVec::one_hot(n_states, s); }
};

namespace detail {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline std::size_t sample_categorical(const std::vector<double>& cumulative, std::mt19937_64& rng) {
  const double u = uniform01(rng) * cumulative.back();
  const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  return std::min(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

inline std::vector<double> cumulative_of(const Eigen::Ref<const Eigen::RowVectorXd>& probs) {
  std::vector<double> c(static_cast<std::size_t>(probs.size()));
  double acc = 0.0;
  for (Eigen::Index j = 0; j < probs.size(); ++j) c[static_cast<std::size_t>(j)] = (acc += probs[j]);
  return c;
}

}  // namespace detail

/// State indices and per-step rewards of an n-step rollout started from ρ.
struct StatePath {
  std::vector<std::size_t> states;  // n + 1 entries
  std::vector<double> rewards;      // n entries, reward of states[t]
};

inline StatePath sample_states(const FiniteMdp& m, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto rho = stationary_distribution(m);
  std::vector<std::vector<double>> rows;
  rows.reserve(m.n_states());
  for (Eigen::Index i = 0; i < m.transition().rows(); ++i) rows.push_back(detail::cumulative_of(m.transition().row(i)));

  StatePath path;
  path.states.reserve(n + 1);
  path.rewards.reserve(n);
  std::size_t s = detail::sample_categorical(detail::cumulative_of(rho.transpose()), rng);
  path.states.push_back(s);
  for (std::size_t t = 0; t < n; ++t) {
    path.rewards.push_back(m.reward()[static_cast<Eigen::Index>(s)]);
    s = detail::sample_categorical(rows[s], rng);
    path.states.push_back(s);
  }
  return path;
}

/// n chained transitions from a rollout of the chain; x_t = featurizer(s_t).
template <class Featurizer = OneHot>
Trajectory sample_trajectory(const FiniteMdp& m, std::size_t n, std::uint64_t seed, const Featurizer& featurize) {
  if (n == 0) return {};
  const auto path = sample_states(m, n, seed);
  std::vector<Transition> out;
  out.reserve(n);
  SparseVec x = featurize(path.states[0]);
  for (std::size_t t = 0; t < n; ++t) {
    SparseVec next = featurize(path.states[t + 1]);
    out.push_back({x, path.rewards[t], next});
    x = std::move(next);
  }
  return Trajectory(std::move(out));
}

inline Trajectory sample_trajectory(const FiniteMdp& m, std::size_t n, std::uint64_t seed) {
  return sample_trajectory(m, n, seed, OneHot{m.n_states()});
}

/// Random chain with strictly positive (Dirichlet(1)) rows and uniform
/// rewards in [0, r_max].
inline FiniteMdp random_finite_mdp(std::size_t n_states, double gamma, std::uint64_t seed, double r_max = 1.0) {
  std::mt19937_64 rng(seed);
  const auto s = static_cast<Eigen::Index>(n_states);
  Eigen::MatrixXd p(s, s);
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = 0; j < s; ++j) p(i, j) = -std::log(1.0 - detail::uniform01(rng)) + 1e-12;
    p.row(i) /= p.row(i).sum();
  }
  Vector r(s);
  for (Eigen::Index i = 0; i < s; ++i) r[i] = r_max * detail::uniform01(rng);
  return FiniteMdp(std::move(p), std::move(r), gamma);
}

}  // namespace cbebf
