#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace cbebf {

using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

namespace detail {

inline void require_same_dim(std::size_t expected, std::size_t actual, const char* what) {
  if (expected != actual) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch (expected " +
                                std::to_string(expected) + ", got " + std::to_string(actual) + ")");
  }
}

}  // namespace detail

struct SparseEntry {
  std::size_t index;
  double value;

  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// A D-dimensional vector storing only its non-zero coordinates, ordered by
/// strictly increasing index.
class SparseVec {
 public:
  SparseVec() = default;

  explicit SparseVec(std::size_t dim) : dim_(dim) {
    if (dim == 0) throw std::invalid_argument("SparseVec: dimension must be positive");
  }

  /// Entries must already be strictly increasing by index, in range, and non-zero.
  SparseVec(std::size_t dim, std::vector<SparseEntry> entries)
      : dim_(dim), entries_(std::move(entries)) {
    if (dim == 0) throw std::invalid_argument("SparseVec: dimension must be positive");
    for (std::size_t i = 0; i < entries_.size(); ++i) {
      const auto& e = entries_[i];
      if (e.index >= dim_) throw std::invalid_argument("SparseVec: index out of range");
      if (i > 0 && entries_[i - 1].index >= e.index) {
        throw std::invalid_argument("SparseVec: indices must be strictly increasing");
      }
      if (e.value == 0.0) throw std::invalid_argument("SparseVec: stored zero value");
      if (!std::isfinite(e.value)) throw std::invalid_argument("SparseVec: non-finite value");
    }
  }

  /// Sorts, sums duplicate indices and drops zeros.
  static SparseVec from_unsorted(std::size_t dim, std::vector<SparseEntry> entries) {
    std::sort(entries.begin(), entries.end(),
              [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; });
    std::vector<SparseEntry> merged;
    merged.reserve(entries.size());
    for (const auto& e : entries) {
      if (!merged.empty() && merged.back().index == e.index) {
        merged.back().value += e.value;
      } else {
        merged.push_back(e);
      }
    }
    std::erase_if(merged, [](const SparseEntry& e) { return e.value == 0.0; });
    return SparseVec(dim, std::move(merged));
  }

  static SparseVec one_hot(std::size_t dim, std::size_t index, double value = 1.0) {
    return SparseVec(dim, {{index, value}});
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t nnz() const noexcept { return entries_.size(); }
  std::span<const SparseEntry> entries() const noexcept { return entries_; }

  double norm() const noexcept {
    double s = 0.0;
    for (const auto& e : entries_) s += e.value * e.value;
    return std::sqrt(s);
  }

  SparseVec scaled(double a) const {
    if (a == 0.0) return SparseVec(dim_);
    SparseVec out = *this;
    for (auto& e : out.entries_) e.value *= a;
    return out;
  }

  Vector to_dense() const {
    Vector v = Vector::Zero(static_cast<Eigen::Index>(dim_));
    for (const auto& e : entries_) v[static_cast<Eigen::Index>(e.index)] = e.value;
    return v;
  }

  friend bool operator==(const SparseVec&, const SparseVec&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<SparseEntry> entries_;
};

/// Throws unless x is admissible as a state observation (‖x‖₂ ≤ 1).
inline void check_observation(const SparseVec& x) {
  if (x.norm() > 1.0 + 1e-12) throw std::invalid_argument("observation norm exceeds 1");
}

inline double sparse_dot(const SparseVec& x, const Eigen::Ref<const Vector>& v) {
  detail::require_same_dim(x.dim(), static_cast<std::size_t>(v.size()), "sparse_dot");
  double s = 0.0;
  for (const auto& e : x.entries()) s += e.value * v[static_cast<Eigen::Index>(e.index)];
  return s;
}

inline double sparse_dot(const SparseVec& a, const SparseVec& b) {
  detail::require_same_dim(a.dim(), b.dim(), "sparse_dot");
  auto ea = a.entries();
  auto eb = b.entries();
  double s = 0.0;
  std::size_t i = 0, j = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].index < eb[j].index) {
      ++i;
    } else if (eb[j].index < ea[i].index) {
      ++j;
    } else {
      s += ea[i++].value * eb[j++].value;
    }
  }
  return s;
}

struct OlsSolution {
  Vector weights;
  int rank = 0;
  Vector singular_values;  // non-increasing
};

namespace detail {

inline void require_finite(const Eigen::Ref<const DenseMatrix>& a, const char* what) {
  if (!a.allFinite()) throw std::domain_error(std::string(what) + ": non-finite input");
}

inline double rank_cutoff(const Vector& singular_values, Eigen::Index rows, Eigen::Index cols) {
  const double smax = singular_values.size() > 0 ? singular_values[0] : 0.0;
  return smax * static_cast<double>(std::max(rows, cols)) * std::numeric_limits<double>::epsilon();
}

using Svd = Eigen::JacobiSVD<Eigen::MatrixXd>;

inline Svd thin_svd(const Eigen::Ref<const DenseMatrix>& a) {
  return Svd(Eigen::MatrixXd(a), Eigen::ComputeThinU | Eigen::ComputeThinV);
}

}  // namespace detail

/// Minimum-norm least-squares solution A†y. Singular values at or below
/// σ_max·max(n,d)·ε are treated as zero.
inline OlsSolution ols_fit(const Eigen::Ref<const DenseMatrix>& a, const Eigen::Ref<const Vector>& y) {
  if (a.rows() < 1 || a.cols() < 1) throw std::invalid_argument("ols_fit: empty design matrix");
  detail::require_same_dim(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(y.size()),
                           "ols_fit");
  detail::require_finite(a, "ols_fit");
  if (!y.allFinite()) throw std::domain_error("ols_fit: non-finite target");

  const auto svd = detail::thin_svd(a);
  OlsSolution sol;
  sol.singular_values = svd.singularValues();
  const double cutoff = detail::rank_cutoff(sol.singular_values, a.rows(), a.cols());

  Vector uty = svd.matrixU().transpose() * y;
  for (Eigen::Index i = 0; i < uty.size(); ++i) {
    const double s = sol.singular_values[i];
    if (s > cutoff) {
      uty[i] /= s;
      ++sol.rank;
    } else {
      uty[i] = 0.0;
    }
  }
  sol.weights = svd.matrixV() * uty;
  return sol;
}

/// Moore-Penrose pseudo-inverse with the same rank cutoff as ols_fit.
inline DenseMatrix pinv(const Eigen::Ref<const DenseMatrix>& a) {
  if (a.rows() < 1 || a.cols() < 1) throw std::invalid_argument("pinv: empty matrix");
  detail::require_finite(a, "pinv");
  const auto svd = detail::thin_svd(a);
  const Vector& s = svd.singularValues();
  const double cutoff = detail::rank_cutoff(s, a.rows(), a.cols());
  Vector inv = Vector::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff) inv[i] = 1.0 / s[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

/// √(Σ wᵢ·vᵢ²) for a probability vector w.
inline double weighted_l2(const Eigen::Ref<const Vector>& values, const Eigen::Ref<const Vector>& weights) {
  detail::require_same_dim(static_cast<std::size_t>(values.size()),
                           static_cast<std::size_t>(weights.size()), "weighted_l2");
  if ((weights.array() < 0.0).any()) throw std::invalid_argument("weighted_l2: negative weight");
  if (std::abs(weights.sum() - 1.0) > 1e-9) {
    throw std::invalid_argument("weighted_l2: weights must sum to 1");
  }
  return std::sqrt((weights.array() * values.array().square()).sum());
}

}  // namespace cbebf
