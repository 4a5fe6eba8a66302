#pragma once

#include "cbebf/random.hpp"
#include "cbebf/sparse_linalg.hpp"

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>

namespace cbebf {

/// A D×d Gaussian projection with i.i.d. N(0, 1/d) entries. Rows are never
/// stored: row(i) is regenerated from (seed, i) through a counter-based
/// generator, so projecting a k-sparse vector costs O(k·d) regardless of D.
class ProjectionMatrix {
 public:
  ProjectionMatrix(std::size_t big_dim, std::size_t small_dim, std::uint64_t seed)
      : big_dim_(big_dim), small_dim_(small_dim), seed_(seed),
        scale_(1.0 / std::sqrt(static_cast<double>(small_dim))) {
    if (small_dim < 1) throw std::invalid_argument("ProjectionMatrix: d must be >= 1");
    if (big_dim < small_dim) throw std::invalid_argument("ProjectionMatrix: D must be >= d");
  }

  std::size_t big_dim() const noexcept { return big_dim_; }
  std::size_t small_dim() const noexcept { return small_dim_; }
  std::uint64_t seed() const noexcept { return seed_; }

  /// Writes row i into out (length d).
  void row(std::size_t i, std::span<double> out) const {
    if (i >= big_dim_) throw std::out_of_range("ProjectionMatrix::row: index out of range");
    if (out.size() != small_dim_) throw std::invalid_argument("ProjectionMatrix::row: bad output size");
    const auto lo = static_cast<std::uint32_t>(i);
    const auto hi = static_cast<std::uint32_t>(static_cast<std::uint64_t>(i) >> 32);
    std::size_t j = 0;
    for (std::uint32_t block = 0; j < small_dim_; ++block) {
      const auto [g0, g1] = normal_pair(seed_, block, lo, hi);
      out[j++] = g0 * scale_;
      if (j < small_dim_) out[j++] = g1 * scale_;
    }
  }

  Vector row(std::size_t i) const {
    Vector r(static_cast<Eigen::Index>(small_dim_));
    row(i, {r.data(), small_dim_});
    return r;
  }

  /// Φᵀx.
  Vector project(const SparseVec& x) const {
    detail::require_same_dim(big_dim_, x.dim(), "project");
    Vector z = Vector::Zero(static_cast<Eigen::Index>(small_dim_));
    Vector r(static_cast<Eigen::Index>(small_dim_));
    for (const auto& e : x.entries()) {
      row(e.index, {r.data(), small_dim_});
      z.noalias() += e.value * r;
    }
    return z;
  }

  /// Dense D×d copy. Only sensible for small D.
  DenseMatrix materialize() const {
    DenseMatrix m(static_cast<Eigen::Index>(big_dim_), static_cast<Eigen::Index>(small_dim_));
    for (std::size_t i = 0; i < big_dim_; ++i) {
      row(i, {m.row(static_cast<Eigen::Index>(i)).data(), small_dim_});
    }
    return m;
  }

 private:
  std::size_t big_dim_;
  std::size_t small_dim_;
  std::uint64_t seed_;
  double scale_;
};

/// High-probability bound on inner-product distortion of a random projection
/// over a k-sparse space: ε = √((48k/d)·ln(4D/ξ)).
struct BiasBound {
  std::size_t k;
  std::size_t big_dim;
  std::size_t small_dim;
  double xi;
  double eps_prj;
};

inline BiasBound eps_prj(std::size_t k, std::size_t big_dim, std::size_t small_dim, double xi) {
  if (k < 1) throw std::domain_error("eps_prj: k must be >= 1");
  if (small_dim < 1 || big_dim < small_dim) throw std::domain_error("eps_prj: need D >= d >= 1");
  if (!(xi > 0.0 && xi < 1.0)) throw std::domain_error("eps_prj: xi must lie in (0, 1)");
  const double eps = std::sqrt(48.0 * static_cast<double>(k) / static_cast<double>(small_dim) *
                               std::log(4.0 * static_cast<double>(big_dim) / xi));
  return {k, big_dim, small_dim, xi, eps};
}

/// Smallest d with eps_prj(k, D, d, ξ) ≤ target.
inline std::size_t projection_size_for(std::size_t k, std::size_t big_dim, double xi, double target) {
  if (!(target > 0.0)) throw std::domain_error("projection_size_for: target must be positive");
  if (!(xi > 0.0 && xi < 1.0)) throw std::domain_error("projection_size_for: xi must lie in (0, 1)");
  const double exact = 48.0 * static_cast<double>(k) *
                       std::log(4.0 * static_cast<double>(big_dim) / xi) / (target * target);
  auto d = static_cast<std::size_t>(std::ceil(exact));
  while (d > 1 && eps_prj(k, big_dim, d - 1, xi).eps_prj <= target) --d;
  while (eps_prj(k, big_dim, d, xi).eps_prj > target) ++d;
  return d;
}

}  // namespace cbebf
