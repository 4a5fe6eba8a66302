#pragma once

#include "cbebf/sparse_linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cbebf {

struct Interval {
  double low = 0.0;
  double high = 1.0;
};

/// Tile coding over a box: n_grids offset grids, each splitting every
/// dimension into tiles_per_dim tiles. Exactly one tile per grid is active,
/// with value 1/√n_grids so that encoded vectors have unit norm.
class TileCoder {
 public:
  /// offsets[g][j] is the shift of grid g along dimension j, in units of the
  /// normalized box, within [0, 1/tiles_per_dim).
  TileCoder(std::size_t tiles_per_dim, std::vector<Interval> bounds, std::vector<std::vector<double>> offsets)
      : tiles_(tiles_per_dim), bounds_(std::move(bounds)), offsets_(std::move(offsets)) {
    if (tiles_ < 1) throw std::invalid_argument("TileCoder: tiles_per_dim must be >= 1");
    if (bounds_.empty()) throw std::invalid_argument("TileCoder: need at least one dimension");
    if (offsets_.empty()) throw std::invalid_argument("TileCoder: need at least one grid");
    for (const auto& b : bounds_) {
      if (!(b.high > b.low)) throw std::invalid_argument("TileCoder: empty interval");
    }
    const double width = 1.0 / static_cast<double>(tiles_);
    for (const auto& grid : offsets_) {
      if (grid.size() != bounds_.size()) throw std::invalid_argument("TileCoder: offset arity mismatch");
      for (double o : grid) {
        if (!(o >= 0.0 && o < width)) throw std::invalid_argument("TileCoder: offset outside [0, 1/tiles)");
      }
    }
    grid_size_ = 1;
    for (std::size_t j = 0; j < bounds_.size(); ++j) {
      if (grid_size_ > SIZE_MAX / tiles_) throw std::overflow_error("TileCoder: feature space too large");
      grid_size_ *= tiles_;
    }
    value_ = 1.0 / std::sqrt(static_cast<double>(offsets_.size()));
  }

  /// Grids placed uniformly at random within one tile width.
  static TileCoder random(std::size_t n_dims, std::size_t tiles_per_dim, std::size_t n_grids,
                          std::vector<Interval> bounds, std::uint64_t seed) {
    if (bounds.size() != n_dims) throw std::invalid_argument("TileCoder: bounds arity mismatch");
    if (tiles_per_dim < 1) throw std::invalid_argument("TileCoder: tiles_per_dim must be >= 1");
    std::mt19937_64 rng(seed);
    const double width = 1.0 / static_cast<double>(tiles_per_dim);
    std::vector<std::vector<double>> offsets(n_grids, std::vector<double>(n_dims));
    for (auto& grid : offsets) {
      for (auto& o : grid) o = static_cast<double>(rng() >> 11) * 0x1.0p-53 * width;
    }
    return TileCoder(tiles_per_dim, std::move(bounds), std::move(offsets));
  }

  std::size_t n_dims() const noexcept { return bounds_.size(); }
  std::size_t tiles_per_dim() const noexcept { return tiles_; }
  std::size_t n_grids() const noexcept { return offsets_.size(); }
  /// D = n_grids · tiles_per_dim^n_dims.
  std::size_t dim() const noexcept { return n_grids() * grid_size_; }

  /// Points outside the bounds are clamped onto the box.
  SparseVec encode(std::span<const double> point) const {
    detail::require_same_dim(bounds_.size(), point.size(), "TileCoder::encode");
    const auto n = bounds_.size();
    std::vector<double> unit(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto& b = bounds_[j];
      const double u = (point[j] - b.low) / (b.high - b.low);
      if (std::isnan(u)) throw std::invalid_argument("TileCoder::encode: NaN coordinate");
      unit[j] = std::clamp(u, 0.0, 1.0);
    }
    const double t = static_cast<double>(tiles_);
    std::vector<SparseEntry> entries;
    entries.reserve(offsets_.size());
    for (std::size_t g = 0; g < offsets_.size(); ++g) {
      std::size_t cell = 0;
      for (std::size_t j = n; j-- > 0;) {
        const auto tile = std::min(static_cast<std::size_t>((unit[j] + offsets_[g][j]) * t), tiles_ - 1);
        cell = cell * tiles_ + tile;
      }
      entries.push_back({g * grid_size_ + cell, value_});
    }
    // grids occupy disjoint, increasing index blocks
    return SparseVec(dim(), std::move(entries));
  }

 private:
  std::size_t tiles_;
  std::vector<Interval> bounds_;
  std::vector<std::vector<double>> offsets_;
  std::size_t grid_size_ = 1;
  double value_ = 1.0;
};

}  // namespace cbebf
