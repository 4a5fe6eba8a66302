#pragma once

#include "cbebf/sparse_linalg.hpp"

#include <cstddef>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace cbebf {

struct Transition {
  SparseVec x;
  double reward = 0.0;
  SparseVec next;
};

/// Ordered transitions sharing one feature dimension.
class Trajectory {
 public:
  Trajectory() = default;

  explicit Trajectory(std::vector<Transition> transitions) : transitions_(std::move(transitions)) {
    for (const auto& t : transitions_) check_dims(t);
  }

  void push_back(Transition t) {
    check_dims(t);
    transitions_.push_back(std::move(t));
  }

  std::size_t size() const noexcept { return transitions_.size(); }
  bool empty() const noexcept { return transitions_.empty(); }
  /// Feature dimension D; 0 for an empty trajectory.
  std::size_t dim() const noexcept { return transitions_.empty() ? 0 : transitions_.front().x.dim(); }

  const Transition& operator[](std::size_t t) const { return transitions_[t]; }
  std::span<const Transition> transitions() const noexcept { return transitions_; }
  auto begin() const noexcept { return transitions_.begin(); }
  auto end() const noexcept { return transitions_.end(); }

  /// True when every x_next equals the following x.
  bool is_chained() const {
    for (std::size_t t = 0; t + 1 < transitions_.size(); ++t) {
      if (!(transitions_[t].next == transitions_[t + 1].x)) return false;
    }
    return true;
  }

 private:
  void check_dims(const Transition& t) const {
    if (t.x.dim() != t.next.dim()) throw std::invalid_argument("Trajectory: x and x_next differ in dimension");
    if (!transitions_.empty() && t.x.dim() != transitions_.front().x.dim()) {
      throw std::invalid_argument("Trajectory: inconsistent feature dimension");
    }
  }

  std::vector<Transition> transitions_;
};

}  // namespace cbebf
