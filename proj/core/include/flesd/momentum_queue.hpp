#pragma once

#include <cstddef>
#include <deque>
#include <span>
#include <vector>

#include "flesd/matrix.hpp"

namespace flesd {

// Bounded FIFO of (public index, unit representation) anchors.
class MomentumQueue {
 public:
  struct Entry {
    std::size_t public_index;
    std::vector<double> representation;
  };

  explicit MomentumQueue(std::size_t capacity);

  // Appends rows of `reps` tagged with `indices`, evicting the oldest entries
  // beyond capacity. Validates every row before touching the queue; a row
  // whose norm is not 1 within 1e-9 raises DegenerateInputError.
  void push(std::span<const std::size_t> indices, const Matrix& reps);

  std::size_t size() const { return entries_.size(); }
  std::size_t capacity() const { return capacity_; }
  bool empty() const { return entries_.empty(); }
  const std::deque<Entry>& entries() const { return entries_; }

  // Oldest first.
  Matrix representations() const;
  std::vector<std::size_t> indices() const;

 private:
  std::size_t capacity_;
  std::deque<Entry> entries_;
};

}  // namespace flesd
