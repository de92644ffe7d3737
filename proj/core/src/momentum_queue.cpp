#include "flesd/momentum_queue.hpp"

#include <cmath>
#include <string>

#include "flesd/error.hpp"

namespace flesd {

MomentumQueue::MomentumQueue(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ParameterError("MomentumQueue: capacity must be >= 1");
}

void MomentumQueue::push(std::span<const std::size_t> indices, const Matrix& reps) {
  if (indices.size() != reps.rows()) {
    throw DimensionError("MomentumQueue::push: index count differs from representation rows");
  }
  if (!entries_.empty() && reps.rows() > 0 &&
      reps.cols() != entries_.front().representation.size()) {
    throw DimensionError("MomentumQueue::push: representation width changed");
  }
  for (std::size_t i = 0; i < reps.rows(); ++i) {
    const double norm = l2_norm(reps.row(i));
    if (!(std::abs(norm - 1.0) <= 1e-9)) {
      throw DegenerateInputError("MomentumQueue::push: representation " + std::to_string(i) +
                                 " is not unit-norm (norm " + std::to_string(norm) + ")");
    }
  }
  for (std::size_t i = 0; i < reps.rows(); ++i) {
    entries_.push_back(Entry{indices[i], {reps.row(i).begin(), reps.row(i).end()}});
    if (entries_.size() > capacity_) entries_.pop_front();
  }
}

Matrix MomentumQueue::representations() const {
  if (entries_.empty()) return {};
  const std::size_t d = entries_.front().representation.size();
  Matrix out(entries_.size(), d);
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& r = entries_[i].representation;
    std::copy(r.begin(), r.end(), out.row(i).begin());
  }
  return out;
}

std::vector<std::size_t> MomentumQueue::indices() const {
  std::vector<std::size_t> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(e.public_index);
  return out;
}

}  // namespace flesd
