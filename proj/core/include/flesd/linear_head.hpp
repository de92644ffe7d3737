#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "flesd/matrix.hpp"
#include "flesd/tape.hpp"

namespace flesd {

// Softmax classifier on top of representations: logits = z W + b.
struct LinearHead {
  ParamTensor weight;  // d x C
  ParamTensor bias;    // 1 x C

  static LinearHead zeros(std::size_t in_dim, std::size_t num_classes);
  // Glorot-uniform weights, zero bias.
  static LinearHead glorot(std::size_t in_dim, std::size_t num_classes, std::uint64_t seed);
  std::size_t num_classes() const { return weight.value.cols(); }
  std::vector<ParamTensor*> tensors() { return {&weight, &bias}; }

  Matrix logits(const Matrix& reps) const;
  Var logits(Tape& tape, Var reps);
};

// Mean softmax cross-entropy of integer labels, as a 1x1 node.
Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels);
double softmax_cross_entropy(const Matrix& logits, std::span<const int> labels);

std::vector<int> argmax_rows(const Matrix& logits);
double accuracy(std::span<const int> predicted, std::span<const int> labels);

}  // namespace flesd
