#include "flesd/linear_head.hpp"

#include <algorithm>
#include <cmath>

#include "flesd/error.hpp"
#include "flesd/rng.hpp"

namespace flesd {

LinearHead LinearHead::zeros(std::size_t in_dim, std::size_t num_classes) {
  if (num_classes < 1) throw ParameterError("LinearHead: need at least one class");
  return LinearHead{ParamTensor(Matrix(in_dim, num_classes)), ParamTensor(Matrix(1, num_classes))};
}

LinearHead LinearHead::glorot(std::size_t in_dim, std::size_t num_classes, std::uint64_t seed) {
  LinearHead h = zeros(in_dim, num_classes);
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(in_dim + num_classes));
  std::uniform_real_distribution<double> unif(-bound, bound);
  for (double& v : h.weight.value.data()) v = unif(rng);
  return h;
}

Matrix LinearHead::logits(const Matrix& reps) const {
  return add_row_bias(matmul(reps, weight.value), bias.value);
}

Var LinearHead::logits(Tape& tape, Var reps) {
  return add_row_bias(tape, matmul(tape, reps, tape.param(weight)), tape.param(bias));
}

namespace {

// Row-wise softmax probabilities and the mean negative log-likelihood.
double cross_entropy_forward(const Matrix& logits, std::span<const int> labels, Matrix& probs) {
  if (logits.rows() != labels.size()) {
    throw DimensionError("softmax_cross_entropy: label count differs from logit rows");
  }
  if (labels.empty()) throw DegenerateInputError("softmax_cross_entropy: empty batch");
  probs = softmax_rows(logits, 1.0);
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= logits.cols()) {
      throw DimensionError("softmax_cross_entropy: label outside the head's classes");
    }
    auto row = logits.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (double v : row) z += std::exp(v - mx);
    loss += mx + std::log(z) - row[static_cast<std::size_t>(y)];
  }
  return loss / static_cast<double>(labels.size());
}

}  // namespace

Var softmax_cross_entropy(Tape& tape, Var logits, std::span<const int> labels) {
  Matrix probs;
  const double loss = cross_entropy_forward(tape.value(logits), labels, probs);
  std::vector<int> y(labels.begin(), labels.end());
  return tape.record(Matrix(1, 1, loss), {logits},
                     [logits, probs = std::move(probs), y = std::move(y)](Tape& tp,
                                                                         const Matrix& g) {
                       Matrix d = probs;
                       const double inv_n = g(0, 0) / static_cast<double>(y.size());
                       for (std::size_t i = 0; i < y.size(); ++i) {
                         d(i, static_cast<std::size_t>(y[i])) -= 1.0;
                       }
                       tp.accumulate(logits, inv_n * d);
                     });
}

double softmax_cross_entropy(const Matrix& logits, std::span<const int> labels) {
  Matrix probs;
  return cross_entropy_forward(logits, labels, probs);
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    out[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return out;
}

double accuracy(std::span<const int> predicted, std::span<const int> labels) {
  if (predicted.size() != labels.size()) throw DimensionError("accuracy: length mismatch");
  if (labels.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += predicted[i] == labels[i] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

}  // namespace flesd
