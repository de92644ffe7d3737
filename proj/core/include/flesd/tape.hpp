#pragma once

// A small reverse-mode gradient engine over row-batched matrices.
//
// A Tape records every operation of one forward pass. Each recorded node
// keeps its value and, if any input needs a gradient, a backward closure.
// Tape::backward(root) seeds d(root)/d(root) = 1 and walks the nodes in
// reverse insertion order; gradients reaching a parameter leaf are added to
// that ParamTensor's `grad`. Tapes are single-use and single-threaded.

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

#include "flesd/matrix.hpp"

namespace flesd {

// A trainable matrix plus its accumulated gradient.
struct ParamTensor {
  Matrix value;
  Matrix grad;

  ParamTensor() = default;
  explicit ParamTensor(Matrix v) : value(std::move(v)), grad(value.rows(), value.cols()) {}

  void zero_grad() { grad = Matrix(value.rows(), value.cols()); }
};

// Handle to a node on a Tape.
struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix& out_grad)>;

  // Leaf without gradient.
  Var constant(Matrix value);
  // Leaf whose gradient flows into `p.grad` on backward(). `p` must outlive the tape.
  Var param(ParamTensor& p);

  // Records an op. `backward` is dropped when no parent requires a gradient.
  Var record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward);

  const Matrix& value(Var v) const { return nodes_.at(v.id).value; }
  bool requires_grad(Var v) const { return nodes_.at(v.id).requires_grad; }
  double scalar(Var v) const;

  // Adds g into the gradient slot of v (no-op for constants).
  void accumulate(Var v, const Matrix& g);

  // root must be 1x1.
  void backward(Var root);

  // Gradient of the last backward() at v; empty when none reached it.
  const Matrix& grad(Var v) const { return nodes_.at(v.id).grad; }

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    ParamTensor* param = nullptr;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
};

// Differentiable ops. Forward values are computed with the same kernels as
// the plain Matrix functions, so taped and untaped passes agree bit-exactly.
Var matmul(Tape& t, Var a, Var b);
Var add_row_bias(Tape& t, Var x, Var bias);  // bias is 1 x cols
Var relu(Tape& t, Var x);
Var tanh(Tape& t, Var x);
Var normalize_rows(Tape& t, Var x);          // throws DegenerateInputError on zero rows
Var add(Tape& t, Var a, Var b);
Var scale(Tape& t, Var x, double s);
Var sum(Tape& t, Var x);                     // 1x1
// sum((x - ref)^2), 1x1
Var squared_distance(Tape& t, Var x, const Matrix& ref);

// Untaped forward kernels shared with the ops above.
Matrix add_row_bias(const Matrix& x, const Matrix& bias);
Matrix relu(const Matrix& x);
Matrix tanh(const Matrix& x);

}  // namespace flesd
