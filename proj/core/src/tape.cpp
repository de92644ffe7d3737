#include "flesd/tape.hpp"

#include <cmath>
#include <string>

#include "flesd/error.hpp"

namespace flesd {

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, nullptr, false});
  return Var{nodes_.size() - 1};
}

Var Tape::param(ParamTensor& p) {
  if (!p.grad.same_shape(p.value)) p.zero_grad();
  nodes_.push_back(Node{p.value, {}, {}, &p, true});
  return Var{nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> parents, BackwardFn backward) {
  bool needs = false;
  for (Var p : parents) needs = needs || nodes_.at(p.id).requires_grad;
  Node n{std::move(value), {}, {}, nullptr, needs};
  if (needs) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

double Tape::scalar(Var v) const {
  const Matrix& m = value(v);
  if (m.rows() != 1 || m.cols() != 1) throw DimensionError("Tape::scalar: node is not 1x1");
  return m(0, 0);
}

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_.at(v.id);
  if (!n.requires_grad) return;
  if (!g.same_shape(n.value)) throw DimensionError("Tape::accumulate: gradient shape mismatch");
  if (n.grad.empty() && !n.value.empty()) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var root) {
  if (root.id >= nodes_.size()) throw DimensionError("Tape::backward: unknown node");
  for (auto& n : nodes_) n.grad = Matrix();
  if (!nodes_[root.id].requires_grad) return;
  scalar(root);
  nodes_[root.id].grad = Matrix(1, 1, 1.0);
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.backward) {
      // Copy: the closure may append to other nodes' grads only, but keep it safe.
      const Matrix g = n.grad;
      n.backward(*this, g);
    }
    if (n.param != nullptr) n.param->grad += n.grad;
  }
}

Matrix add_row_bias(const Matrix& x, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != x.cols()) {
    throw DimensionError("add_row_bias: bias must be 1x" + std::to_string(x.cols()));
  }
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i) {
    auto r = out.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias(0, j);
  }
  return out;
}

Matrix relu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return out;
}

Matrix tanh(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = std::tanh(v);
  return out;
}

Var matmul(Tape& t, Var a, Var b) {
  return t.record(matmul(t.value(a), t.value(b)), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    if (tp.requires_grad(a)) tp.accumulate(a, matmul_transposed(g, tp.value(b)));
    if (tp.requires_grad(b)) tp.accumulate(b, transposed_matmul(tp.value(a), g));
  });
}

Var add_row_bias(Tape& t, Var x, Var bias) {
  return t.record(add_row_bias(t.value(x), t.value(bias)), {x, bias},
                  [x, bias](Tape& tp, const Matrix& g) {
                    tp.accumulate(x, g);
                    if (tp.requires_grad(bias)) {
                      Matrix db(1, g.cols());
                      for (std::size_t i = 0; i < g.rows(); ++i)
                        for (std::size_t j = 0; j < g.cols(); ++j) db(0, j) += g(i, j);
                      tp.accumulate(bias, db);
                    }
                  });
}

Var relu(Tape& t, Var x) {
  Var out{t.size()};
  return t.record(relu(t.value(x)), {x}, [x, out](Tape& tp, const Matrix& g) {
    Matrix dx = g;
    const Matrix& y = tp.value(out);
    for (std::size_t i = 0; i < dx.size(); ++i)
      if (!(y.data()[i] > 0.0)) dx.data()[i] = 0.0;
    tp.accumulate(x, dx);
  });
}

Var tanh(Tape& t, Var x) {
  Var out{t.size()};
  return t.record(tanh(t.value(x)), {x}, [x, out](Tape& tp, const Matrix& g) {
    Matrix dx = g;
    const Matrix& y = tp.value(out);
    for (std::size_t i = 0; i < dx.size(); ++i) {
      const double yi = y.data()[i];
      dx.data()[i] *= 1.0 - yi * yi;
    }
    tp.accumulate(x, dx);
  });
}

Var normalize_rows(Tape& t, Var x) {
  const Matrix& xv = t.value(x);
  std::vector<double> norms(xv.rows());
  for (std::size_t i = 0; i < xv.rows(); ++i) norms[i] = l2_norm(xv.row(i));
  Var out{t.size()};
  return t.record(l2_normalize_rows(xv), {x},
                  [x, out, norms = std::move(norms)](Tape& tp, const Matrix& g) {
                    // d(x/|x|) = (g - y <g, y>) / |x|
                    const Matrix& y = tp.value(out);
                    Matrix dx(g.rows(), g.cols());
                    for (std::size_t i = 0; i < g.rows(); ++i) {
                      const double gy = dot(g.row(i), y.row(i));
                      for (std::size_t j = 0; j < g.cols(); ++j)
                        dx(i, j) = (g(i, j) - y(i, j) * gy) / norms[i];
                    }
                    tp.accumulate(x, dx);
                  });
}

Var add(Tape& t, Var a, Var b) {
  return t.record(t.value(a) + t.value(b), {a, b}, [a, b](Tape& tp, const Matrix& g) {
    tp.accumulate(a, g);
    tp.accumulate(b, g);
  });
}

Var scale(Tape& t, Var x, double s) {
  return t.record(s * t.value(x), {x}, [x, s](Tape& tp, const Matrix& g) {
    tp.accumulate(x, s * g);
  });
}

Var sum(Tape& t, Var x) {
  double s = 0.0;
  for (double v : t.value(x).data()) s += v;
  return t.record(Matrix(1, 1, s), {x}, [x](Tape& tp, const Matrix& g) {
    const Matrix& xv = tp.value(x);
    tp.accumulate(x, Matrix(xv.rows(), xv.cols(), g(0, 0)));
  });
}

Var squared_distance(Tape& t, Var x, const Matrix& ref) {
  Matrix diff = t.value(x) - ref;
  double s = 0.0;
  for (double v : diff.data()) s += v * v;
  return t.record(Matrix(1, 1, s), {x}, [x, diff = std::move(diff)](Tape& tp, const Matrix& g) {
    tp.accumulate(x, (2.0 * g(0, 0)) * diff);
  });
}

}  // namespace flesd
