#pragma once

// Brute-force reference implementations used by the unit and acceptance
// tests. Everything here is written as plain loops over the definitions and
// shares no code with the library kernels it checks.

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <vector>

#include "flesd/encoder.hpp"
#include "flesd/matrix.hpp"
#include "flesd/rng.hpp"
#include "flesd/similarity.hpp"

namespace flesd::oracle {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

inline Matrix random_unit_rows(std::size_t rows, std::size_t cols, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < cols; ++j) {
      m(i, j) = n(rng);
      s += m(i, j) * m(i, j);
    }
    s = std::sqrt(s);
    for (std::size_t j = 0; j < cols; ++j) m(i, j) /= s;
  }
  return m;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

inline double row_dot(const Matrix& a, std::size_t i, const Matrix& b, std::size_t j) {
  double s = 0.0;
  for (std::size_t c = 0; c < a.cols(); ++c) s += a(i, c) * b(j, c);
  return s;
}

// Symmetric NT-Xent over the joint batch [a; b].
inline double nt_xent(const Matrix& a, const Matrix& b, double tau) {
  const std::size_t n = a.rows();
  Matrix views(2 * n, a.cols());
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < a.cols(); ++c) {
      views(i, c) = a(i, c);
      views(n + i, c) = b(i, c);
    }
  double total = 0.0;
  for (std::size_t i = 0; i < 2 * n; ++i) {
    const std::size_t pos = i < n ? i + n : i - n;
    double denom = 0.0;
    for (std::size_t k = 0; k < 2 * n; ++k) {
      if (k != i) denom += std::exp(row_dot(views, i, views, k) / tau);
    }
    total += -std::log(std::exp(row_dot(views, i, views, pos) / tau) / denom);
  }
  return total / static_cast<double>(2 * n);
}

// One-sided form: anchors a_i, positive b_i, negatives b_j (j != i).
inline double info_nce_one_sided(const Matrix& a, const Matrix& b, double tau) {
  double total = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double denom = 0.0;
    for (std::size_t j = 0; j < b.rows(); ++j) denom += std::exp(row_dot(a, i, b, j) / tau);
    total += -std::log(std::exp(row_dot(a, i, b, i) / tau) / denom);
  }
  return total / static_cast<double>(a.rows());
}

// Gram matrix of the columns of r.
inline Matrix similarity(const Matrix& r) {
  const std::size_t n = r.cols();
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t c = 0; c < r.rows(); ++c) s += r(c, i) * r(c, j);
      m(i, j) = s;
    }
  return m;
}

inline Matrix sharpen(const Matrix& m, double tau) {
  Matrix out(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) out(i, j) = std::exp(m(i, j) / tau);
  return out;
}

inline Matrix mean(const std::vector<Matrix>& ms) {
  Matrix out(ms.front().rows(), ms.front().cols());
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) {
      double s = 0.0;
      for (const auto& m : ms) s += m(i, j);
      out(i, j) = s / static_cast<double>(ms.size());
    }
  return out;
}

inline std::vector<double> target_probs(const Matrix& m, std::size_t query,
                                        const std::vector<std::size_t>& anchors) {
  std::vector<double> p;
  double z = 0.0;
  for (std::size_t j : anchors) {
    if (j == query) continue;
    z += m(query, j);
  }
  for (std::size_t j : anchors) {
    if (j != query) p.push_back(m(query, j) / z);
  }
  return p;
}

inline std::vector<double> softmax(const std::vector<double>& logits, double tau) {
  std::vector<double> e(logits.size());
  double z = 0.0;
  for (std::size_t j = 0; j < logits.size(); ++j) {
    e[j] = std::exp(logits[j] / tau);
    z += e[j];
  }
  for (double& v : e) v /= z;
  return e;
}

inline double kl(const std::vector<double>& p, const std::vector<double>& q) {
  double s = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) s += p[j] * std::log(p[j] / q[j]);
  return s;
}

// Entrywise sum_k w_k * theta_k over every parameter tensor.
inline std::vector<Matrix> weighted_sum(const std::vector<EncoderParams>& params,
                                        const std::vector<double>& weights) {
  std::vector<Matrix> out;
  const auto first = params.front().tensors();
  for (std::size_t t = 0; t < first.size(); ++t) {
    Matrix acc(first[t]->value.rows(), first[t]->value.cols());
    for (std::size_t i = 0; i < acc.rows(); ++i)
      for (std::size_t j = 0; j < acc.cols(); ++j) {
        double s = 0.0;
        for (std::size_t k = 0; k < params.size(); ++k) {
          s += weights[k] * params[k].tensors()[t]->value(i, j);
        }
        acc(i, j) = s;
      }
    out.push_back(std::move(acc));
  }
  return out;
}

// Symmetric, strictly positive N x N matrix shaped like a sharpened target.
inline EnsembleTarget random_target(std::size_t n, Rng& rng, double tau = 0.1) {
  const Matrix r = random_unit_rows(n, 3, rng);
  EnsembleTarget t;
  t.target_temperature = tau;
  t.entries = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) t.entries(i, j) = std::exp(row_dot(r, i, r, j) / tau);
  return t;
}

inline EncoderConfig small_encoder(std::vector<std::size_t> sizes, std::uint64_t seed,
                                   Activation act = Activation::kTanh) {
  return EncoderConfig{std::move(sizes), act, seed};
}

// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
inline std::vector<double> symmetric_eigenvalues(Matrix a) {
  const std::size_t n = a.rows();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a(p, q)) < 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a(i, i);
  std::sort(ev.begin(), ev.end());
  return ev;
}

}  // namespace flesd::oracle
