#include "flesd/finite_diff.hpp"

#include <algorithm>
#include <cmath>

#include "flesd/error.hpp"

namespace flesd {

Matrix finite_diff_gradient(const std::function<double()>& loss_fn, Matrix& value,
                            double epsilon) {
  if (!(epsilon > 0.0)) throw ParameterError("finite_diff_gradient: epsilon must be > 0");
  Matrix grad(value.rows(), value.cols());
  auto v = value.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double saved = v[i];
    v[i] = saved + epsilon;
    const double up = loss_fn();
    v[i] = saved - epsilon;
    const double down = loss_fn();
    v[i] = saved;
    grad.data()[i] = (up - down) / (2.0 * epsilon);
  }
  return grad;
}

double relative_error(const Matrix& a, const Matrix& b) {
  const Matrix d = a - b;
  const double nd = l2_norm(d.data());
  const double scale = std::max(l2_norm(a.data()), l2_norm(b.data()));
  if (scale == 0.0) return 0.0;
  return nd / scale;
}

}  // namespace flesd
