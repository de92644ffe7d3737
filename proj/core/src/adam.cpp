#include "flesd/adam.hpp"

#include <cmath>

#include "flesd/error.hpp"

namespace flesd {

AdamState AdamState::for_param(const ParamTensor& p, const AdamOptions& opts) {
  AdamState s;
  s.m1 = Matrix(p.value.rows(), p.value.cols());
  s.m2 = Matrix(p.value.rows(), p.value.cols());
  s.lr = opts.lr;
  s.beta1 = opts.beta1;
  s.beta2 = opts.beta2;
  s.eps = opts.eps;
  return s;
}

void adam_step(ParamTensor& param, AdamState& state) {
  if (!param.grad.same_shape(param.value) || !state.m1.same_shape(param.value) ||
      !state.m2.same_shape(param.value)) {
    throw DimensionError("adam_step: parameter/gradient/moment shapes differ");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  auto v = param.value.data();
  auto g = param.grad.data();
  auto m1 = state.m1.data();
  auto m2 = state.m2.data();
  for (std::size_t i = 0; i < v.size(); ++i) {
    m1[i] = state.beta1 * m1[i] + (1.0 - state.beta1) * g[i];
    m2[i] = state.beta2 * m2[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double mhat = m1[i] / c1;
    const double vhat = m2[i] / c2;
    v[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

AdamOptimizer::AdamOptimizer(std::span<ParamTensor* const> params, const AdamOptions& opts) {
  states_.reserve(params.size());
  for (const ParamTensor* p : params) states_.push_back(AdamState::for_param(*p, opts));
}

void AdamOptimizer::step(std::span<ParamTensor* const> params) {
  if (params.size() != states_.size()) {
    throw DimensionError("AdamOptimizer::step: parameter count changed");
  }
  for (std::size_t i = 0; i < params.size(); ++i) adam_step(*params[i], states_[i]);
}

}  // namespace flesd
