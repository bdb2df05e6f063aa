#include "leadq/optimizer.hpp"

#include <cmath>

#include "leadq/errors.hpp"

namespace leadq {

OptimizerState OptimizerState::make_sgd(double lr) {
  OptimizerState s;
  s.kind = Kind::sgd;
  s.lr = lr;
  return s;
}

OptimizerState OptimizerState::make_adam(double lr, const LayoutPtr& layout) {
  OptimizerState s;
  s.kind = Kind::adam;
  s.lr = lr;
  s.m = ParamVector(layout);
  s.v = ParamVector(layout);
  return s;
}

void optimizer_step(OptimizerState& state, ParamVector& params,
                    const ParamVector& grads) {
  if (grads.size() != params.size()) {
    throw NumericError("optimizer_step: gradient length mismatch");
  }
  std::string bad = grads.first_nonfinite_segment();
  if (!bad.empty()) {
    throw NumericError("non-finite gradient in segment '" + bad + "'");
  }
  state.step_count += 1;
  if (state.kind == OptimizerState::Kind::sgd) {
    params.add_scaled(grads, -state.lr);
    return;
  }
  double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  double bc2 = 1.0 - std::pow(state.beta2, state.step_count);
  double* p = params.data();
  double* m = state.m.data();
  double* v = state.v.data();
  const double* g = grads.data();
  for (size_t i = 0; i < params.size(); ++i) {
    m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
    v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
    double mhat = m[i] / bc1;
    double vhat = v[i] / bc2;
    p[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
  }
}

}  // namespace leadq
