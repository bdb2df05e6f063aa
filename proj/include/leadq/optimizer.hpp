#pragma once

#include "leadq/param_vector.hpp"

namespace leadq {

struct OptimizerState {
  enum class Kind { sgd, adam };

  Kind kind = Kind::sgd;
  double lr = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Adam moments; empty for sgd.
  ParamVector m;
  ParamVector v;
  long step_count = 0;

  static OptimizerState make_sgd(double lr);
  static OptimizerState make_adam(double lr, const LayoutPtr& layout);
};

// In-place update; throws NumericError naming the first bad segment if the
// gradient is non-finite.
void optimizer_step(OptimizerState& state, ParamVector& params,
                    const ParamVector& grads);

}  // namespace leadq
