#pragma once

#include <cstdint>

#include "plastic/ad/meta_params.hpp"

namespace plastic::train {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// First/second moment accumulators, one matrix per MetaParams slot.
struct OptimizerState {
  ad::Gradients m;
  ad::Gradients v;
  std::int64_t step = 0;

  static OptimizerState zeros_like(const ad::MetaParams& meta);
};

// Bias-corrected adaptive-moment update:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
// Throws std::runtime_error on a non-finite gradient before touching state.
void optimizer_step(ad::MetaParams& meta, const ad::Gradients& grads, OptimizerState& opt,
                    double lr, const AdamHyper& hyper = {});

}  // namespace plastic::train
