#pragma once

#include "dfree/ad/params.hpp"

namespace dfree::ad {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-5;
};

// Bias-corrected Adam update of every parameter from its grad slot; bumps
// the store's step counter. Throws NonFiniteGradient, leaving parameters,
// moments and the counter untouched, when any gradient is NaN or inf.
void adam_step(ParamStore& params, const AdamConfig& cfg);

}  // namespace dfree::ad
