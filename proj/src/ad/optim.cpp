#include "dfree/ad/optim.hpp"

#include <cmath>

#include "dfree/errors.hpp"

namespace dfree::ad {

void adam_step(ParamStore& params, const AdamConfig& cfg) {
  if (!params.grads_finite()) throw NonFiniteGradient("non-finite gradient; update skipped");
  const std::int64_t t = params.step() + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
  for (auto& [_, p] : params) {
    p.m = cfg.beta1 * p.m + (1.0 - cfg.beta1) * p.grad;
    p.v = cfg.beta2 * p.v + (1.0 - cfg.beta2) * p.grad.cwiseAbs2();
    p.value.array() -= cfg.lr * (p.m.array() / c1) / ((p.v.array() / c2).sqrt() + cfg.eps);
  }
  params.set_step(t);
}

}  // namespace dfree::ad
