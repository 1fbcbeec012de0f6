#pragma once

#include <vector>

#include "dfree/ad/optim.hpp"
#include "dfree/agent/policy.hpp"
#include "dfree/rl/config.hpp"
#include "dfree/rl/rollout.hpp"

namespace dfree::rl {

struct LossReport {
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double aux_loss = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  int optimizer_steps = 0;
  // A non-finite loss was met; parameters and moments were rolled back.
  bool aborted = false;
};

// Scalar parts of one minibatch loss, as evaluated on the tape.
struct LossParts {
  double policy = 0.0;
  double value = 0.0;
  double entropy = 0.0;
  double aux = 0.0;
  double approx_kl = 0.0;
  double clip_fraction = 0.0;
};

// Total loss for the sequence chunks of `workers` in `buf`:
//   policy + value_coef * value - entropy_coef * entropy + aux_weight * aux
// with the clipped surrogate, 0.5 squared-error value loss, focal loss on
// the executed action's disturbance output (Disturb) or masked
// cross-entropy of the inverse-dynamics head (InvDyn).
Var ppo_minibatch_loss(ad::Tape& t, agent::PolicyNet& net, const RolloutBuffer& buf, const std::vector<int>& workers,
                       const PPOConfig& cfg, AuxMode aux, LossParts* parts = nullptr);

// epochs x minibatches optimizer steps over shuffled worker chunks. On a
// non-finite loss the whole update is abandoned and the parameters and
// optimizer state are restored.
LossReport ppo_update(agent::PolicyNet& net, const RolloutBuffer& buf, const PPOConfig& cfg, AuxMode aux, Rng& rng);

}  // namespace dfree::rl
