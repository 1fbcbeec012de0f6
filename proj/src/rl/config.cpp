#include "dfree/rl/config.hpp"

#include <algorithm>

#include "dfree/errors.hpp"

namespace dfree::rl {

std::string_view aux_mode_name(AuxMode m) {
  switch (m) {
    case AuxMode::None: return "none";
    case AuxMode::Disturb: return "disturb";
    case AuxMode::InvDyn: return "invdyn";
  }
  return "?";
}

AuxMode parse_aux_mode(std::string_view s) {
  if (s == "none") return AuxMode::None;
  if (s == "disturb") return AuxMode::Disturb;
  if (s == "invdyn") return AuxMode::InvDyn;
  throw ConfigError("unknown aux_mode '" + std::string(s) + "' (none, disturb, invdyn)");
}

std::string_view regime_name(Regime r) {
  switch (r) {
    case Regime::Stage1: return "stage1";
    case Regime::ScratchRPrime: return "scratch_rprime";
    case Regime::Lagrangian: return "lagrangian";
    case Regime::Curriculum: return "curriculum";
  }
  return "?";
}

Regime parse_regime(std::string_view s) {
  if (s == "stage1") return Regime::Stage1;
  if (s == "scratch_rprime") return Regime::ScratchRPrime;
  if (s == "lagrangian") return Regime::Lagrangian;
  if (s == "curriculum") return Regime::Curriculum;
  throw ConfigError("unknown regime '" + std::string(s) + "' (stage1, scratch_rprime, lagrangian, curriculum)");
}

void PPOConfig::validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw ConfigError(msg);
  };
  need(gamma > 0.0 && gamma <= 1.0, "ppo.gamma must be in (0, 1]");
  need(gae_lambda >= 0.0 && gae_lambda <= 1.0, "ppo.gae_lambda must be in [0, 1]");
  need(clip_eps > 0.0, "ppo.clip_eps must be > 0");
  need(epochs >= 1, "ppo.epochs must be >= 1");
  need(workers >= 1, "ppo.workers must be >= 1");
  need(minibatches >= 1 && minibatches <= workers && workers % minibatches == 0,
       "ppo.minibatches must divide ppo.workers");
  need(rollout_length >= 1, "ppo.rollout_length must be >= 1");
  need(lr > 0.0, "ppo.lr must be > 0");
  need(max_grad_norm > 0.0, "ppo.max_grad_norm must be > 0");
  need(aux_weight >= 0.0, "ppo.aux_weight must be >= 0");
  need(focal_alpha >= 0.0 && focal_alpha <= 1.0, "ppo.focal_alpha must be in [0, 1]");
  need(focal_gamma >= 0.0, "ppo.focal_gamma must be >= 0");
}

LagrangianState lagrangian_update(const LagrangianState& s, double jc_estimate) {
  LagrangianState next = s;
  next.lambda = std::max(0.0, s.lambda + s.lr * jc_estimate);
  next.jc_estimate = jc_estimate;
  return next;
}

}  // namespace dfree::rl
