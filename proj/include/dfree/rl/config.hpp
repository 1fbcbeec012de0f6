#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace dfree::rl {

enum class AuxMode : std::uint8_t { None, Disturb, InvDyn };
enum class Regime : std::uint8_t { Stage1, ScratchRPrime, Lagrangian, Curriculum };

std::string_view aux_mode_name(AuxMode m);
AuxMode parse_aux_mode(std::string_view s);
std::string_view regime_name(Regime r);
Regime parse_regime(std::string_view s);

struct PPOConfig {
  double gamma = 0.99;
  double gae_lambda = 0.95;
  double clip_eps = 0.2;
  int epochs = 4;
  // Workers are split into this many sequence-chunk minibatches.
  int minibatches = 4;
  double value_coef = 0.5;
  double entropy_coef = 0.01;
  double lr = 3e-4;
  double max_grad_norm = 0.5;
  bool normalize_advantage = false;
  double aux_weight = 0.1;
  double focal_gamma = 2.0;
  double focal_alpha = 0.5;
  int rollout_length = 64;
  int workers = 16;

  // Throws ConfigError on out-of-range values.
  void validate() const;
};

struct LagrangianConfig {
  double lambda0 = 1.0;
  double lr = 0.05;
  // Discount per-step costs with PPOConfig::gamma when estimating J_C.
  bool discounted = true;
};

struct LagrangianState {
  double lambda = 0.0;
  double lambda0 = 0.0;
  double lr = 0.05;
  // Latest J_C estimate fed to the update.
  double jc_estimate = 0.0;
};

// lambda_{k+1} = max(0, lambda_k + lr * J_C).
LagrangianState lagrangian_update(const LagrangianState& s, double jc_estimate);

struct CurriculumSchedule {
  std::int64_t stage1_frames = 300'000;
  std::int64_t stage2_frames = 400'000;
  double stage2_lambda = 15.0;
};

}  // namespace dfree::rl
