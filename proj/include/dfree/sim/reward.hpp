#pragma once

namespace dfree::sim {

struct RewardConfig {
  double step_penalty = -0.01;
  double failed_action_penalty = -0.03;
  // Reward per meter of progress toward the active goal.
  double shaping_per_m = 1.0;
  double pickup_bonus = 5.0;
  double success_reward = 10.0;
  // Disturbance penalty coefficient of the penalized reward; 0 gives r_t.
  double lambda_disturb = 0.0;
};

// Events and goal distances of one transition.
struct RewardParts {
  bool failed_action = false;
  double prev_goal_dist_m = 0.0;
  double goal_dist_m = 0.0;
  bool first_pickup = false;
  bool success = false;
};

double base_reward(const RewardParts& parts, const RewardConfig& cfg);

// r'_t = r_t + lambda * (d_{t-1} - d_t). Undiscounted sums over an episode
// differ from the base sum by exactly -lambda * d_T.
inline double shaped_reward(double base, double d_prev, double d_curr, double lambda_disturb) {
  return base + lambda_disturb * (d_prev - d_curr);
}

}  // namespace dfree::sim
