#include "dfree/sim/reward.hpp"

namespace dfree::sim {

double base_reward(const RewardParts& parts, const RewardConfig& cfg) {
  double r = cfg.step_penalty;
  if (parts.failed_action) r += cfg.failed_action_penalty;
  r += cfg.shaping_per_m * (parts.prev_goal_dist_m - parts.goal_dist_m);
  if (parts.first_pickup) r += cfg.pickup_bonus;
  if (parts.success) r += cfg.success_reward;
  return r;
}

}  // namespace dfree::sim
