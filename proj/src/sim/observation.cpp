#include "dfree/sim/observation.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace dfree::sim {

Observation observe(const WorldState& state, const GridScene& scene, int k) {
  if (k < 3 || k % 2 == 0) throw std::invalid_argument("observation window must be odd and >= 3");
  Observation o;
  o.k = k;
  o.window.assign(static_cast<std::size_t>(k * k * kNumChannels), 0.0);
  o.holding = state.holding;
  o.prev_action = state.last_action;

  const Cell fwd = forward_of(state.heading);
  const Cell right = right_of(state.heading);
  const int half = k / 2;
  const Cell target = state.target().cell;

  for (int row = 0; row < k; ++row) {
    for (int col = 0; col < k; ++col) {
      const Cell c = state.agent_cell + (half - row) * fwd + (col - half) * right;
      const auto base = static_cast<std::size_t>((row * k + col) * kNumChannels);
      if (scene.is_wall(c)) {
        o.window[base + kWallChannel] = 1.0;
        continue;
      }
      if (c == target) o.window[base + kTargetChannel] = 1.0;
    }
  }
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    if (static_cast<int>(i) == state.target_object_id) continue;
    const Cell rel = state.objects[i].cell - state.agent_cell;
    const int ahead = rel.x * fwd.x + rel.y * fwd.y;
    const int side = rel.x * right.x + rel.y * right.y;
    const int row = half - ahead;
    const int col = half + side;
    if (row < 0 || row >= k || col < 0 || col >= k) continue;
    o.window[static_cast<std::size_t>((row * k + col) * kNumChannels + kClutterChannel)] = 1.0;
  }

  const Cell goal = state.holding ? state.goal_cell : target;
  const Cell rel = goal - state.agent_cell;
  const int ahead = rel.x * fwd.x + rel.y * fwd.y;
  const int side = rel.x * right.x + rel.y * right.y;
  o.goal_rho = std::sqrt(static_cast<double>(ahead * ahead + side * side));
  if (ahead == 0 && side == 0) {
    o.goal_theta = 0.0;
  } else {
    o.goal_theta = std::atan2(static_cast<double>(side), static_cast<double>(ahead));
    if (o.goal_theta <= -std::numbers::pi) o.goal_theta = std::numbers::pi;
  }
  return o;
}

}  // namespace dfree::sim
