#pragma once

#include <optional>
#include <vector>

#include "dfree/sim/actions.hpp"
#include "dfree/sim/grid.hpp"
#include "dfree/sim/world.hpp"

namespace dfree::sim {

enum ObsChannel : int { kWallChannel = 0, kClutterChannel = 1, kTargetChannel = 2, kNumChannels = 3 };

// What the agent senses at one step: an egocentric occupancy window with
// the agent at the center facing up, the active goal in polar form, the
// holding flag and the previous action.
struct Observation {
  int k = 0;
  // Row-major k x k x 3; row 0 is the farthest row ahead of the agent.
  std::vector<double> window;
  double goal_rho = 0.0;    // cells
  double goal_theta = 0.0;  // radians in (-pi, pi], positive to the right
  bool holding = false;
  std::optional<ActionId> prev_action;

  double at(int row, int col, int channel) const {
    return window[static_cast<std::size_t>((row * k + col) * kNumChannels + channel)];
  }
};

// Throws std::invalid_argument when k is even or below 3.
Observation observe(const WorldState& state, const GridScene& scene, int k);

}  // namespace dfree::sim
