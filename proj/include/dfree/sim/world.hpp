#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "dfree/sim/actions.hpp"
#include "dfree/sim/episode.hpp"
#include "dfree/sim/grid.hpp"
#include "dfree/sim/reward.hpp"

namespace dfree::sim {

struct SimConfig {
  int horizon = 80;
  // Disturbance-event threshold on the per-step change of d_t (meters).
  double tau_m = 0.001;
  // Final disturbance below this counts as "no disturbance" (meters).
  double srwod_threshold_m = 0.01;
  int window = 7;
  ActionVariant action_variant = ActionVariant::Large;
  RewardConfig reward;
};

// Arm position in the agent's body frame: dx to the right, dy ahead.
struct ArmOffset {
  int dx = 0;
  int dy = 1;

  friend bool operator==(const ArmOffset&, const ArmOffset&) = default;
};

struct ObjectState {
  int object_id = 0;
  int category_id = 0;
  Cell cell;

  friend bool operator==(const ObjectState&, const ObjectState&) = default;
};

struct WorldState {
  Cell agent_cell;
  Heading heading = Heading::N;
  ArmOffset arm_offset;
  bool holding = false;
  std::vector<ObjectState> objects;
  std::vector<ObjectState> initial_objects;
  int target_object_id = 0;
  Cell goal_cell;
  int step = 0;
  bool terminated = false;
  bool succeeded = false;
  bool picked_up = false;
  std::optional<ActionId> last_action;

  const ObjectState& target() const { return objects[static_cast<std::size_t>(target_object_id)]; }
  friend bool operator==(const WorldState&, const WorldState&) = default;
};

struct StepOutcome {
  double base_reward = 0.0;
  // r'_t under the configured lambda_disturb.
  double shaped_reward = 0.0;
  double d_prev = 0.0;
  double d_curr = 0.0;
  double disturbance_delta = 0.0;
  bool disturbance_event = false;
  bool failed_action = false;
  bool pickup_event = false;
  bool success_event = false;
  bool timeout = false;
  bool episode_done = false;
};

// Initial arm position for every episode: one cell ahead.
inline constexpr ArmOffset kInitialArm{0, 1};

Cell arm_cell(const WorldState& s);

// Throws InvalidEpisode when a placement is outside the scene, on a wall,
// overlapping another object or the agent, or when the initial arm cell is
// blocked.
WorldState reset(const GridScene& scene, const EpisodeSpec& spec);

// Deterministic transition. Throws EpisodeFinished after termination and
// UnknownAction when `action` is not part of cfg.action_variant's space.
std::pair<WorldState, StepOutcome> step(const GridScene& scene, const WorldState& state,
                                        ActionId action, const SimConfig& cfg);

// Sum over non-target objects of the distance to their initial cell, meters.
double disturbance_distance(const WorldState& state, double cell_size_m);

// Number of non-target objects displaced by more than `threshold_m`.
int displaced_object_count(const WorldState& state, double cell_size_m, double threshold_m);

inline bool disturbance_event(double delta_m, double tau_m) { return delta_m >= tau_m; }

// Distance driving the progress term of the base reward: arm-to-target
// while reaching, target-to-goal while delivering.
double goal_distance_m(const WorldState& state, double cell_size_m, bool delivering);

}  // namespace dfree::sim
