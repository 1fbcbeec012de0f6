#pragma once

#include <cstdint>
#include <vector>

#include "dfree/sim/actions.hpp"
#include "dfree/sim/episode.hpp"
#include "dfree/sim/grid.hpp"

namespace dfree::scenes {

struct SceneParams {
  int min_size = 11;
  int max_size = 14;
  int min_clutter = 6;
  int max_clutter = 8;
  int min_wall_segments = 0;
  int max_wall_segments = 3;
  double cell_size_m = 0.25;
  int max_attempts = 200;

  // Throws std::invalid_argument outside room 7..15, clutter 0..8, walls 0..3.
  void validate() const;
  friend bool operator==(const SceneParams&, const SceneParams&) = default;
};

// A room plus its fixed clutter layout. Clutter cells are free and unique.
struct SceneLayout {
  sim::GridScene scene;
  std::vector<sim::Cell> clutter;
};

// Deterministic in (seed, params). Layouts whose free space is not
// 4-connected are rejected and resampled; throws GenerationFailed after
// params.max_attempts rejections.
SceneLayout generate_scene(std::uint64_t seed, const SceneParams& params);

// Placement rules for the per-episode parts (agent start, target, goal).
struct EpisodeParams {
  // Manhattan distance between the agent start and the target.
  int min_target_distance = 1;
  int max_target_distance = 3;
  // Manhattan distance between the target start and the goal.
  int min_goal_distance = 8;
  int max_goal_distance = 14;
  // No clutter within this Chebyshev distance of the agent start or the
  // target (0 disables the constraint).
  int clear_radius = 1;
  // At least this many clutter objects within Chebyshev distance 1 of the
  // goal, so deliveries happen in tight spots.
  int min_goal_clutter = 1;
  // At least this many clutter objects inside the rectangle spanned by the
  // target and the goal, so the direct delivery route runs into clutter.
  int min_path_clutter = 0;
  // Horizon and action space used by the solvability filter.
  int horizon = 80;
  sim::ActionVariant variant = sim::ActionVariant::Small;
  int max_attempts = 400;

  friend bool operator==(const EpisodeParams&, const EpisodeParams&) = default;
};

// Breadth-first search over (agent cell, heading, arm offset, holding) with
// exact simulator transitions, Done excluded. True when a delivery is
// reached within `horizon` steps. Clutter is not part of the visited key,
// so a true result is always a real plan; some plans that need a second
// visit of a key with different clutter are not found.
bool solvable(const sim::EpisodeSpec& spec, const sim::GridScene& scene, int horizon,
              sim::ActionVariant variant = sim::ActionVariant::Small);

}  // namespace dfree::scenes
