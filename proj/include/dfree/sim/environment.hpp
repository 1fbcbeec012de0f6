#pragma once

#include <memory>

#include "dfree/sim/observation.hpp"
#include "dfree/sim/world.hpp"

namespace dfree::sim {

// Value-like wrapper bundling a scene, an episode and its running state.
// Not safe to step from two threads at once; separate instances share
// nothing mutable.
class Environment {
 public:
  Environment(std::shared_ptr<const GridScene> scene, SimConfig cfg);

  const SimConfig& config() const { return cfg_; }
  const ActionSpace& action_space() const { return space_; }
  const GridScene& scene() const { return *scene_; }
  const WorldState& state() const { return state_; }
  const EpisodeSpec& episode() const { return episode_; }

  void reset(const EpisodeSpec& episode);
  void reset(std::shared_ptr<const GridScene> scene, const EpisodeSpec& episode);
  // Reinstates a saved mid-episode state (checkpoint resume).
  void restore(std::shared_ptr<const GridScene> scene, const EpisodeSpec& episode, WorldState state);
  // `policy_index` is an index into action_space().
  StepOutcome step(int policy_index);
  StepOutcome step_action(ActionId action);
  Observation observe() const;
  double disturbance() const { return disturbance_distance(state_, scene_->cell_size_m()); }

 private:
  std::shared_ptr<const GridScene> scene_;
  SimConfig cfg_;
  ActionSpace space_;
  EpisodeSpec episode_;
  WorldState state_;
};

}  // namespace dfree::sim
