#include "dfree/sim/environment.hpp"

#include "dfree/errors.hpp"

namespace dfree::sim {

Environment::Environment(std::shared_ptr<const GridScene> scene, SimConfig cfg)
    : scene_(std::move(scene)), cfg_(cfg), space_(cfg.action_variant) {}

void Environment::reset(const EpisodeSpec& episode) {
  state_ = sim::reset(*scene_, episode);
  episode_ = episode;
}

void Environment::reset(std::shared_ptr<const GridScene> scene, const EpisodeSpec& episode) {
  scene_ = std::move(scene);
  reset(episode);
}

void Environment::restore(std::shared_ptr<const GridScene> scene, const EpisodeSpec& episode, WorldState state) {
  scene_ = std::move(scene);
  episode_ = episode;
  state_ = std::move(state);
}

StepOutcome Environment::step(int policy_index) { return step_action(space_.at(policy_index)); }

StepOutcome Environment::step_action(ActionId action) {
  auto [next, out] = sim::step(*scene_, state_, action, cfg_);
  state_ = std::move(next);
  return out;
}

Observation Environment::observe() const { return sim::observe(state_, *scene_, cfg_.window); }

}  // namespace dfree::sim
