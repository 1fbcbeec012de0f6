#include "dfree/scenes/generator.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <string>
#include <unordered_set>

#include "dfree/errors.hpp"
#include "dfree/rng.hpp"
#include "dfree/sim/world.hpp"

namespace dfree::scenes {

using sim::Cell;

void SceneParams::validate() const {
  if (min_size < 7 || max_size > 15 || min_size > max_size)
    throw std::invalid_argument("room size must lie in 7..15 with min <= max");
  if (min_clutter < 0 || max_clutter > 8 || min_clutter > max_clutter)
    throw std::invalid_argument("clutter count must lie in 0..8 with min <= max");
  if (min_wall_segments < 0 || max_wall_segments > 3 || min_wall_segments > max_wall_segments)
    throw std::invalid_argument("interior wall segments must lie in 0..3 with min <= max");
  if (!(cell_size_m > 0.0)) throw std::invalid_argument("cell size must be positive");
  if (max_attempts < 1) throw std::invalid_argument("max_attempts must be positive");
}

SceneLayout generate_scene(std::uint64_t seed, const SceneParams& params) {
  params.validate();
  Rng rng = make_rng(seed, 0x5CE7E);
  for (int attempt = 0; attempt < params.max_attempts; ++attempt) {
    const int w = static_cast<int>(uniform_int(rng, params.min_size, params.max_size));
    const int h = static_cast<int>(uniform_int(rng, params.min_size, params.max_size));
    std::vector<Cell> walls;
    const int segments = static_cast<int>(uniform_int(rng, params.min_wall_segments, params.max_wall_segments));
    for (int s = 0; s < segments; ++s) {
      const bool horizontal = uniform_int(rng, 0, 1) == 0;
      const int len = static_cast<int>(uniform_int(rng, 2, std::max(2, (horizontal ? w : h) / 2)));
      const int x0 = static_cast<int>(uniform_int(rng, 1, w - 2));
      const int y0 = static_cast<int>(uniform_int(rng, 1, h - 2));
      for (int i = 0; i < len; ++i) {
        const Cell c = horizontal ? Cell{x0 + i, y0} : Cell{x0, y0 + i};
        if (c.x >= w - 1 || c.y >= h - 1) break;
        walls.push_back(c);
      }
    }
    sim::GridScene scene(w, h, walls, params.cell_size_m);
    if (!scene.free_space_connected()) continue;

    auto free = scene.free_cells();
    const int clutter_n = static_cast<int>(uniform_int(rng, params.min_clutter, params.max_clutter));
    // Keep enough room for the agent, its arm, the target and the goal.
    if (static_cast<int>(free.size()) < clutter_n + 8) continue;
    shuffle(free.begin(), free.end(), rng);
    std::vector<Cell> clutter(free.begin(), free.begin() + clutter_n);
    return {std::move(scene), std::move(clutter)};
  }
  throw GenerationFailed("no connected layout after " + std::to_string(params.max_attempts) + " attempts");
}

namespace {

// Search key: agent pose, arm and grasp. Clutter positions are left out;
// each key keeps the world reached first, so a found plan is a real action
// sequence under the exact push rules.
std::uint32_t state_key(const sim::WorldState& s) {
  return static_cast<std::uint32_t>(s.agent_cell.x) | static_cast<std::uint32_t>(s.agent_cell.y) << 8 |
         static_cast<std::uint32_t>(s.heading) << 16 | static_cast<std::uint32_t>(s.arm_offset.dx + 1) << 18 |
         static_cast<std::uint32_t>(s.arm_offset.dy + 1) << 21 | static_cast<std::uint32_t>(s.holding) << 24;
}

}  // namespace

bool solvable(const sim::EpisodeSpec& spec, const sim::GridScene& scene, int horizon, sim::ActionVariant variant) {
  sim::SimConfig cfg;
  cfg.horizon = horizon;
  cfg.action_variant = variant;
  const sim::ActionSpace space(variant);

  sim::WorldState start;
  try {
    start = sim::reset(scene, spec);
  } catch (const InvalidEpisode&) {
    return false;
  }
  std::unordered_set<std::uint32_t> seen{state_key(start)};
  std::deque<sim::WorldState> frontier{start};
  while (!frontier.empty()) {
    const sim::WorldState s = std::move(frontier.front());
    frontier.pop_front();
    if (s.step >= horizon) continue;
    for (sim::ActionId a : space.actions()) {
      if (a == sim::ActionId::Done) continue;
      auto [next, out] = sim::step(scene, s, a, cfg);
      if (out.success_event) return true;
      if (out.failed_action || next.terminated) continue;
      if (seen.insert(state_key(next)).second) frontier.push_back(std::move(next));
    }
  }
  return false;
}

}  // namespace dfree::scenes
