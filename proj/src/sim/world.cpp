#include "dfree/sim/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

#include "dfree/errors.hpp"

namespace dfree::sim {

namespace {

Cell body_to_world(Heading h, ArmOffset o) { return o.dx * right_of(h) + o.dy * forward_of(h); }

int sign(int v) { return (v > 0) - (v < 0); }

// Unit push direction for an arm displacement: the dominant axis, with
// diagonal ties resolved by rotating the diagonal 45 degrees clockwise.
Cell push_direction(Cell d) {
  const int ax = std::abs(d.x);
  const int ay = std::abs(d.y);
  if (ax > ay) return {sign(d.x), 0};
  if (ay > ax) return {0, sign(d.y)};
  if (d.x > 0 && d.y < 0) return {1, 0};
  if (d.x > 0 && d.y > 0) return {0, 1};
  if (d.x < 0 && d.y > 0) return {-1, 0};
  return {0, -1};
}

int occupant(const std::vector<ObjectState>& objects, Cell c) {
  for (std::size_t i = 0; i < objects.size(); ++i)
    if (objects[i].cell == c) return static_cast<int>(i);
  return -1;
}

struct Motion {
  Cell body_to;
  Heading heading_to;
  ArmOffset arm_to;
};

// Moves body, arm and held target rigidly, pushing at most one clutter
// object per moving part by one cell. Returns false and leaves `s` untouched
// when the motion is blocked.
bool apply_motion(const GridScene& scene, WorldState& s, const Motion& m) {
  const Cell body_from = s.agent_cell;
  const Cell arm_from = arm_cell(s);
  const Cell arm_to = m.body_to + body_to_world(m.heading_to, m.arm_to);
  if (scene.is_wall(m.body_to) || scene.is_wall(arm_to)) return false;

  const int target = s.target_object_id;
  std::vector<ObjectState> objs = s.objects;
  std::vector<int> pushed;

  auto push = [&](int o, Cell dir) {
    if (std::find(pushed.begin(), pushed.end(), o) != pushed.end()) return;
    pushed.push_back(o);
    objs[static_cast<std::size_t>(o)].cell = objs[static_cast<std::size_t>(o)].cell + dir;
  };

  if (m.body_to != body_from) {
    const int o = occupant(s.objects, m.body_to);
    if (o == target && !s.holding) return false;
    if (o >= 0 && o != target) push(o, m.body_to - body_from);
  }
  if (arm_to != arm_from) {
    const int o = occupant(s.objects, arm_to);
    if (o >= 0 && o != target) push(o, push_direction(arm_to - arm_from));
  }
  if (s.holding) objs[static_cast<std::size_t>(target)].cell = arm_to;

  for (std::size_t i = 0; i < objs.size(); ++i) {
    const Cell c = objs[i].cell;
    if (scene.is_wall(c)) return false;
    for (std::size_t j = i + 1; j < objs.size(); ++j)
      if (objs[j].cell == c) return false;
    if (static_cast<int>(i) == target) {
      if (!s.holding && c == m.body_to) return false;
    } else if (c == m.body_to || c == arm_to) {
      return false;
    }
  }

  s.agent_cell = m.body_to;
  s.heading = m.heading_to;
  s.arm_offset = m.arm_to;
  s.objects = std::move(objs);
  return true;
}

double cell_distance_m(Cell a, Cell b, double cell_size_m) {
  const double dx = a.x - b.x;
  const double dy = a.y - b.y;
  return std::sqrt(dx * dx + dy * dy) * cell_size_m;
}

}  // namespace

Cell arm_cell(const WorldState& s) { return s.agent_cell + body_to_world(s.heading, s.arm_offset); }

WorldState reset(const GridScene& scene, const EpisodeSpec& spec) {
  if (spec.objects.empty()) throw InvalidEpisode("episode has no objects");
  if (spec.target_index < 0 || spec.target_index >= static_cast<int>(spec.objects.size()))
    throw InvalidEpisode("target index does not name an object");
  if (scene.is_wall(spec.agent_cell)) throw InvalidEpisode("agent placed on a wall or outside the scene");
  if (scene.is_wall(spec.goal_cell)) throw InvalidEpisode("goal placed on a wall or outside the scene");
  if (spec.goal_cell == spec.target().cell) throw InvalidEpisode("goal coincides with the target's start");

  WorldState s;
  s.agent_cell = spec.agent_cell;
  s.heading = spec.heading;
  s.arm_offset = kInitialArm;
  s.target_object_id = spec.target_index;
  s.goal_cell = spec.goal_cell;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const auto& o = spec.objects[i];
    if (scene.is_wall(o.cell))
      throw InvalidEpisode("object " + std::to_string(i) + " placed on a wall or outside the scene");
    if (o.cell == spec.agent_cell) throw InvalidEpisode("object " + std::to_string(i) + " overlaps the agent");
    for (std::size_t j = 0; j < i; ++j)
      if (spec.objects[j].cell == o.cell)
        throw InvalidEpisode("objects " + std::to_string(j) + " and " + std::to_string(i) + " overlap");
    s.objects.push_back({static_cast<int>(i), o.category_id, o.cell});
  }
  const Cell arm = arm_cell(s);
  if (scene.is_wall(arm)) throw InvalidEpisode("initial arm cell is a wall");
  const int under_arm = occupant(s.objects, arm);
  if (under_arm >= 0 && under_arm != s.target_object_id) throw InvalidEpisode("initial arm cell holds clutter");
  s.initial_objects = s.objects;
  return s;
}

std::pair<WorldState, StepOutcome> step(const GridScene& scene, const WorldState& state, ActionId action,
                                        const SimConfig& cfg) {
  if (state.terminated) throw EpisodeFinished("step called on a terminated episode");
  if (!ActionSpace(cfg.action_variant).contains(action))
    throw UnknownAction(std::string(action_name(action)) + " is not in the configured action space");

  const double cs = scene.cell_size_m();
  WorldState next = state;
  next.step = state.step + 1;
  next.last_action = action;

  StepOutcome out;
  out.d_prev = disturbance_distance(state, cs);
  const bool delivering = state.holding;
  const double goal_prev = goal_distance_m(state, cs, delivering);

  auto move_arm = [&](int ddx, int ddy) {
    const ArmOffset to{std::clamp(state.arm_offset.dx + ddx, -1, 1), std::clamp(state.arm_offset.dy + ddy, -1, 1)};
    if (to == state.arm_offset) return false;
    return apply_motion(scene, next, {state.agent_cell, state.heading, to});
  };

  bool ok = true;
  switch (action) {
    case ActionId::MoveAhead:
      ok = apply_motion(scene, next, {state.agent_cell + forward_of(state.heading), state.heading, state.arm_offset});
      break;
    case ActionId::RotateLeft:
      ok = apply_motion(scene, next, {state.agent_cell, turn_left(state.heading), state.arm_offset});
      break;
    case ActionId::RotateRight:
      ok = apply_motion(scene, next, {state.agent_cell, turn_right(state.heading), state.arm_offset});
      break;
    case ActionId::ArmUp: ok = move_arm(0, 1); break;
    case ActionId::ArmDown: ok = move_arm(0, -1); break;
    case ActionId::ArmLeft: ok = move_arm(-1, 0); break;
    case ActionId::ArmRight: ok = move_arm(1, 0); break;
    case ActionId::PickUp:
      if (!state.holding && arm_cell(state) == state.target().cell) {
        next.holding = true;
        out.pickup_event = !state.picked_up;
        next.picked_up = true;
      } else {
        ok = false;
      }
      break;
    case ActionId::Done: next.terminated = true; break;
  }
  out.failed_action = !ok;

  if (next.holding && next.target().cell == next.goal_cell) {
    next.succeeded = true;
    next.terminated = true;
    out.success_event = true;
  }
  if (!next.terminated && next.step >= cfg.horizon) {
    next.terminated = true;
    out.timeout = true;
  }
  out.episode_done = next.terminated;

  out.d_curr = disturbance_distance(next, cs);
  out.disturbance_delta = out.d_curr - out.d_prev;
  out.disturbance_event = disturbance_event(out.disturbance_delta, cfg.tau_m);

  RewardParts parts;
  parts.failed_action = out.failed_action;
  parts.prev_goal_dist_m = goal_prev;
  parts.goal_dist_m = goal_distance_m(next, cs, delivering);
  parts.first_pickup = out.pickup_event;
  parts.success = out.success_event;
  out.base_reward = base_reward(parts, cfg.reward);
  out.shaped_reward = shaped_reward(out.base_reward, out.d_prev, out.d_curr, cfg.reward.lambda_disturb);
  return {std::move(next), out};
}

double disturbance_distance(const WorldState& state, double cell_size_m) {
  double d = 0.0;
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    if (static_cast<int>(i) == state.target_object_id) continue;
    d += cell_distance_m(state.objects[i].cell, state.initial_objects[i].cell, cell_size_m);
  }
  return d;
}

int displaced_object_count(const WorldState& state, double cell_size_m, double threshold_m) {
  int n = 0;
  for (std::size_t i = 0; i < state.objects.size(); ++i) {
    if (static_cast<int>(i) == state.target_object_id) continue;
    if (cell_distance_m(state.objects[i].cell, state.initial_objects[i].cell, cell_size_m) > threshold_m) ++n;
  }
  return n;
}

double goal_distance_m(const WorldState& state, double cell_size_m, bool delivering) {
  const Cell target = state.target().cell;
  return delivering ? cell_distance_m(target, state.goal_cell, cell_size_m)
                    : cell_distance_m(arm_cell(state), target, cell_size_m);
}

}  // namespace dfree::sim
