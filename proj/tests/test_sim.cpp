#include <doctest.h>

#include <cmath>
#include <numbers>

#include "dfree/errors.hpp"
#include "dfree/scenes/dataset.hpp"
#include "dfree/sim/environment.hpp"
#include "dfree/sim/observation.hpp"
#include "dfree/sim/state_io.hpp"
#include "dfree/sim/trace.hpp"
#include "support/oracles.hpp"
#include "support/sim_scenarios.hpp"

using namespace dfree;
using sim::ActionId;
using sim::Cell;
using sim::Heading;

namespace {

sim::EpisodeSpec spec_of(Cell agent, Heading h, std::vector<Cell> objs, Cell goal) {
  sim::EpisodeSpec e;
  e.episode_id = "e";
  e.scene_id = "s";
  e.agent_cell = agent;
  e.heading = h;
  for (std::size_t i = 0; i < objs.size(); ++i) e.objects.push_back({int(i), objs[i]});
  e.goal_cell = goal;
  return e;
}

const sim::GridScene room7(7, 7, {});

}  // namespace

TEST_SUITE("sim") {

TEST_CASE("hand-simulated scenarios match state for state") {
  const auto all = testing::sim_scenarios();
  REQUIRE(all.size() >= 20);
  for (const auto& s : all) {
    CAPTURE(s.name);
    CHECK(testing::run_scenario(s) == "");
  }
}

TEST_CASE("scenario runner reports a wrong expectation") {
  auto s = testing::sim_scenarios().at(2);
  s.steps.back().objects.back() = {3, 0};
  CHECK(testing::run_scenario(s) != "");
  s = testing::sim_scenarios().at(2);
  s.steps.back().d = 0.5;
  CHECK(testing::run_scenario(s) != "");
  s = testing::sim_scenarios().at(2);
  s.steps.back().flags = "";
  CHECK(testing::run_scenario(s) != "");
}

TEST_CASE("reset defines the reference layout") {
  const auto spec = spec_of({3, 3}, Heading::N, {{1, 1}, {2, 3}}, {5, 5});
  const auto s = sim::reset(room7, spec);
  CHECK(s.step == 0);
  CHECK_FALSE(s.holding);
  CHECK_FALSE(s.terminated);
  CHECK(s.initial_objects == s.objects);
  CHECK(sim::disturbance_distance(s, 0.25) == 0.0);
  CHECK(sim::reset(room7, spec) == s);
}

TEST_CASE("reset rejects bad placements") {
  CHECK_THROWS_AS(sim::reset(room7, spec_of({3, 3}, Heading::N, {{0, 3}}, {5, 5})), InvalidEpisode);
  CHECK_THROWS_AS(sim::reset(room7, spec_of({3, 3}, Heading::N, {{1, 1}, {1, 1}}, {5, 5})), InvalidEpisode);
  CHECK_THROWS_AS(sim::reset(room7, spec_of({3, 3}, Heading::N, {{3, 3}}, {5, 5})), InvalidEpisode);
  CHECK_THROWS_AS(sim::reset(room7, spec_of({3, 3}, Heading::N, {{1, 1}}, {6, 6})), InvalidEpisode);
  CHECK_THROWS_AS(sim::reset(room7, spec_of({3, 3}, Heading::N, {{1, 1}}, {1, 1})), InvalidEpisode);
  CHECK_THROWS_AS(sim::reset(room7, spec_of({3, 1}, Heading::N, {{1, 5}}, {5, 5})), InvalidEpisode);
  CHECK_THROWS_AS(sim::reset(room7, spec_of({3, 3}, Heading::N, {{1, 1}, {3, 2}}, {5, 5})), InvalidEpisode);
  auto no_target = spec_of({3, 3}, Heading::N, {{1, 1}}, {5, 5});
  no_target.target_index = 3;
  CHECK_THROWS_AS(sim::reset(room7, no_target), InvalidEpisode);
}

TEST_CASE("step errors") {
  const auto spec = spec_of({3, 3}, Heading::N, {{1, 1}}, {5, 5});
  auto s = sim::reset(room7, spec);
  sim::SimConfig small;
  small.action_variant = sim::ActionVariant::Small;
  CHECK_THROWS_AS(sim::step(room7, s, ActionId::ArmLeft, small), UnknownAction);
  auto done = sim::step(room7, s, ActionId::Done, sim::SimConfig{}).first;
  CHECK_THROWS_AS(sim::step(room7, done, ActionId::MoveAhead, sim::SimConfig{}), EpisodeFinished);
  sim::ActionSpace space(sim::ActionVariant::Small);
  CHECK(space.size() == 7);
  CHECK_THROWS_AS(space.at(7), UnknownAction);
  CHECK_THROWS_AS(space.index_of(ActionId::ArmRight), UnknownAction);
  CHECK(space.start_token() == 7);
  CHECK(sim::ActionSpace().size() == 9);
}

TEST_CASE("disturbance distance") {
  auto s = sim::reset(sim::GridScene(15, 15, {}), spec_of({7, 7}, Heading::N, {{1, 1}, {2, 2}, {9, 9}}, {12, 12}));
  CHECK(sim::disturbance_distance(s, 0.25) == 0.0);
  s.objects[1].cell = {5, 6};  // moved by (3, 4)
  CHECK(sim::disturbance_distance(s, 0.25) == doctest::Approx(1.25).epsilon(1e-15));
  s.objects[1].cell = {3, 2};
  s.objects[2].cell = {9, 10};
  CHECK(sim::disturbance_distance(s, 0.25) == 0.5);
  // The target never counts.
  s.objects[0].cell = {10, 1};
  CHECK(sim::disturbance_distance(s, 0.25) == 0.5);
  CHECK(sim::displaced_object_count(s, 0.25, 0.01) == 2);
}

TEST_CASE("disturbance event threshold") {
  CHECK(sim::disturbance_event(0.25, 0.001));
  CHECK_FALSE(sim::disturbance_event(0.0, 0.001));
  CHECK_FALSE(sim::disturbance_event(-0.25, 0.001));
  CHECK(sim::disturbance_event(0.001, 0.001));
}

TEST_CASE("base and penalized rewards by hand") {
  sim::SimConfig cfg;
  cfg.reward.lambda_disturb = 15.0;
  // Arm (3,3) -> (3,2) closes on the target at (3,1): 0.5 m -> 0.25 m.
  auto s = sim::reset(room7, spec_of({3, 4}, Heading::N, {{3, 1}}, {5, 5}));
  auto [s1, o1] = sim::step(room7, s, ActionId::MoveAhead, cfg);
  CHECK(o1.base_reward == doctest::Approx(-0.01 + 0.25).epsilon(1e-12));
  CHECK(o1.shaped_reward == o1.base_reward);
  // Failed pickup.
  auto [s2, o2] = sim::step(room7, s, ActionId::PickUp, cfg);
  CHECK(o2.base_reward == doctest::Approx(-0.01 - 0.03).epsilon(1e-12));
  // Push with lambda 15 costs 15 * 0.25.
  auto p = sim::reset(room7, spec_of({3, 4}, Heading::N, {{1, 5}, {4, 2}}, {5, 5}));
  p = sim::step(room7, p, ActionId::MoveAhead, cfg).first;
  auto [p2, po] = sim::step(room7, p, ActionId::ArmRight, cfg);
  REQUIRE(po.disturbance_event);
  CHECK(po.shaped_reward == doctest::Approx(po.base_reward - 3.75).epsilon(1e-12));
  // Pickup then one delivery step then success.
  auto d = sim::reset(room7, spec_of({3, 4}, Heading::N, {{3, 3}}, {3, 1}));
  auto [d1, do1] = sim::step(room7, d, ActionId::PickUp, cfg);
  CHECK(do1.base_reward == doctest::Approx(-0.01 + 5.0).epsilon(1e-12));
  auto [d2, do2] = sim::step(room7, d1, ActionId::MoveAhead, cfg);
  CHECK(do2.base_reward == doctest::Approx(-0.01 + 0.25).epsilon(1e-12));
  auto [d3, do3] = sim::step(room7, d2, ActionId::MoveAhead, cfg);
  CHECK(do3.success_event);
  CHECK(do3.base_reward == doctest::Approx(-0.01 + 0.25 + 10.0).epsilon(1e-12));
}

TEST_CASE("telescoping identity on random episodes") {
  const auto ds = scenes::generate_dataset(testing::small_manifest());
  for (double lambda : {0.0, 1.0, 15.0}) {
    CAPTURE(lambda);
    const auto r = testing::telescoping_check(ds, lambda, 200, 3);
    CHECK(r.max_abs_error <= 1e-9);
    CHECK(r.min_d_final >= 0.0);
    CHECK(r.with_disturbance > 0);
  }
}

TEST_CASE("observation window is egocentric") {
  // Agent (3,3) facing N; clutter at (4,2) is ahead-right.
  auto s = sim::reset(room7, spec_of({3, 3}, Heading::N, {{3, 1}, {4, 2}}, {5, 5}));
  auto o = sim::observe(s, room7, 3);
  CHECK(o.at(0, 2, sim::kClutterChannel) == 1.0);
  CHECK(o.at(0, 1, sim::kClutterChannel) == 0.0);
  CHECK(o.goal_rho == 2.0);
  CHECK(o.goal_theta == 0.0);
  CHECK_FALSE(o.prev_action.has_value());
  // Facing E the same clutter is ahead-left, the target straight left.
  s.heading = Heading::E;
  o = sim::observe(s, room7, 3);
  CHECK(o.at(0, 0, sim::kClutterChannel) == 1.0);
  CHECK(o.goal_theta == doctest::Approx(-std::numbers::pi / 2));
  // Facing S the target is straight behind: theta = +pi.
  s.heading = Heading::S;
  o = sim::observe(s, room7, 3);
  CHECK(o.goal_theta == doctest::Approx(std::numbers::pi));
  // Near the corner the window sees walls, including outside the grid.
  auto c = sim::reset(room7, spec_of({1, 2}, Heading::N, {{5, 5}}, {4, 4}));
  o = sim::observe(c, room7, 7);
  CHECK(o.at(3, 3, sim::kWallChannel) == 0.0);
  CHECK(o.at(3, 2, sim::kWallChannel) == 1.0);  // x = 0
  CHECK(o.at(3, 0, sim::kWallChannel) == 1.0);  // x = -2, outside
  CHECK(o.at(1, 3, sim::kWallChannel) == 1.0);  // y = 0
  CHECK_THROWS_AS(sim::observe(c, room7, 4), std::invalid_argument);
}

TEST_CASE("holding switches the polar goal to the goal cell") {
  auto s = sim::reset(room7, spec_of({3, 3}, Heading::N, {{3, 2}}, {5, 3}));
  s = sim::step(room7, s, ActionId::PickUp, sim::SimConfig{}).first;
  const auto o = sim::observe(s, room7, 3);
  CHECK(o.holding);
  CHECK(o.goal_rho == 2.0);
  CHECK(o.goal_theta == doctest::Approx(std::numbers::pi / 2));
  CHECK(o.at(0, 1, sim::kTargetChannel) == 1.0);
  CHECK(o.prev_action == ActionId::PickUp);
}

TEST_CASE("identical action sequences give identical trajectories") {
  const auto ds = scenes::generate_dataset(testing::small_manifest());
  Rng rng = make_rng(11);
  std::vector<int> actions(60);
  for (auto& a : actions) a = int(uniform_int(rng, 0, 7));
  for (const auto& spec : ds.episodes_in(sim::Split::Train)) {
    sim::Environment a(ds.scene(spec.scene_id), sim::SimConfig{});
    sim::Environment b(ds.scene(spec.scene_id), sim::SimConfig{});
    a.reset(spec);
    b.reset(spec);
    for (int act : actions) {
      if (a.state().terminated) break;
      a.step(act);
      b.step(act);
      REQUIRE(a.state() == b.state());
    }
  }
}

TEST_CASE("world state json round trip") {
  auto s = sim::reset(room7, spec_of({3, 3}, Heading::N, {{3, 2}, {1, 1}}, {5, 3}));
  s = sim::step(room7, s, ActionId::PickUp, sim::SimConfig{}).first;
  s = sim::step(room7, s, ActionId::RotateRight, sim::SimConfig{}).first;
  CHECK(sim::world_state_from_json(sim::world_state_to_json(s)) == s);
  const auto fresh = sim::reset(room7, spec_of({3, 3}, Heading::W, {{1, 2}}, {5, 3}));
  CHECK(sim::world_state_from_json(sim::world_state_to_json(fresh)) == fresh);
}

TEST_CASE("trace record fields") {
  auto s = sim::reset(room7, spec_of({3, 4}, Heading::N, {{1, 5}, {4, 2}}, {5, 5}));
  sim::SimConfig cfg;
  cfg.reward.lambda_disturb = 1.0;
  s = sim::step(room7, s, ActionId::MoveAhead, cfg).first;
  auto [after, out] = sim::step(room7, s, ActionId::ArmRight, cfg);
  const auto j = sim::trace_record(1, ActionId::ArmRight, after, out);
  CHECK(j.at("t") == 1);
  CHECK(j.at("action") == "ArmRight");
  CHECK(j.at("agent_cell") == nlohmann::json::array({3, 3}));
  CHECK(j.at("arm_cell") == nlohmann::json::array({4, 2}));
  CHECK(j.at("heading") == "N");
  CHECK(j.at("holding") == false);
  CHECK(j.at("d_t") == 0.25);
  CHECK(j.at("c_t") == 1);
  CHECK(j.at("r'_t").get<double>() == doctest::Approx(j.at("r_t").get<double>() - 0.25));
  CHECK(j.at("events") == nlohmann::json::array({"disturb"}));
}

}  // TEST_SUITE
