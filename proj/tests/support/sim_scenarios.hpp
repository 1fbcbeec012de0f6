#pragma once

#include <string>
#include <vector>

#include "dfree/sim/world.hpp"

namespace dfree::testing {

// Expected state after one action, worked out by hand on graph paper.
// flags: F failed, E disturbance event, P pickup, S success, T timeout,
// X terminated.
struct StepExpect {
  sim::ActionId action;
  sim::Cell agent;
  sim::Heading heading;
  sim::ArmOffset arm;
  bool holding;
  std::vector<sim::Cell> objects;
  std::string flags;
  double d;
};

struct Scenario {
  std::string name;
  int width = 7;
  int height = 7;
  std::vector<sim::Cell> walls;
  sim::EpisodeSpec spec;
  sim::SimConfig cfg;
  std::vector<StepExpect> steps;
};

std::vector<Scenario> sim_scenarios();

// Empty when the simulator reproduces every expected state exactly;
// otherwise a description of the first mismatch.
std::string run_scenario(const Scenario& s);

}  // namespace dfree::testing
