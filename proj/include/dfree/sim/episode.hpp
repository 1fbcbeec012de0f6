#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dfree/sim/grid.hpp"

namespace dfree::sim {

enum class Split : std::uint8_t { Train, Val, Test };
enum class Novelty : std::uint8_t { Seen, Novel };

std::string_view split_name(Split s);
Split parse_split(std::string_view s);
std::string_view novelty_name(Novelty n);
Novelty parse_novelty(std::string_view s);

struct ObjectSpec {
  int category_id = 0;
  Cell cell;

  friend bool operator==(const ObjectSpec&, const ObjectSpec&) = default;
};

// One pick-and-deliver task in a scene: where the agent starts, where every
// object sits, which object to carry, and where to put it.
struct EpisodeSpec {
  std::string episode_id;
  std::string scene_id;
  Cell agent_cell;
  Heading heading = Heading::N;
  std::vector<ObjectSpec> objects;
  int target_index = 0;
  Cell goal_cell;
  Split split = Split::Train;
  Novelty target_novelty = Novelty::Seen;

  const ObjectSpec& target() const { return objects.at(static_cast<std::size_t>(target_index)); }

  friend bool operator==(const EpisodeSpec&, const EpisodeSpec&) = default;
};

}  // namespace dfree::sim
