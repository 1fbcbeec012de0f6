#pragma once

#include <json.hpp>

#include "dfree/sim/world.hpp"

namespace dfree::sim {

// Lossless JSON form of a running world state, used by training
// checkpoints to resume environments mid-episode.
nlohmann::json world_state_to_json(const WorldState& s);
WorldState world_state_from_json(const nlohmann::json& j);

}  // namespace dfree::sim
