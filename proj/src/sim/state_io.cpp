#include "dfree/sim/state_io.hpp"

namespace dfree::sim {

using nlohmann::json;

namespace {

json cell_json(Cell c) { return json::array({c.x, c.y}); }
Cell cell_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

json objects_json(const std::vector<ObjectState>& objs) {
  json out = json::array();
  for (const auto& o : objs) out.push_back(json::array({o.object_id, o.category_id, o.cell.x, o.cell.y}));
  return out;
}

std::vector<ObjectState> objects_from(const json& j) {
  std::vector<ObjectState> out;
  for (const auto& o : j)
    out.push_back({o.at(0).get<int>(), o.at(1).get<int>(), {o.at(2).get<int>(), o.at(3).get<int>()}});
  return out;
}

}  // namespace

json world_state_to_json(const WorldState& s) {
  json j = {{"agent_cell", cell_json(s.agent_cell)},
            {"heading", std::string(heading_name(s.heading))},
            {"arm_offset", json::array({s.arm_offset.dx, s.arm_offset.dy})},
            {"holding", s.holding},
            {"objects", objects_json(s.objects)},
            {"initial_objects", objects_json(s.initial_objects)},
            {"target_object_id", s.target_object_id},
            {"goal_cell", cell_json(s.goal_cell)},
            {"step", s.step},
            {"terminated", s.terminated},
            {"succeeded", s.succeeded},
            {"picked_up", s.picked_up}};
  j["last_action"] = s.last_action ? json(std::string(action_name(*s.last_action))) : json(nullptr);
  return j;
}

WorldState world_state_from_json(const json& j) {
  WorldState s;
  s.agent_cell = cell_from(j.at("agent_cell"));
  s.heading = parse_heading(j.at("heading").get<std::string>());
  s.arm_offset = {j.at("arm_offset").at(0).get<int>(), j.at("arm_offset").at(1).get<int>()};
  s.holding = j.at("holding").get<bool>();
  s.objects = objects_from(j.at("objects"));
  s.initial_objects = objects_from(j.at("initial_objects"));
  s.target_object_id = j.at("target_object_id").get<int>();
  s.goal_cell = cell_from(j.at("goal_cell"));
  s.step = j.at("step").get<int>();
  s.terminated = j.at("terminated").get<bool>();
  s.succeeded = j.at("succeeded").get<bool>();
  s.picked_up = j.at("picked_up").get<bool>();
  if (!j.at("last_action").is_null()) s.last_action = parse_action(j.at("last_action").get<std::string>());
  return s;
}

}  // namespace dfree::sim
