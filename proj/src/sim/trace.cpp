#include "dfree/sim/trace.hpp"

namespace dfree::sim {

nlohmann::json trace_record(int t, ActionId action, const WorldState& after, const StepOutcome& out) {
  const Cell arm = arm_cell(after);
  nlohmann::json events = nlohmann::json::array();
  if (out.failed_action) events.push_back("failed");
  if (out.disturbance_event) events.push_back("disturb");
  if (out.pickup_event) events.push_back("pickup");
  if (out.success_event) events.push_back("success");
  if (out.timeout) events.push_back("timeout");
  if (action == ActionId::Done) events.push_back("done");
  return {
      {"t", t},
      {"action", action_name(action)},
      {"agent_cell", {after.agent_cell.x, after.agent_cell.y}},
      {"heading", heading_name(after.heading)},
      {"arm_cell", {arm.x, arm.y}},
      {"holding", after.holding},
      {"d_t", out.d_curr},
      {"r_t", out.base_reward},
      {"r'_t", out.shaped_reward},
      {"c_t", out.disturbance_event ? 1 : 0},
      {"events", events},
  };
}

}  // namespace dfree::sim
