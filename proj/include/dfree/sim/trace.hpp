#pragma once

#include <ostream>
#include <string>

#include <json.hpp>

#include "dfree/sim/world.hpp"

namespace dfree::sim {

// One JSONL line per transition: {t, action, agent_cell, heading, arm_cell,
// holding, d_t, r_t, r'_t, c_t, events}. `after` is the state produced by
// `action`; t is the index of the transition (0-based).
nlohmann::json trace_record(int t, ActionId action, const WorldState& after, const StepOutcome& out);

class TraceWriter {
 public:
  explicit TraceWriter(std::ostream& os) : os_(os) {}
  void write(int t, ActionId action, const WorldState& after, const StepOutcome& out) {
    os_ << trace_record(t, action, after, out).dump() << '\n';
  }

 private:
  std::ostream& os_;
};

}  // namespace dfree::sim
