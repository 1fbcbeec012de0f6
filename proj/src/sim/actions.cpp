#include "dfree/sim/actions.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "dfree/errors.hpp"

namespace dfree::sim {

namespace {
constexpr std::array<std::string_view, kNumActionIds> kNames = {
    "MoveAhead", "RotateLeft", "RotateRight", "ArmUp", "ArmDown",
    "ArmLeft",   "ArmRight",   "PickUp",      "Done"};
}

std::string_view action_name(ActionId a) { return kNames.at(static_cast<std::size_t>(a)); }

ActionId parse_action(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (kNames[i] == name) return static_cast<ActionId>(i);
  throw UnknownAction("unknown action name: " + std::string(name));
}

std::string_view variant_name(ActionVariant v) { return v == ActionVariant::Small ? "small" : "large"; }

ActionVariant parse_variant(std::string_view s) {
  if (s == "small") return ActionVariant::Small;
  if (s == "large") return ActionVariant::Large;
  throw std::invalid_argument("unknown action space variant: " + std::string(s));
}

ActionSpace::ActionSpace(ActionVariant variant) : variant_(variant) {
  for (int i = 0; i < kNumActionIds; ++i) {
    const auto a = static_cast<ActionId>(i);
    if (variant == ActionVariant::Small && (a == ActionId::ArmLeft || a == ActionId::ArmRight)) continue;
    actions_.push_back(a);
  }
}

ActionId ActionSpace::at(int index) const {
  if (index < 0 || index >= size())
    throw UnknownAction("action index " + std::to_string(index) + " outside a space of " +
                        std::to_string(size()));
  return actions_[static_cast<std::size_t>(index)];
}

int ActionSpace::index_of(ActionId a) const {
  const auto it = std::find(actions_.begin(), actions_.end(), a);
  if (it == actions_.end())
    throw UnknownAction(std::string(action_name(a)) + " is not in the " + std::string(variant_name(variant_)) +
                        " action space");
  return static_cast<int>(it - actions_.begin());
}

bool ActionSpace::contains(ActionId a) const {
  return std::find(actions_.begin(), actions_.end(), a) != actions_.end();
}

}  // namespace dfree::sim
