#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace dfree::sim {

// Identifiers follow the large action space ordering.
enum class ActionId : std::uint8_t {
  MoveAhead = 0,
  RotateLeft,
  RotateRight,
  ArmUp,
  ArmDown,
  ArmLeft,
  ArmRight,
  PickUp,
  Done,
};

inline constexpr int kNumActionIds = 9;

std::string_view action_name(ActionId a);
ActionId parse_action(std::string_view name);

enum class ActionVariant : std::uint8_t { Small, Large };

std::string_view variant_name(ActionVariant v);
ActionVariant parse_variant(std::string_view s);

// Ordered list of actions available to the policy. Policy index i always
// refers to actions()[i]; the Small space drops the lateral arm moves.
class ActionSpace {
 public:
  explicit ActionSpace(ActionVariant variant = ActionVariant::Large);

  ActionVariant variant() const { return variant_; }
  int size() const { return static_cast<int>(actions_.size()); }
  const std::vector<ActionId>& actions() const { return actions_; }

  // Throws UnknownAction for an index outside [0, size()).
  ActionId at(int index) const;
  // Policy index of `a`; throws UnknownAction if the space lacks it.
  int index_of(ActionId a) const;
  bool contains(ActionId a) const;
  // Token fed to the previous-action embedding at episode start.
  int start_token() const { return size(); }

 private:
  ActionVariant variant_;
  std::vector<ActionId> actions_;
};

}  // namespace dfree::sim
