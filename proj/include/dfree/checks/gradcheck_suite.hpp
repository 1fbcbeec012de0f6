#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dfree/ad/gradcheck.hpp"

namespace dfree::checks {

inline constexpr double kPrimitiveTolerance = 1e-4;
inline constexpr double kCompositeTolerance = 1e-3;

struct GradcheckCase {
  std::string name;
  ad::GradcheckResult result;
  double tolerance = 0.0;
  bool passed() const { return result.max_relative_error <= tolerance; }
};

// Central-difference checks of every tape primitive and loss on random
// inputs kept away from kinks (relu, clamp and minimum breakpoints).
std::vector<GradcheckCase> primitive_gradchecks(std::uint64_t seed);

// The full PPO loss (clipped surrogate, value, entropy) plus the focal
// disturbance loss, through a small recurrent policy unrolled over a random
// 4-step, 2-worker rollout with an episode reset inside. `aux` picks the
// auxiliary head ("disturb" or "invdyn").
GradcheckCase composite_gradcheck(std::uint64_t seed, const std::string& aux = "disturb");

}  // namespace dfree::checks
