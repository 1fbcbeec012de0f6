#pragma once

#include <filesystem>
#include <vector>

#include "dfree/agent/policy.hpp"
#include "dfree/eval/metrics.hpp"
#include "dfree/scenes/dataset.hpp"
#include "dfree/sim/world.hpp"

namespace dfree::eval {

// Greedy rollout of every episode of `split` in dataset order (the first
// `max_episodes` when > 0). Greedy evaluation draws no random numbers, so a
// fixed network always yields the same records; spread across seeds comes
// from the separately trained checkpoints.
std::vector<EpisodeRecord> evaluate_policy(agent::PolicyNet& net, const scenes::Dataset& dataset, sim::Split split,
                                           const sim::SimConfig& cfg, int max_episodes = 0);

// Loads the checkpoint against `arch` (CheckpointMismatch when it differs)
// and evaluates it.
std::vector<EpisodeRecord> evaluate(const std::filesystem::path& checkpoint, const agent::ArchConfig& arch,
                                    const scenes::Dataset& dataset, sim::Split split, const sim::SimConfig& cfg,
                                    int max_episodes = 0);

// One list of records per checkpoint (one checkpoint per training seed).
std::vector<std::vector<EpisodeRecord>> evaluate_seeds(const std::vector<std::filesystem::path>& checkpoints,
                                                       const agent::ArchConfig& arch, const scenes::Dataset& dataset,
                                                       sim::Split split, const sim::SimConfig& cfg);

}  // namespace dfree::eval
