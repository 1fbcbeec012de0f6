#pragma once

#include <filesystem>

#include <json.hpp>

#include "dfree/agent/policy.hpp"

namespace dfree::agent {

nlohmann::json arch_to_json(const ArchConfig& a);
ArchConfig arch_from_json(const nlohmann::json& j);

// ParamStore JSON with an extra "arch" object.
void save_policy(const PolicyNet& net, const std::filesystem::path& path);
// Builds the network described by the file.
PolicyNet load_policy(const std::filesystem::path& path);
// Throws CheckpointMismatch when the file was written for another
// architecture.
PolicyNet load_policy(const std::filesystem::path& path, const ArchConfig& expected);

}  // namespace dfree::agent
