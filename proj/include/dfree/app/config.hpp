#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfree/rl/trainer.hpp"
#include "dfree/scenes/dataset.hpp"
#include "dfree/sim/episode.hpp"

namespace dfree::app {

struct EvalConfig {
  sim::Split split = sim::Split::Val;
  int max_episodes = 0;
  std::vector<double> dd_thresholds;
};

// Everything a run needs besides the code version. The YAML source is kept
// verbatim and copied into every output directory.
struct RunConfig {
  std::string text;
  scenes::DatasetManifest scenes;
  rl::TrainConfig train;
  std::vector<std::uint64_t> seeds = {1};
  std::string output_dir = "runs";
  EvalConfig eval;
};

// Throws ConfigError naming the offending key and its line for unknown keys,
// wrong types and out-of-range values.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::filesystem::path& path);

// DFREE_SEED replaces the seed list with one seed; DFREE_OUT replaces the
// output directory. No other variables are read.
void apply_env_overrides(RunConfig& cfg);

// Parsed settings in a fixed key order; seeds and output_dir are left out
// so every seed of one configuration lands under the same hash.
nlohmann::json canonical_json(const RunConfig& cfg);
std::string config_hash(const RunConfig& cfg);
std::string scenes_hash(const RunConfig& cfg);

std::filesystem::path dataset_path(const RunConfig& cfg);
std::filesystem::path run_dir(const RunConfig& cfg);
std::filesystem::path seed_dir(const RunConfig& cfg, std::uint64_t seed);

// Loads the dataset from dataset_path() or generates and saves it there.
scenes::Dataset obtain_dataset(const RunConfig& cfg);

}  // namespace dfree::app
