#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "dfree/scenes/generator.hpp"
#include "dfree/sim/episode.hpp"
#include "dfree/sim/grid.hpp"

namespace dfree::scenes {

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
  std::uint64_t seed = 0;
  int train_scenes = 12;
  int val_scenes = 4;
  int test_scenes = 4;
  int episodes_per_scene = 60;
  int num_categories = 6;
  std::vector<int> seen_categories = {0, 1, 2};
  std::vector<int> novel_categories = {3, 4, 5};
  SceneParams scene;
  EpisodeParams episode;
  int format_version = kDatasetFormatVersion;

  void validate() const;
  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

struct SceneRecord {
  std::string scene_id;
  sim::Split split = sim::Split::Train;
  std::shared_ptr<const sim::GridScene> scene;
};

struct Dataset {
  DatasetManifest manifest;
  std::vector<SceneRecord> scenes;
  std::vector<sim::EpisodeSpec> episodes;

  // Throws std::out_of_range for an unknown id.
  std::shared_ptr<const sim::GridScene> scene(const std::string& scene_id) const;
  std::vector<sim::EpisodeSpec> episodes_in(sim::Split split) const;
};

bool operator==(const Dataset& a, const Dataset& b);

// Scene-disjoint splits; train targets use seen categories only, val/test
// alternate seen and novel targets. Every episode passes solvable().
// Scenes are generated from per-scene derived seeds.
Dataset generate_dataset(const DatasetManifest& manifest);

// JSONL: a manifest header line, one line per scene, one line per episode.
// Throws IOFailure when the file cannot be written or read and
// FormatVersionMismatch when the header carries another version.
void save_dataset(const Dataset& dataset, const std::filesystem::path& path);
Dataset load_dataset(const std::filesystem::path& path);

}  // namespace dfree::scenes
