#include "dfree/scenes/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "dfree/errors.hpp"
#include "dfree/rng.hpp"
#include "dfree/sim/world.hpp"

namespace dfree::scenes {

using nlohmann::json;
using sim::Cell;

void DatasetManifest::validate() const {
  scene.validate();
  if (train_scenes < 1 || val_scenes < 0 || test_scenes < 0) throw std::invalid_argument("bad scene counts");
  if (episodes_per_scene < 1) throw std::invalid_argument("episodes_per_scene must be positive");
  if (seen_categories.empty()) throw std::invalid_argument("need at least one seen category");
  if (val_scenes + test_scenes > 0 && novel_categories.empty())
    throw std::invalid_argument("val/test splits need novel categories");
  for (int c : novel_categories)
    if (std::find(seen_categories.begin(), seen_categories.end(), c) != seen_categories.end())
      throw std::invalid_argument("category " + std::to_string(c) + " is both seen and novel");
  for (const auto* set : {&seen_categories, &novel_categories})
    for (int c : *set)
      if (c < 0 || c >= num_categories) throw std::invalid_argument("category id out of range");
  if (episode.min_target_distance < 1 || episode.min_target_distance > episode.max_target_distance)
    throw std::invalid_argument("bad target distance range");
  if (episode.min_goal_distance < 1 || episode.min_goal_distance > episode.max_goal_distance)
    throw std::invalid_argument("bad goal distance range");
  if (episode.clear_radius < 0) throw std::invalid_argument("clear_radius must be >= 0");
  if (episode.min_goal_clutter < 0 || episode.min_goal_clutter > 8)
    throw std::invalid_argument("min_goal_clutter must be in [0, 8]");
  if (episode.min_path_clutter < 0 || episode.min_path_clutter > 8)
    throw std::invalid_argument("min_path_clutter must be in [0, 8]");
}

std::shared_ptr<const sim::GridScene> Dataset::scene(const std::string& scene_id) const {
  for (const auto& s : scenes)
    if (s.scene_id == scene_id) return s.scene;
  throw std::out_of_range("unknown scene id: " + scene_id);
}

std::vector<sim::EpisodeSpec> Dataset::episodes_in(sim::Split split) const {
  std::vector<sim::EpisodeSpec> out;
  for (const auto& e : episodes)
    if (e.split == split) out.push_back(e);
  return out;
}

bool operator==(const Dataset& a, const Dataset& b) {
  if (!(a.manifest == b.manifest) || a.episodes != b.episodes || a.scenes.size() != b.scenes.size()) return false;
  for (std::size_t i = 0; i < a.scenes.size(); ++i) {
    if (a.scenes[i].scene_id != b.scenes[i].scene_id || a.scenes[i].split != b.scenes[i].split) return false;
    if (!(*a.scenes[i].scene == *b.scenes[i].scene)) return false;
  }
  return true;
}

namespace {

int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

bool contains(const std::vector<Cell>& cells, Cell c) { return std::find(cells.begin(), cells.end(), c) != cells.end(); }

int clutter_around(const std::vector<Cell>& clutter, Cell c) {
  return static_cast<int>(std::count_if(clutter.begin(), clutter.end(), [&](Cell o) {
    return std::max(std::abs(o.x - c.x), std::abs(o.y - c.y)) <= 1;
  }));
}

int clutter_between(const std::vector<Cell>& clutter, Cell a, Cell b) {
  return static_cast<int>(std::count_if(clutter.begin(), clutter.end(), [&](Cell o) {
    return o.x >= std::min(a.x, b.x) && o.x <= std::max(a.x, b.x) && o.y >= std::min(a.y, b.y) &&
           o.y <= std::max(a.y, b.y);
  }));
}

bool clutter_near(const std::vector<Cell>& clutter, Cell c, int radius) {
  return std::any_of(clutter.begin(), clutter.end(),
                     [&](Cell o) { return std::max(std::abs(o.x - c.x), std::abs(o.y - c.y)) <= radius; });
}

sim::EpisodeSpec sample_episode(Rng& rng, const SceneLayout& layout, const DatasetManifest& m, sim::Split split,
                                bool novel, const std::string& scene_id, const std::string& episode_id) {
  const auto& scene = layout.scene;
  const auto free = scene.free_cells();
  std::vector<Cell> open;
  for (Cell c : free)
    if (!contains(layout.clutter, c)) open.push_back(c);
  const auto& cats = novel ? m.novel_categories : m.seen_categories;
  const auto& ep = m.episode;

  for (int attempt = 0; attempt < ep.max_attempts; ++attempt) {
    sim::EpisodeSpec spec;
    spec.episode_id = episode_id;
    spec.scene_id = scene_id;
    spec.split = split;
    spec.target_novelty = novel ? sim::Novelty::Novel : sim::Novelty::Seen;
    spec.agent_cell = open[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(open.size()) - 1))];
    spec.heading = static_cast<sim::Heading>(uniform_int(rng, 0, 3));
    const Cell arm = spec.agent_cell + sim::forward_of(spec.heading);
    if (scene.is_wall(arm) || contains(layout.clutter, arm)) continue;
    if (ep.clear_radius > 0 && clutter_near(layout.clutter, spec.agent_cell, ep.clear_radius)) continue;

    std::vector<Cell> targets;
    for (Cell c : open) {
      const int d = manhattan(c, spec.agent_cell);
      if (c != arm && d >= ep.min_target_distance && d <= ep.max_target_distance &&
          !(ep.clear_radius > 0 && clutter_near(layout.clutter, c, ep.clear_radius)))
        targets.push_back(c);
    }
    if (targets.empty()) continue;
    const Cell target = targets[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(targets.size()) - 1))];

    std::vector<Cell> goals;
    for (Cell c : open) {
      const int d = manhattan(c, target);
      if (c != spec.agent_cell && d >= ep.min_goal_distance && d <= ep.max_goal_distance &&
          clutter_around(layout.clutter, c) >= ep.min_goal_clutter &&
          clutter_between(layout.clutter, target, c) >= ep.min_path_clutter)
        goals.push_back(c);
    }
    if (goals.empty()) continue;
    spec.goal_cell = goals[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(goals.size()) - 1))];

    for (Cell c : layout.clutter)
      spec.objects.push_back({static_cast<int>(uniform_int(rng, 0, m.num_categories - 1)), c});
    spec.objects.push_back({cats[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<std::int64_t>(cats.size()) - 1))], target});
    spec.target_index = static_cast<int>(spec.objects.size()) - 1;

    if (solvable(spec, scene, ep.horizon, ep.variant)) return spec;
  }
  throw GenerationFailed("no solvable episode for " + episode_id);
}

json cell_json(Cell c) { return json::array({c.x, c.y}); }
Cell cell_from(const json& j) { return {j.at(0).get<int>(), j.at(1).get<int>()}; }

json manifest_json(const DatasetManifest& m) {
  return {
      {"seed", m.seed},
      {"train_scenes", m.train_scenes},
      {"val_scenes", m.val_scenes},
      {"test_scenes", m.test_scenes},
      {"episodes_per_scene", m.episodes_per_scene},
      {"num_categories", m.num_categories},
      {"seen_categories", m.seen_categories},
      {"novel_categories", m.novel_categories},
      {"scene",
       {{"min_size", m.scene.min_size},
        {"max_size", m.scene.max_size},
        {"min_clutter", m.scene.min_clutter},
        {"max_clutter", m.scene.max_clutter},
        {"min_wall_segments", m.scene.min_wall_segments},
        {"max_wall_segments", m.scene.max_wall_segments},
        {"cell_size_m", m.scene.cell_size_m},
        {"max_attempts", m.scene.max_attempts}}},
      {"episode",
       {{"min_target_distance", m.episode.min_target_distance},
        {"max_target_distance", m.episode.max_target_distance},
        {"min_goal_distance", m.episode.min_goal_distance},
        {"max_goal_distance", m.episode.max_goal_distance},
        {"clear_radius", m.episode.clear_radius},
        {"min_goal_clutter", m.episode.min_goal_clutter},
        {"min_path_clutter", m.episode.min_path_clutter},
        {"horizon", m.episode.horizon},
        {"variant", sim::variant_name(m.episode.variant)},
        {"max_attempts", m.episode.max_attempts}}},
  };
}

DatasetManifest manifest_from(const json& j) {
  DatasetManifest m;
  m.seed = j.at("seed").get<std::uint64_t>();
  m.train_scenes = j.at("train_scenes").get<int>();
  m.val_scenes = j.at("val_scenes").get<int>();
  m.test_scenes = j.at("test_scenes").get<int>();
  m.episodes_per_scene = j.at("episodes_per_scene").get<int>();
  m.num_categories = j.at("num_categories").get<int>();
  m.seen_categories = j.at("seen_categories").get<std::vector<int>>();
  m.novel_categories = j.at("novel_categories").get<std::vector<int>>();
  const auto& s = j.at("scene");
  m.scene.min_size = s.at("min_size").get<int>();
  m.scene.max_size = s.at("max_size").get<int>();
  m.scene.min_clutter = s.at("min_clutter").get<int>();
  m.scene.max_clutter = s.at("max_clutter").get<int>();
  m.scene.min_wall_segments = s.at("min_wall_segments").get<int>();
  m.scene.max_wall_segments = s.at("max_wall_segments").get<int>();
  m.scene.cell_size_m = s.at("cell_size_m").get<double>();
  m.scene.max_attempts = s.at("max_attempts").get<int>();
  const auto& e = j.at("episode");
  m.episode.min_target_distance = e.at("min_target_distance").get<int>();
  m.episode.max_target_distance = e.at("max_target_distance").get<int>();
  m.episode.min_goal_distance = e.at("min_goal_distance").get<int>();
  m.episode.max_goal_distance = e.at("max_goal_distance").get<int>();
  m.episode.clear_radius = e.at("clear_radius").get<int>();
  m.episode.min_goal_clutter = e.at("min_goal_clutter").get<int>();
  m.episode.min_path_clutter = e.at("min_path_clutter").get<int>();
  m.episode.horizon = e.at("horizon").get<int>();
  m.episode.variant = sim::parse_variant(e.at("variant").get<std::string>());
  m.episode.max_attempts = e.at("max_attempts").get<int>();
  return m;
}

json episode_json(const sim::EpisodeSpec& e) {
  json objects = json::array();
  for (const auto& o : e.objects) objects.push_back({{"category_id", o.category_id}, {"cell", cell_json(o.cell)}});
  return {
      {"record", "episode"},
      {"episode_id", e.episode_id},
      {"scene_id", e.scene_id},
      {"agent_cell", cell_json(e.agent_cell)},
      {"heading", sim::heading_name(e.heading)},
      {"objects", objects},
      {"target_index", e.target_index},
      {"goal_cell", cell_json(e.goal_cell)},
      {"split", sim::split_name(e.split)},
      {"target_novelty", sim::novelty_name(e.target_novelty)},
  };
}

sim::EpisodeSpec episode_from(const json& j) {
  sim::EpisodeSpec e;
  e.episode_id = j.at("episode_id").get<std::string>();
  e.scene_id = j.at("scene_id").get<std::string>();
  e.agent_cell = cell_from(j.at("agent_cell"));
  e.heading = sim::parse_heading(j.at("heading").get<std::string>());
  for (const auto& o : j.at("objects")) e.objects.push_back({o.at("category_id").get<int>(), cell_from(o.at("cell"))});
  e.target_index = j.at("target_index").get<int>();
  e.goal_cell = cell_from(j.at("goal_cell"));
  e.split = sim::parse_split(j.at("split").get<std::string>());
  e.target_novelty = sim::parse_novelty(j.at("target_novelty").get<std::string>());
  return e;
}

std::string two_digit(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%02d", i);
  return buf;
}

std::string three_digit(int i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%03d", i);
  return buf;
}

}  // namespace

Dataset generate_dataset(const DatasetManifest& manifest) {
  manifest.validate();
  Dataset ds;
  ds.manifest = manifest;
  const std::pair<sim::Split, int> splits[] = {
      {sim::Split::Train, manifest.train_scenes},
      {sim::Split::Val, manifest.val_scenes},
      {sim::Split::Test, manifest.test_scenes},
  };
  for (const auto& [split, count] : splits) {
    for (int i = 0; i < count; ++i) {
      const std::string scene_id = std::string(sim::split_name(split)) + "_" + two_digit(i);
      const std::uint64_t scene_seed = mix_seed(manifest.seed, static_cast<std::uint64_t>(split) * 1000 + i);
      SceneLayout layout = generate_scene(scene_seed, manifest.scene);
      Rng rng = make_rng(scene_seed, 0xE915);
      for (int e = 0; e < manifest.episodes_per_scene; ++e) {
        const bool novel = split != sim::Split::Train && e % 2 == 1;
        ds.episodes.push_back(
            sample_episode(rng, layout, manifest, split, novel, scene_id, scene_id + "/ep_" + three_digit(e)));
      }
      ds.scenes.push_back({scene_id, split, std::make_shared<const sim::GridScene>(std::move(layout.scene))});
    }
  }
  return ds;
}

void save_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IOFailure("cannot open " + path.string() + " for writing");
  os << json{{"record", "manifest"},
             {"format_version", dataset.manifest.format_version},
             {"manifest", manifest_json(dataset.manifest)}}
            .dump()
     << '\n';
  for (const auto& s : dataset.scenes) {
    json walls = json::array();
    for (Cell c : s.scene->wall_cells()) walls.push_back(cell_json(c));
    os << json{{"record", "scene"},
               {"scene_id", s.scene_id},
               {"split", sim::split_name(s.split)},
               {"width", s.scene->width()},
               {"height", s.scene->height()},
               {"cell_size_m", s.scene->cell_size_m()},
               {"walls", walls}}
              .dump()
       << '\n';
  }
  for (const auto& e : dataset.episodes) os << episode_json(e).dump() << '\n';
  if (!os) throw IOFailure("write failed for " + path.string());
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IOFailure("cannot open " + path.string());
  Dataset ds;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw IOFailure(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    const auto kind = j.value("record", std::string{});
    if (!have_header) {
      if (kind != "manifest") throw IOFailure(path.string() + ": first record is not a manifest");
      const int version = j.at("format_version").get<int>();
      if (version != kDatasetFormatVersion)
        throw FormatVersionMismatch("dataset format version " + std::to_string(version) + ", expected " +
                                    std::to_string(kDatasetFormatVersion));
      ds.manifest = manifest_from(j.at("manifest"));
      ds.manifest.format_version = version;
      have_header = true;
    } else if (kind == "scene") {
      std::vector<Cell> walls;
      for (const auto& c : j.at("walls")) walls.push_back(cell_from(c));
      ds.scenes.push_back({j.at("scene_id").get<std::string>(), sim::parse_split(j.at("split").get<std::string>()),
                           std::make_shared<const sim::GridScene>(j.at("width").get<int>(), j.at("height").get<int>(),
                                                                  walls, j.at("cell_size_m").get<double>(), false)});
    } else if (kind == "episode") {
      ds.episodes.push_back(episode_from(j));
    } else {
      throw IOFailure(path.string() + ":" + std::to_string(line_no) + ": unknown record kind '" + kind + "'");
    }
  }
  if (!have_header) throw IOFailure(path.string() + ": empty dataset file");
  return ds;
}

}  // namespace dfree::scenes
