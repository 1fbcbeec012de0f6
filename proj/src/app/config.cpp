#include "dfree/app/config.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "dfree/errors.hpp"
#include "dfree/eval/metrics.hpp"

namespace dfree::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string at_line(const YAML::Node& n) {
  const auto m = n.Mark();
  return m.line >= 0 ? " (line " + std::to_string(m.line + 1) + ")" : "";
}

// A mapping node whose keys are consumed one by one; leftovers are errors.
class Section {
 public:
  Section(YAML::Node node, std::string path) : node_(std::move(node)), path_(std::move(path)) {
    if (node_ && !node_.IsNull() && !node_.IsMap())
      throw ConfigError("'" + (path_.empty() ? std::string("<root>") : path_) + "' must be a mapping" + at_line(node_));
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!node_ || !node_.IsMap()) return;
    const YAML::Node v = node_[key];
    if (!v) return;
    try {
      out = v.as<T>();
    } catch (const YAML::Exception&) {
      throw ConfigError("key '" + full(key) + "' has a value of the wrong type" + at_line(v));
    }
  }

  // Enum-like values parsed from strings.
  template <typename T, typename Parse>
  void get_enum(const std::string& key, T& out, Parse parse) {
    std::string s;
    bool present = false;
    used_.insert(key);
    if (node_ && node_.IsMap() && node_[key]) {
      present = true;
      get(key, s);
    }
    if (!present) return;
    try {
      out = parse(s);
    } catch (const std::exception& e) {
      throw ConfigError("key '" + full(key) + "': " + e.what() + at_line(node_[key]));
    }
  }

  Section sub(const std::string& key) {
    used_.insert(key);
    YAML::Node child;
    if (node_ && node_.IsMap() && node_[key]) child = node_[key];
    return Section(child, full(key));
  }

  int line_of(const std::string& key) const {
    return node_ && node_.IsMap() && node_[key] ? node_[key].Mark().line + 1 : 0;
  }
  std::string full(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const auto key = kv.first.as<std::string>();
      if (!used_.count(key)) throw ConfigError("unknown key '" + full(key) + "'" + at_line(kv.first));
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::set<std::string> used_;
};

// Re-raises std::invalid_argument / ConfigError from a validator with the
// section's line attached.
template <typename F>
void validated(const Section& s, const std::string& key, F&& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + (s.line_of(key) ? " (section '" + key + "' at line " +
                                                                    std::to_string(s.line_of(key)) + ")"
                                                              : ""));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid '") + key + "' section: " + e.what() +
                      (s.line_of(key) ? " (line " + std::to_string(s.line_of(key)) + ")" : ""));
  }
}

void read_scenes(Section s, scenes::DatasetManifest& m) {
  s.get("seed", m.seed);
  s.get("train_scenes", m.train_scenes);
  s.get("val_scenes", m.val_scenes);
  s.get("test_scenes", m.test_scenes);
  s.get("episodes_per_scene", m.episodes_per_scene);
  s.get("num_categories", m.num_categories);
  s.get("seen_categories", m.seen_categories);
  s.get("novel_categories", m.novel_categories);
  s.get("min_size", m.scene.min_size);
  s.get("max_size", m.scene.max_size);
  s.get("min_clutter", m.scene.min_clutter);
  s.get("max_clutter", m.scene.max_clutter);
  s.get("min_wall_segments", m.scene.min_wall_segments);
  s.get("max_wall_segments", m.scene.max_wall_segments);
  s.get("cell_size_m", m.scene.cell_size_m);
  s.get("max_scene_attempts", m.scene.max_attempts);
  Section e = s.sub("episode");
  e.get("min_target_distance", m.episode.min_target_distance);
  e.get("max_target_distance", m.episode.max_target_distance);
  e.get("min_goal_distance", m.episode.min_goal_distance);
  e.get("max_goal_distance", m.episode.max_goal_distance);
  e.get("clear_radius", m.episode.clear_radius);
  e.get("min_goal_clutter", m.episode.min_goal_clutter);
  e.get("min_path_clutter", m.episode.min_path_clutter);
  e.get("max_attempts", m.episode.max_attempts);
  e.finish();
  s.finish();
}

}  // namespace

RunConfig parse_run_config(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::ParserException& e) {
    throw ConfigError("config is not valid YAML at line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  RunConfig cfg;
  cfg.text = text;
  Section r(root, "");
  r.get("seeds", cfg.seeds);
  r.get("output_dir", cfg.output_dir);
  if (cfg.seeds.empty()) throw ConfigError("'seeds' must list at least one seed (line " + std::to_string(r.line_of("seeds")) + ")");

  read_scenes(r.sub("scenes"), cfg.scenes);

  auto& t = cfg.train;
  {
    Section s = r.sub("sim");
    s.get("horizon", t.sim.horizon);
    s.get("tau_m", t.sim.tau_m);
    s.get("srwod_threshold_m", t.sim.srwod_threshold_m);
    s.get("window", t.sim.window);
    s.get_enum("action_space", t.sim.action_variant, [](const std::string& v) { return sim::parse_variant(v); });
    s.finish();
  }
  {
    Section s = r.sub("reward");
    auto& w = t.sim.reward;
    s.get("step_penalty", w.step_penalty);
    s.get("failed_action_penalty", w.failed_action_penalty);
    s.get("shaping_per_m", w.shaping_per_m);
    s.get("pickup_bonus", w.pickup_bonus);
    s.get("success_reward", w.success_reward);
    // lambda_disturb of r'; the trainer switches it per stage.
    s.get("lambda_disturb", t.schedule.stage2_lambda);
    s.finish();
  }
  t.arch.variant = t.sim.action_variant;
  t.arch.window = t.sim.window;
  // The solvability filter must use the horizon and actions of training.
  cfg.scenes.episode.horizon = t.sim.horizon;
  cfg.scenes.episode.variant = t.sim.action_variant;
  {
    Section s = r.sub("arch");
    s.get("enc_hidden", t.arch.enc_hidden);
    s.get("enc_out", t.arch.enc_out);
    s.get("goal_embed", t.arch.goal_embed);
    s.get("prev_action_embed", t.arch.prev_action_embed);
    s.get("hidden", t.arch.hidden);
    s.get("disturb_hidden", t.arch.disturb_hidden);
    s.get("invdyn_hidden", t.arch.invdyn_hidden);
    s.finish();
  }
  {
    Section s = r.sub("ppo");
    auto& p = t.ppo;
    s.get("gamma", p.gamma);
    s.get("gae_lambda", p.gae_lambda);
    s.get("clip_eps", p.clip_eps);
    s.get("epochs", p.epochs);
    s.get("minibatches", p.minibatches);
    s.get("value_coef", p.value_coef);
    s.get("entropy_coef", p.entropy_coef);
    s.get("lr", p.lr);
    s.get("max_grad_norm", p.max_grad_norm);
    s.get("normalize_advantage", p.normalize_advantage);
    s.get("aux_weight", p.aux_weight);
    s.get("focal_gamma", p.focal_gamma);
    s.get("focal_alpha", p.focal_alpha);
    s.get("rollout_length", p.rollout_length);
    s.get("workers", p.workers);
    s.finish();
  }
  {
    Section s = r.sub("train");
    s.get_enum("regime", t.regime, [](const std::string& v) { return rl::parse_regime(v); });
    s.get_enum("aux_mode", t.aux, [](const std::string& v) { return rl::parse_aux_mode(v); });
    s.get("stage1_frames", t.schedule.stage1_frames);
    s.get("stage2_frames", t.schedule.stage2_frames);
    s.get("frames", t.frames);
    s.get("checkpoint_every", t.checkpoint_every);
    s.get("init_checkpoint", t.init_checkpoint);
    s.finish();
  }
  {
    Section s = r.sub("lagrangian");
    s.get("lambda0", t.lagrangian.lambda0);
    s.get("lr", t.lagrangian.lr);
    s.get("discounted", t.lagrangian.discounted);
    s.finish();
  }
  cfg.eval.dd_thresholds = eval::default_dd_thresholds();
  {
    Section s = r.sub("eval");
    s.get_enum("split", cfg.eval.split, [](const std::string& v) { return sim::parse_split(v); });
    s.get("max_episodes", cfg.eval.max_episodes);
    s.get("dd_thresholds", cfg.eval.dd_thresholds);
    s.finish();
  }
  r.finish();

  validated(r, "scenes", [&] { cfg.scenes.validate(); });
  validated(r, "ppo", [&] { t.validate(); });
  if (cfg.eval.max_episodes < 0) throw ConfigError("eval.max_episodes must be >= 0");
  return cfg;
}

RunConfig load_run_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IOFailure("cannot read config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return parse_run_config(ss.str());
  } catch (const ConfigError& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* s = std::getenv("DFREE_SEED"); s && *s) {
    try {
      if (*s == '-' || *s == '+') throw std::invalid_argument("sign");
      std::size_t pos = 0;
      const auto v = std::stoull(s, &pos);
      if (pos != std::string(s).size()) throw std::invalid_argument("trailing characters");
      cfg.seeds = {v};
    } catch (const std::exception&) {
      throw ConfigError(std::string("DFREE_SEED is not a non-negative integer: ") + s);
    }
  }
  if (const char* o = std::getenv("DFREE_OUT"); o && *o) cfg.output_dir = o;
}

json canonical_json(const RunConfig& c) {
  const auto& m = c.scenes;
  const auto& t = c.train;
  json scenes = {{"seed", m.seed},
                 {"train_scenes", m.train_scenes},
                 {"val_scenes", m.val_scenes},
                 {"test_scenes", m.test_scenes},
                 {"episodes_per_scene", m.episodes_per_scene},
                 {"num_categories", m.num_categories},
                 {"seen_categories", m.seen_categories},
                 {"novel_categories", m.novel_categories},
                 {"min_size", m.scene.min_size},
                 {"max_size", m.scene.max_size},
                 {"min_clutter", m.scene.min_clutter},
                 {"max_clutter", m.scene.max_clutter},
                 {"min_wall_segments", m.scene.min_wall_segments},
                 {"max_wall_segments", m.scene.max_wall_segments},
                 {"cell_size_m", m.scene.cell_size_m},
                 {"max_scene_attempts", m.scene.max_attempts},
                 {"episode",
                  {{"min_target_distance", m.episode.min_target_distance},
                   {"max_target_distance", m.episode.max_target_distance},
                   {"min_goal_distance", m.episode.min_goal_distance},
                   {"max_goal_distance", m.episode.max_goal_distance},
                   {"clear_radius", m.episode.clear_radius},
                   {"min_goal_clutter", m.episode.min_goal_clutter},
                   {"min_path_clutter", m.episode.min_path_clutter},
                   {"horizon", m.episode.horizon},
                   {"action_space", sim::variant_name(m.episode.variant)},
                   {"max_attempts", m.episode.max_attempts}}}};
  const auto& w = t.sim.reward;
  const auto& p = t.ppo;
  const auto& a = t.arch;
  return {{"scenes", scenes},
          {"sim",
           {{"horizon", t.sim.horizon},
            {"tau_m", t.sim.tau_m},
            {"srwod_threshold_m", t.sim.srwod_threshold_m},
            {"window", t.sim.window},
            {"action_space", sim::variant_name(t.sim.action_variant)}}},
          {"reward",
           {{"step_penalty", w.step_penalty},
            {"failed_action_penalty", w.failed_action_penalty},
            {"shaping_per_m", w.shaping_per_m},
            {"pickup_bonus", w.pickup_bonus},
            {"success_reward", w.success_reward},
            {"lambda_disturb", t.schedule.stage2_lambda}}},
          {"arch",
           {{"enc_hidden", a.enc_hidden},
            {"enc_out", a.enc_out},
            {"goal_embed", a.goal_embed},
            {"prev_action_embed", a.prev_action_embed},
            {"hidden", a.hidden},
            {"disturb_hidden", a.disturb_hidden},
            {"invdyn_hidden", a.invdyn_hidden}}},
          {"ppo",
           {{"gamma", p.gamma},
            {"gae_lambda", p.gae_lambda},
            {"clip_eps", p.clip_eps},
            {"epochs", p.epochs},
            {"minibatches", p.minibatches},
            {"value_coef", p.value_coef},
            {"entropy_coef", p.entropy_coef},
            {"lr", p.lr},
            {"max_grad_norm", p.max_grad_norm},
            {"normalize_advantage", p.normalize_advantage},
            {"aux_weight", p.aux_weight},
            {"focal_gamma", p.focal_gamma},
            {"focal_alpha", p.focal_alpha},
            {"rollout_length", p.rollout_length},
            {"workers", p.workers}}},
          {"train",
           {{"regime", rl::regime_name(t.regime)},
            {"aux_mode", rl::aux_mode_name(t.aux)},
            {"stage1_frames", t.schedule.stage1_frames},
            {"stage2_frames", t.schedule.stage2_frames},
            {"frames", t.frames},
            {"checkpoint_every", t.checkpoint_every},
            {"init_checkpoint", t.init_checkpoint}}},
          {"lagrangian",
           {{"lambda0", t.lagrangian.lambda0}, {"lr", t.lagrangian.lr}, {"discounted", t.lagrangian.discounted}}}};
}

namespace {

std::string fnv1a_hex(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

}  // namespace

std::string config_hash(const RunConfig& cfg) { return fnv1a_hex(canonical_json(cfg).dump()); }
std::string scenes_hash(const RunConfig& cfg) { return fnv1a_hex(canonical_json(cfg).at("scenes").dump()); }

fs::path dataset_path(const RunConfig& cfg) {
  return fs::path(cfg.output_dir) / ("data-" + scenes_hash(cfg)) / "dataset.jsonl";
}

fs::path run_dir(const RunConfig& cfg) { return fs::path(cfg.output_dir) / ("run-" + config_hash(cfg)); }

fs::path seed_dir(const RunConfig& cfg, std::uint64_t seed) { return run_dir(cfg) / ("seed_" + std::to_string(seed)); }

scenes::Dataset obtain_dataset(const RunConfig& cfg) {
  const fs::path p = dataset_path(cfg);
  if (fs::exists(p)) {
    scenes::Dataset ds = scenes::load_dataset(p);
    if (!(ds.manifest == cfg.scenes))
      throw ConfigError(p.string() + " was generated from a different scenes section");
    return ds;
  }
  scenes::Dataset ds = scenes::generate_dataset(cfg.scenes);
  fs::create_directories(p.parent_path());
  scenes::save_dataset(ds, p);
  return ds;
}

}  // namespace dfree::app
