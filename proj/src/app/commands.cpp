#include "dfree/app/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "dfree/agent/checkpoint.hpp"
#include "dfree/errors.hpp"
#include "dfree/eval/evaluate.hpp"
#include "dfree/sim/environment.hpp"
#include "dfree/sim/trace.hpp"

namespace dfree::app {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& p, const std::string& s) {
  std::ofstream os(p, std::ios::binary);
  os << s;
  if (!os) throw IOFailure("cannot write " + p.string());
}

json read_json(const fs::path& p) {
  std::ifstream is(p);
  if (!is) throw IOFailure("cannot read " + p.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IOFailure(p.string() + ": " + e.what());
  }
}

eval::ReportOptions report_options(const RunConfig& cfg) {
  eval::ReportOptions o;
  o.srwod_threshold_m = cfg.train.sim.srwod_threshold_m;
  o.dd_thresholds = cfg.eval.dd_thresholds;
  o.num_actions = cfg.train.arch.num_actions();
  o.heatmap_steps = cfg.train.sim.horizon;
  return o;
}

}  // namespace

void write_run_files(const RunConfig& cfg) {
  const fs::path dir = run_dir(cfg);
  fs::create_directories(dir);
  write_text(dir / "config.yaml", cfg.text);
  const json run = {{"config_hash", config_hash(cfg)}, {"config", canonical_json(cfg)}};
  write_text(dir / "run.json", run.dump(2) + "\n");
}

fs::path gen_data(const RunConfig& cfg) {
  obtain_dataset(cfg);
  return dataset_path(cfg);
}

rl::TrainResult train_seed(const RunConfig& cfg, std::uint64_t seed, std::ostream* log, const fs::path& resume) {
  const scenes::Dataset ds = obtain_dataset(cfg);
  write_run_files(cfg);
  const fs::path out = seed_dir(cfg, seed);
  rl::ProgressFn progress;
  if (log) {
    progress = [log](const rl::MetricRow& m) {
      if (m.update_index % 10 != 0) return;
      char buf[200];
      std::snprintf(buf, sizeof buf, "update %5d  frames %9lld  return %8.3f  sr %.3f  dT %.3f  lambda %.3f\n",
                    m.update_index, static_cast<long long>(m.frames), m.mean_return, m.sr_train, m.mean_dT,
                    m.lambda_k);
      *log << buf << std::flush;
    };
  }
  return rl::run_training(cfg.train, ds, seed, out, resume, progress);
}

EvalOutput eval_checkpoint(const RunConfig& cfg, const fs::path& checkpoint, sim::Split split) {
  if (!fs::exists(checkpoint)) throw IOFailure("checkpoint not found: " + checkpoint.string());
  const scenes::Dataset ds = obtain_dataset(cfg);
  auto records = eval::evaluate(checkpoint, cfg.train.arch, ds, split, cfg.train.sim, cfg.eval.max_episodes);
  EvalOutput out;
  out.dir = checkpoint.parent_path() / ("eval_" + std::string(sim::split_name(split)));
  fs::create_directories(out.dir);
  eval::write_records(records, out.dir / "records.jsonl");
  out.report = eval::aggregate({records}, {checkpoint.parent_path().filename().string()}, report_options(cfg));
  out.report.meta = {{"checkpoint", checkpoint.string()},
                     {"split", sim::split_name(split)},
                     {"config_hash", config_hash(cfg)}};
  write_text(out.dir / "report.json", eval::report_to_json(out.report).dump(2) + "\n");
  return out;
}

namespace {

struct SeedInput {
  fs::path seed_dir;
  fs::path records;
};

void collect(const fs::path& in, const std::string& eval_name, std::vector<SeedInput>& out) {
  if (fs::exists(in / "records.jsonl")) {
    out.push_back({in.parent_path(), in / "records.jsonl"});
    return;
  }
  if (fs::exists(in / eval_name / "records.jsonl")) {
    out.push_back({in, in / eval_name / "records.jsonl"});
    return;
  }
  std::vector<fs::path> seeds;
  if (fs::is_directory(in))
    for (const auto& e : fs::directory_iterator(in))
      if (e.is_directory() && e.path().filename().string().rfind("seed_", 0) == 0) seeds.push_back(e.path());
  if (seeds.empty()) throw IOFailure("no evaluation records under " + in.string() + " (run eval first)");
  std::sort(seeds.begin(), seeds.end());
  for (const auto& s : seeds) {
    if (!fs::exists(s / eval_name / "records.jsonl"))
      throw IOFailure("missing " + (s / eval_name / "records.jsonl").string());
    out.push_back({s, s / eval_name / "records.jsonl"});
  }
}

std::string fmt(double v, int prec) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", prec, v);
  return buf;
}

void describe(const json& config, TableRow& row) {
  const json& train = config.at("train");
  const std::string regime = train.at("regime");
  const double lam = config.at("reward").at("lambda_disturb");
  const std::string lam_s = fmt(lam, 1);
  row.aux = train.at("aux_mode");
  if (regime == "stage1") {
    row.stage = "1";
    row.reward = "r";
  } else if (regime == "scratch_rprime") {
    row.stage = "scratch";
    row.reward = "r' (lambda=" + lam_s + ")";
  } else if (regime == "lagrangian") {
    row.stage = "scratch";
    row.reward = "Lagrangian (lambda0=" + fmt(config.at("lagrangian").at("lambda0"), 1) + ")";
  } else {
    row.stage = "1 -> 2";
    row.reward = "r -> r' (lambda=" + lam_s + ")";
  }
}

}  // namespace

MergedReport merge_reports(const std::vector<fs::path>& inputs, sim::Split split) {
  if (inputs.empty()) throw ConfigError("report needs at least one directory");
  const std::string eval_name = "eval_" + std::string(sim::split_name(split));
  std::vector<SeedInput> seeds;
  for (const auto& in : inputs) collect(in, eval_name, seeds);
  // Argument order must not change the result.
  std::sort(seeds.begin(), seeds.end(), [](const SeedInput& a, const SeedInput& b) { return a.records < b.records; });
  seeds.erase(std::unique(seeds.begin(), seeds.end(),
                          [](const SeedInput& a, const SeedInput& b) { return a.records == b.records; }),
              seeds.end());

  // Group by config hash.
  std::vector<std::string> order;
  std::map<std::string, std::vector<SeedInput>> groups;
  std::map<std::string, json> configs;
  for (const auto& s : seeds) {
    const fs::path run_json = s.seed_dir.parent_path() / "run.json";
    std::string hash = s.seed_dir.parent_path().string();
    json config;
    if (fs::exists(run_json)) {
      const json r = read_json(run_json);
      hash = r.at("config_hash");
      config = r.at("config");
    }
    if (!groups.count(hash)) {
      order.push_back(hash);
      configs[hash] = config;
    }
    groups[hash].push_back(s);
  }

  MergedReport out;
  out.json = json::array();
  for (const auto& hash : order) {
    const auto& group = groups[hash];
    std::vector<std::vector<eval::EpisodeRecord>> per_seed;
    std::vector<std::string> labels;
    for (const auto& s : group) {
      per_seed.push_back(eval::read_records(s.records));
      labels.push_back(s.seed_dir.filename().string());
    }
    eval::ReportOptions opt;
    const json& config = configs[hash];
    if (!config.is_null()) {
      opt.srwod_threshold_m = config.at("sim").at("srwod_threshold_m");
      opt.num_actions = sim::ActionSpace(sim::parse_variant(config.at("sim").at("action_space").get<std::string>())).size();
      opt.heatmap_steps = config.at("sim").at("horizon");
    }
    eval::AggregateReport agg = eval::aggregate(per_seed, labels, opt);
    TableRow row;
    row.run = hash;
    if (!config.is_null()) describe(config, row);
    row.seeds = static_cast<int>(group.size());
    for (const auto& s : agg.seeds) row.episodes += s.episodes;
    row.sr_mean = agg.sr_mean;
    row.sr_iqm = agg.sr_iqm;
    row.srwod_mean = agg.srwod_mean;
    row.srwod_iqm = agg.srwod_iqm;
    agg.meta = {{"config_hash", hash}, {"split", sim::split_name(split)}, {"config", config}};
    out.rows.push_back(row);
    out.json.push_back(eval::report_to_json(agg));
  }
  return out;
}

std::string format_table(const std::vector<TableRow>& rows) {
  std::ostringstream os;
  char buf[512];
  std::snprintf(buf, sizeof buf, "%-8s  %-26s  %-8s  %5s  %8s  %8s  %10s  %10s  %s\n", "Stage", "Reward", "Aux Task",
                "Seeds", "SR mean", "SR IQM", "SRwoD mean", "SRwoD IQM", "Run");
  os << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-8s  %-26s  %-8s  %5d  %8.1f  %8.1f  %10.1f  %10.1f  %s\n", r.stage.c_str(),
                  r.reward.c_str(), r.aux.c_str(), r.seeds, 100.0 * r.sr_mean, 100.0 * r.sr_iqm,
                  100.0 * r.srwod_mean, 100.0 * r.srwod_iqm, r.run.c_str());
    os << buf;
  }
  return os.str();
}

void trace_episode(const RunConfig& cfg, const fs::path& checkpoint, sim::Split split, int episode_index,
                   std::ostream& os) {
  const scenes::Dataset ds = obtain_dataset(cfg);
  const auto episodes = ds.episodes_in(split);
  if (episode_index < 0 || episode_index >= static_cast<int>(episodes.size()))
    throw ConfigError("episode index " + std::to_string(episode_index) + " outside 0.." +
                      std::to_string(episodes.size() - 1));
  agent::PolicyNet net = agent::load_policy(checkpoint, cfg.train.arch);
  const auto& ep = episodes[static_cast<std::size_t>(episode_index)];
  sim::Environment env(ds.scene(ep.scene_id), cfg.train.sim);
  env.reset(ep);
  sim::TraceWriter writer(os);
  agent::Belief b = agent::initial_belief(net);
  for (int t = 0; !env.state().terminated; ++t) {
    b = agent::belief_update(net, b, env.observe());
    const int a = agent::act(net, b, agent::ActMode::Greedy).action;
    const sim::StepOutcome out = env.step(a);
    writer.write(t, env.action_space().at(a), env.state(), out);
  }
}

}  // namespace dfree::app
