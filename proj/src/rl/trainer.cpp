#include "dfree/rl/trainer.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <memory>
#include <sstream>

#include "dfree/agent/checkpoint.hpp"
#include "dfree/errors.hpp"
#include "dfree/rl/ppo.hpp"
#include "dfree/rl/rollout.hpp"

namespace dfree::rl {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kStateVersion = 1;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

double parse_double(std::string_view s) {
  if (s == "nan") return kNaN;
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw IOFailure("bad number in metrics: " + std::string(s));
  return v;
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw IOFailure("cannot write " + path.string());
    os << text;
    if (!os) throw IOFailure("write failed for " + path.string());
  }
  fs::rename(tmp, path);
}

json row_json(const MetricRow& r) {
  return json::array({r.update_index, r.frames, r.mean_return, r.sr_train, r.mean_dT, r.policy_loss, r.value_loss,
                      r.entropy, r.aux_loss, r.lambda_k});
}

// JSON has no NaN; store it as null.
double num_or_nan(const json& j) { return j.is_null() ? kNaN : j.get<double>(); }

MetricRow row_from(const json& j) {
  return {j.at(0).get<int>(),     j.at(1).get<std::int64_t>(), num_or_nan(j.at(2)), num_or_nan(j.at(3)),
          num_or_nan(j.at(4)),    num_or_nan(j.at(5)),         num_or_nan(j.at(6)), num_or_nan(j.at(7)),
          num_or_nan(j.at(8)),    num_or_nan(j.at(9))};
}

class Run {
 public:
  Run(const TrainConfig& cfg, const scenes::Dataset& ds, std::uint64_t seed, fs::path out, ProgressFn progress)
      : cfg_(cfg), ds_(ds), seed_(seed), out_(std::move(out)), progress_(std::move(progress)),
        net_(cfg.arch, mix_seed(seed, 1)) {
    lag_.lambda = cfg.lagrangian.lambda0;
    lag_.lambda0 = cfg.lagrangian.lambda0;
    lag_.lr = cfg.lagrangian.lr;
    begin_stage(1);
  }

  void init_from(const fs::path& checkpoint) {
    agent::PolicyNet loaded = agent::load_policy(checkpoint, cfg_.arch);
    net_.params().load_json(loaded.params().to_json(false));
    // Carry the counters and log of the run that produced the model so a
    // split curriculum logs exactly like a continuous one.
    const fs::path side = state_path_for(checkpoint);
    if (fs::exists(side)) {
      const json s = read_state(side);
      update_ = s.at("update").get<int>();
      frames_ = s.at("frames").get<std::int64_t>();
      metrics_.clear();
      for (const auto& r : s.at("metrics")) metrics_.push_back(row_from(r));
    }
    start_stage2();
  }

  void resume(const fs::path& state_file) {
    const json s = read_state(state_file);
    if (s.at("regime").get<std::string>() != regime_name(cfg_.regime))
      throw CheckpointMismatch("state file belongs to a " + s.at("regime").get<std::string>() + " run");
    begin_stage(s.at("stage").get<int>());
    pool_->load_state_json(s.at("pool"));
    net_.params().load_json(s.at("optimizer"));
    set_rng_state(rng_, s.at("trainer_rng").get<std::string>());
    update_ = s.at("update").get<int>();
    frames_ = s.at("frames").get<std::int64_t>();
    stage_frames_ = s.at("stage_frames").get<std::int64_t>();
    lag_.lambda = s.at("lambda").at("value").get<double>();
    lag_.jc_estimate = s.at("lambda").at("jc").get<double>();
    aborted_ = s.at("aborted_updates").get<int>();
    metrics_.clear();
    for (const auto& r : s.at("metrics")) metrics_.push_back(row_from(r));
  }

  TrainResult train() {
    const fs::path final_ckpt = out_ / "final.json";
    for (;;) {
      if (stage_frames_ >= stage_budget()) {
        if (cfg_.regime == Regime::Curriculum && stage_ == 1) {
          save(out_ / "stage1_final.json");
          start_stage2();
          continue;
        }
        break;
      }
      one_update();
      if (cfg_.checkpoint_every > 0 && update_ % cfg_.checkpoint_every == 0)
        save(out_ / "checkpoints" / "latest.json");
    }
    save(final_ckpt);
    write_text(out_ / "metrics.csv", metrics_csv(metrics_));
    return {final_ckpt, metrics_, aborted_};
  }

 private:
  static json read_state(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw IOFailure("cannot read " + p.string());
    json s;
    try {
      s = json::parse(is);
    } catch (const json::exception& e) {
      throw IOFailure("malformed state file " + p.string() + ": " + e.what());
    }
    if (s.value("format", std::string{}) != "dfree-train-state") throw CheckpointMismatch("not a training state file");
    if (s.value("version", 0) != kStateVersion) throw FormatVersionMismatch("unsupported training state version");
    return s;
  }

  std::int64_t stage_budget() const {
    if (cfg_.regime == Regime::Curriculum)
      return stage_ == 1 ? cfg_.schedule.stage1_frames : cfg_.schedule.stage2_frames;
    return cfg_.total_frames();
  }

  double stage_lambda() const {
    switch (cfg_.regime) {
      case Regime::Stage1: return 0.0;
      case Regime::ScratchRPrime: return cfg_.schedule.stage2_lambda;
      case Regime::Lagrangian: return lag_.lambda;
      case Regime::Curriculum: return stage_ == 1 ? 0.0 : cfg_.schedule.stage2_lambda;
    }
    return 0.0;
  }

  // Fresh environments, beliefs and minibatch stream for a stage. Every
  // stream depends only on (seed, stage).
  void begin_stage(int stage) {
    stage_ = stage;
    stage_frames_ = 0;
    sim::SimConfig sc = cfg_.sim;
    sc.reward.lambda_disturb = stage_lambda();
    pool_ = std::make_unique<EnvPool>(ds_, sim::Split::Train, sc, cfg_.ppo.workers, cfg_.arch.hidden,
                                      mix_seed(seed_, 10 + static_cast<std::uint64_t>(stage)), cfg_.ppo.gamma);
    rng_ = make_rng(seed_, 20 + static_cast<std::uint64_t>(stage));
  }

  void start_stage2() {
    net_.params().reset_moments();
    begin_stage(2);
  }

  void one_update() {
    RolloutBuffer buf = collect_rollouts(*pool_, net_, cfg_.ppo.rollout_length);
    if (cfg_.regime == Regime::Lagrangian && !buf.finished.empty()) {
      double jc = 0.0;
      for (const auto& e : buf.finished) jc += cfg_.lagrangian.discounted ? e.cost_discounted : e.cost_total;
      lag_ = lagrangian_update(lag_, jc / static_cast<double>(buf.finished.size()));
      pool_->set_lambda_disturb(lag_.lambda);
    }
    const double lambda = stage_lambda();
    assign_training_rewards(buf, lambda);
    compute_gae(buf, cfg_.ppo.gamma, cfg_.ppo.gae_lambda, cfg_.ppo.normalize_advantage);
    const LossReport rep = ppo_update(net_, buf, cfg_.ppo, cfg_.aux, rng_);
    if (rep.aborted) {
      ++aborted_;
      std::cerr << "update " << update_ + 1 << ": non-finite loss, update skipped\n";
    }
    const std::int64_t n = static_cast<std::int64_t>(buf.rows());
    frames_ += n;
    stage_frames_ += n;
    ++update_;

    MetricRow row;
    row.update_index = update_;
    row.frames = frames_;
    row.policy_loss = rep.aborted ? kNaN : rep.policy_loss;
    row.value_loss = rep.aborted ? kNaN : rep.value_loss;
    row.entropy = rep.aborted ? kNaN : rep.entropy;
    row.aux_loss = rep.aborted || cfg_.aux == AuxMode::None ? (rep.aborted ? kNaN : 0.0) : rep.aux_loss;
    row.lambda_k = lambda;
    if (buf.finished.empty()) {
      row.mean_return = row.sr_train = row.mean_dT = kNaN;
    } else {
      double ret = 0.0, sr = 0.0, dt = 0.0;
      for (const auto& e : buf.finished) {
        ret += e.return_base - lambda * e.cost_total;
        sr += e.success ? 1.0 : 0.0;
        dt += e.d_final;
      }
      const double k = static_cast<double>(buf.finished.size());
      row.mean_return = ret / k;
      row.sr_train = sr / k;
      row.mean_dT = dt / k;
    }
    metrics_.push_back(row);
    if (progress_) progress_(row);
  }

  void save(const fs::path& ckpt) {
    agent::save_policy(net_, ckpt);
    json m = json::array();
    for (const auto& r : metrics_) m.push_back(row_json(r));
    const json s = {{"format", "dfree-train-state"},
                    {"version", kStateVersion},
                    {"regime", regime_name(cfg_.regime)},
                    {"aux_mode", aux_mode_name(cfg_.aux)},
                    {"seed", seed_},
                    {"stage", stage_},
                    {"update", update_},
                    {"frames", frames_},
                    {"stage_frames", stage_frames_},
                    {"lambda", {{"value", lag_.lambda}, {"lambda0", lag_.lambda0}, {"jc", lag_.jc_estimate}}},
                    {"trainer_rng", rng_state(rng_)},
                    {"aborted_updates", aborted_},
                    {"optimizer", net_.params().to_json(true)},
                    {"pool", pool_->state_json()},
                    {"metrics", m}};
    write_text(state_path_for(ckpt), s.dump() + "\n");
  }

  const TrainConfig& cfg_;
  const scenes::Dataset& ds_;
  std::uint64_t seed_;
  fs::path out_;
  ProgressFn progress_;
  agent::PolicyNet net_;
  std::unique_ptr<EnvPool> pool_;
  Rng rng_;
  int stage_ = 1;
  int update_ = 0;
  std::int64_t frames_ = 0;
  std::int64_t stage_frames_ = 0;
  LagrangianState lag_;
  std::vector<MetricRow> metrics_;
  int aborted_ = 0;
};

}  // namespace

std::int64_t TrainConfig::total_frames() const {
  if (regime == Regime::Curriculum) return schedule.stage1_frames + schedule.stage2_frames;
  return frames > 0 ? frames : schedule.stage1_frames + schedule.stage2_frames;
}

void TrainConfig::validate() const {
  ppo.validate();
  if (arch.variant != sim.action_variant) throw ConfigError("arch and sim must use the same action space");
  if (arch.window != sim.window) throw ConfigError("arch.window must equal sim.window");
  if (schedule.stage1_frames < 0 || schedule.stage2_frames < 0 || frames < 0)
    throw ConfigError("frame budgets must be non-negative");
  if (schedule.stage2_lambda < 0.0) throw ConfigError("stage-2 lambda must be >= 0");
  if (lagrangian.lambda0 < 0.0) throw ConfigError("lagrangian.lambda0 must be >= 0");
  if (lagrangian.lr < 0.0) throw ConfigError("lagrangian.lr must be >= 0");
  if (checkpoint_every < 0) throw ConfigError("checkpoint_every must be >= 0");
  if (!init_checkpoint.empty() && regime != Regime::Curriculum)
    throw ConfigError("init_checkpoint is only meaningful for the curriculum regime");
}

std::string metrics_csv(const std::vector<MetricRow>& rows) {
  std::string out =
      "update_index,frames,mean_return,SR_train,mean_dT,policy_loss,value_loss,entropy,aux_loss,lambda_k\n";
  for (const auto& r : rows) {
    out += std::to_string(r.update_index) + ',' + std::to_string(r.frames);
    for (double v : {r.mean_return, r.sr_train, r.mean_dT, r.policy_loss, r.value_loss, r.entropy, r.aux_loss,
                     r.lambda_k})
      out += ',' + fmt_double(v);
    out += '\n';
  }
  return out;
}

std::vector<MetricRow> parse_metrics_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::vector<MetricRow> rows;
  if (!std::getline(is, line) || line.rfind("update_index,", 0) != 0) throw IOFailure("metrics CSV lacks its header");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 10) throw IOFailure("metrics CSV row has " + std::to_string(f.size()) + " fields");
    MetricRow r;
    r.update_index = std::stoi(f[0]);
    r.frames = std::stoll(f[1]);
    double* dst[] = {&r.mean_return, &r.sr_train, &r.mean_dT, &r.policy_loss,
                     &r.value_loss,  &r.entropy,  &r.aux_loss, &r.lambda_k};
    for (int k = 0; k < 8; ++k) *dst[k] = parse_double(f[static_cast<std::size_t>(k + 2)]);
    rows.push_back(r);
  }
  return rows;
}

fs::path state_path_for(const fs::path& checkpoint) {
  fs::path p = checkpoint;
  p.replace_extension(".state.json");
  return p;
}

TrainResult run_training(const TrainConfig& cfg, const scenes::Dataset& dataset, std::uint64_t seed,
                         const fs::path& out_dir, const fs::path& resume, const ProgressFn& progress) {
  cfg.validate();
  Run run(cfg, dataset, seed, out_dir, progress);
  if (!resume.empty())
    run.resume(resume);
  else if (!cfg.init_checkpoint.empty())
    run.init_from(cfg.init_checkpoint);
  return run.train();
}

}  // namespace dfree::rl
