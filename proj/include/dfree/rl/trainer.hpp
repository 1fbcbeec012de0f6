#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "dfree/agent/policy.hpp"
#include "dfree/rl/config.hpp"
#include "dfree/scenes/dataset.hpp"
#include "dfree/sim/world.hpp"

namespace dfree::rl {

struct TrainConfig {
  sim::SimConfig sim;
  agent::ArchConfig arch;
  PPOConfig ppo;
  Regime regime = Regime::Stage1;
  AuxMode aux = AuxMode::None;
  CurriculumSchedule schedule;
  LagrangianConfig lagrangian;
  // Frame budget of the single-stage regimes; 0 means N1 + N2 so every
  // regime sees the same total.
  std::int64_t frames = 0;
  // Periodic checkpoint interval in updates; 0 writes only stage ends.
  int checkpoint_every = 50;
  // Curriculum only: skip stage 1 and fine-tune this model instead.
  std::string init_checkpoint;

  std::int64_t total_frames() const;
  void validate() const;
};

struct MetricRow {
  int update_index = 0;
  std::int64_t frames = 0;
  double mean_return = 0.0;
  double sr_train = 0.0;
  double mean_dT = 0.0;
  double policy_loss = 0.0;
  double value_loss = 0.0;
  double entropy = 0.0;
  double aux_loss = 0.0;
  double lambda_k = 0.0;

  friend bool operator==(const MetricRow&, const MetricRow&) = default;
};

// Shortest round-trip formatting; NaN marks updates without a finished
// episode.
std::string metrics_csv(const std::vector<MetricRow>& rows);
std::vector<MetricRow> parse_metrics_csv(const std::string& text);

struct TrainResult {
  std::filesystem::path final_checkpoint;
  std::vector<MetricRow> metrics;
  int aborted_updates = 0;
};

using ProgressFn = std::function<void(const MetricRow&)>;

// Trains one seed under `cfg.regime` and writes into `out_dir`:
//   metrics.csv, final.json (+ final.state.json),
//   stage1_final.json for the curriculum, checkpoints/latest.json
// Passing a `.state.json` sidecar as `resume` continues that run exactly.
TrainResult run_training(const TrainConfig& cfg, const scenes::Dataset& dataset, std::uint64_t seed,
                         const std::filesystem::path& out_dir, const std::filesystem::path& resume = {},
                         const ProgressFn& progress = {});

// Sidecar path belonging to a checkpoint file.
std::filesystem::path state_path_for(const std::filesystem::path& checkpoint);

}  // namespace dfree::rl
