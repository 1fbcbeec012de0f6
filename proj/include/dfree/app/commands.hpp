#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfree/app/config.hpp"
#include "dfree/eval/report.hpp"
#include "dfree/rl/trainer.hpp"

namespace dfree::app {

// Writes config.yaml (verbatim) and run.json into the run directory.
void write_run_files(const RunConfig& cfg);

std::filesystem::path gen_data(const RunConfig& cfg);

// Trains into seed_dir(cfg, seed). `log` receives one line per logged update.
rl::TrainResult train_seed(const RunConfig& cfg, std::uint64_t seed, std::ostream* log = nullptr,
                           const std::filesystem::path& resume = {});

struct EvalOutput {
  std::filesystem::path dir;
  eval::AggregateReport report;
};

// Greedy evaluation of one checkpoint; records.jsonl and report.json go to
// <checkpoint dir>/eval_<split>/.
EvalOutput eval_checkpoint(const RunConfig& cfg, const std::filesystem::path& checkpoint, sim::Split split);

struct TableRow {
  std::string run;
  std::string stage;
  std::string reward;
  std::string aux;
  int seeds = 0;
  int episodes = 0;
  double sr_mean = 0.0;
  double sr_iqm = 0.0;
  double srwod_mean = 0.0;
  double srwod_iqm = 0.0;
};

struct MergedReport {
  std::vector<TableRow> rows;
  nlohmann::json json;
};

// Accepts run directories (containing seed_*), seed directories (containing
// eval_<split>/) and eval directories (containing records.jsonl). Seeds are
// grouped by the config hash stored in run.json. Reads files only.
MergedReport merge_reports(const std::vector<std::filesystem::path>& inputs, sim::Split split);
std::string format_table(const std::vector<TableRow>& rows);

// Greedy rollout of one episode as JSONL trace lines.
void trace_episode(const RunConfig& cfg, const std::filesystem::path& checkpoint, sim::Split split, int episode_index,
                   std::ostream& os);

}  // namespace dfree::app
