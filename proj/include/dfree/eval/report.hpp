#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dfree/eval/metrics.hpp"

namespace dfree::eval {

struct SeedSummary {
  std::string label;
  int episodes = 0;
  double sr = 0.0;
  double srwod = 0.0;
  LocalOptimumDiagnostics diagnostics;
  double temporary_displacement = 0.0;
};

struct ReportOptions {
  double srwod_threshold_m = kDefaultSrwodThreshold;
  std::vector<double> dd_thresholds = default_dd_thresholds();
  int max_objects = 8;
  int heatmap_steps = 80;
  int num_actions = 9;
};

struct AggregateReport {
  // Free-form run description (regime, aux mode, split ...).
  nlohmann::json meta = nlohmann::json::object();
  std::vector<SeedSummary> seeds;
  double sr_mean = 0.0;
  double sr_iqm = 0.0;
  double srwod_mean = 0.0;
  double srwod_iqm = 0.0;
  // Curves averaged over seeds.
  std::vector<std::pair<double, double>> dd_curve;
  std::vector<std::pair<int, double>> object_curve;
  // Pooled over all seeds' episodes.
  LocalOptimumDiagnostics diagnostics;
  double temporary_displacement = 0.0;
  ad::Matrix heatmap;
};

// `labels` names each seed's record list. Throws EmptyInput without seeds
// or when a seed has no records.
AggregateReport aggregate(const std::vector<std::vector<EpisodeRecord>>& per_seed,
                          const std::vector<std::string>& labels, const ReportOptions& opt = {});

nlohmann::json report_to_json(const AggregateReport& r);

// report.json plus summary.csv, dd_curve.csv, object_curve.csv and
// heatmap.csv (rows = step, columns = action).
void write_report(const AggregateReport& r, const std::filesystem::path& dir);

}  // namespace dfree::eval
