#pragma once

#include <filesystem>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dfree/ad/tape.hpp"

namespace dfree::eval {

inline constexpr double kDefaultSrwodThreshold = 0.01;
inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct EpisodeRecord {
  std::string episode_id;
  bool success = false;
  double d_final = 0.0;
  // Non-target objects whose final displacement exceeds the SRwoD threshold.
  int num_disturbed = 0;
  int length = 0;
  bool pickup = false;
  // Step counts (1-based) after the pickup action and the final action;
  // pickup_step is -1 without a pickup.
  int pickup_step = -1;
  int termination_step = 0;
  // "success", "done" or "timeout".
  std::string ended_by;
  std::vector<int> actions;
  std::vector<int> events;

  friend bool operator==(const EpisodeRecord&, const EpisodeRecord&) = default;
};

nlohmann::json record_to_json(const EpisodeRecord& r);
EpisodeRecord record_from_json(const nlohmann::json& j);
void write_records(const std::vector<EpisodeRecord>& records, const std::filesystem::path& path);
std::vector<EpisodeRecord> read_records(const std::filesystem::path& path);

// Both throw EmptyInput on an empty list.
double success_rate(const std::vector<EpisodeRecord>& records);
double srwod(const std::vector<EpisodeRecord>& records, double threshold_m = kDefaultSrwodThreshold);

// (threshold, fraction successful with d_T < threshold). Thresholds must be
// ascending (std::invalid_argument otherwise); +inf is allowed.
std::vector<std::pair<double, double>> dd_curve(const std::vector<EpisodeRecord>& records,
                                                const std::vector<double>& thresholds);
// (k, fraction successful with num_disturbed <= k) for k = 0..max_k.
std::vector<std::pair<int, double>> object_count_curve(const std::vector<EpisodeRecord>& records, int max_k);

// 1-2-5 grid from 1 mm to 10 m, then +inf.
std::vector<double> default_dd_thresholds();

// Interquartile mean: sort, drop floor(n / 4) values from each end, average
// the rest. For five values that is the mean of the middle three. Throws
// EmptyInput on an empty list.
double iqm(std::vector<double> values);

struct LocalOptimumDiagnostics {
  double pickup_rate = 0.0;
  // Mean of termination - pickup over episodes with a pickup; absent when
  // no episode picked up.
  std::optional<double> mean_steps_pickup_to_termination;
};
LocalOptimumDiagnostics local_optimum_diagnostics(const std::vector<EpisodeRecord>& records);

// Fraction of episodes with at least one disturbance event whose final
// disturbance is still below the threshold (objects were moved back).
double temporary_displacement_fraction(const std::vector<EpisodeRecord>& records,
                                       double threshold_m = kDefaultSrwodThreshold);

// Row t holds the empirical action distribution at step t over episodes
// still running at t; rows past every episode end are zero.
ad::Matrix action_heatmap(const std::vector<EpisodeRecord>& records, int t_max, int num_actions);

}  // namespace dfree::eval
