#include "dfree/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dfree/errors.hpp"

namespace dfree::eval {

using nlohmann::json;

json record_to_json(const EpisodeRecord& r) {
  return {{"episode_id", r.episode_id},
          {"success", r.success},
          {"d_T", r.d_final},
          {"num_disturbed", r.num_disturbed},
          {"length", r.length},
          {"pickup", r.pickup},
          {"pickup_step", r.pickup_step},
          {"termination_step", r.termination_step},
          {"ended_by", r.ended_by},
          {"actions", r.actions},
          {"events", r.events}};
}

EpisodeRecord record_from_json(const json& j) {
  EpisodeRecord r;
  r.episode_id = j.at("episode_id").get<std::string>();
  r.success = j.at("success").get<bool>();
  r.d_final = j.at("d_T").get<double>();
  r.num_disturbed = j.at("num_disturbed").get<int>();
  r.length = j.at("length").get<int>();
  r.pickup = j.at("pickup").get<bool>();
  r.pickup_step = j.at("pickup_step").get<int>();
  r.termination_step = j.at("termination_step").get<int>();
  r.ended_by = j.at("ended_by").get<std::string>();
  r.actions = j.at("actions").get<std::vector<int>>();
  r.events = j.at("events").get<std::vector<int>>();
  return r;
}

void write_records(const std::vector<EpisodeRecord>& records, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IOFailure("cannot write " + path.string());
  for (const auto& r : records) os << record_to_json(r).dump() << '\n';
  if (!os) throw IOFailure("write failed for " + path.string());
}

std::vector<EpisodeRecord> read_records(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IOFailure("cannot read " + path.string());
  std::vector<EpisodeRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(record_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw IOFailure(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

namespace {

void require_nonempty(const std::vector<EpisodeRecord>& records, const char* what) {
  if (records.empty()) throw EmptyInput(std::string(what) + " of an empty record list");
}

}  // namespace

double success_rate(const std::vector<EpisodeRecord>& records) {
  require_nonempty(records, "success rate");
  const auto n = std::count_if(records.begin(), records.end(), [](const auto& r) { return r.success; });
  return static_cast<double>(n) / static_cast<double>(records.size());
}

double srwod(const std::vector<EpisodeRecord>& records, double threshold_m) {
  require_nonempty(records, "SRwoD");
  const auto n = std::count_if(records.begin(), records.end(),
                               [&](const auto& r) { return r.success && r.d_final < threshold_m; });
  return static_cast<double>(n) / static_cast<double>(records.size());
}

std::vector<std::pair<double, double>> dd_curve(const std::vector<EpisodeRecord>& records,
                                                const std::vector<double>& thresholds) {
  if (!std::is_sorted(thresholds.begin(), thresholds.end()))
    throw std::invalid_argument("dd_curve thresholds must be ascending");
  std::vector<std::pair<double, double>> out;
  out.reserve(thresholds.size());
  for (double th : thresholds) out.emplace_back(th, records.empty() ? 0.0 : srwod(records, th));
  return out;
}

std::vector<std::pair<int, double>> object_count_curve(const std::vector<EpisodeRecord>& records, int max_k) {
  std::vector<std::pair<int, double>> out;
  for (int k = 0; k <= max_k; ++k) {
    double frac = 0.0;
    if (!records.empty()) {
      const auto n = std::count_if(records.begin(), records.end(),
                                   [&](const auto& r) { return r.success && r.num_disturbed <= k; });
      frac = static_cast<double>(n) / static_cast<double>(records.size());
    }
    out.emplace_back(k, frac);
  }
  return out;
}

std::vector<double> default_dd_thresholds() {
  std::vector<double> out;
  for (double decade = 0.001; decade < 10.0; decade *= 10.0)
    for (double m : {1.0, 2.0, 5.0}) out.push_back(m * decade);
  out.push_back(10.0);
  out.push_back(kInf);
  return out;
}

double iqm(std::vector<double> values) {
  if (values.empty()) throw EmptyInput("iqm of an empty list");
  std::sort(values.begin(), values.end());
  const std::size_t trim = values.size() / 4;
  double sum = 0.0;
  for (std::size_t i = trim; i < values.size() - trim; ++i) sum += values[i];
  return sum / static_cast<double>(values.size() - 2 * trim);
}

LocalOptimumDiagnostics local_optimum_diagnostics(const std::vector<EpisodeRecord>& records) {
  LocalOptimumDiagnostics d;
  if (records.empty()) return d;
  int picked = 0;
  double steps = 0.0;
  for (const auto& r : records) {
    if (!r.pickup) continue;
    ++picked;
    steps += r.termination_step - r.pickup_step;
  }
  d.pickup_rate = static_cast<double>(picked) / static_cast<double>(records.size());
  if (picked > 0) d.mean_steps_pickup_to_termination = steps / picked;
  return d;
}

double temporary_displacement_fraction(const std::vector<EpisodeRecord>& records, double threshold_m) {
  if (records.empty()) return 0.0;
  const auto n = std::count_if(records.begin(), records.end(), [&](const auto& r) {
    return r.d_final < threshold_m && std::any_of(r.events.begin(), r.events.end(), [](int c) { return c != 0; });
  });
  return static_cast<double>(n) / static_cast<double>(records.size());
}

ad::Matrix action_heatmap(const std::vector<EpisodeRecord>& records, int t_max, int num_actions) {
  ad::Matrix h = ad::Matrix::Zero(t_max, num_actions);
  for (const auto& r : records)
    for (int t = 0; t < std::min<int>(t_max, static_cast<int>(r.actions.size())); ++t) {
      const int a = r.actions[static_cast<std::size_t>(t)];
      if (a < 0 || a >= num_actions) throw std::out_of_range("action index outside the heatmap");
      h(t, a) += 1.0;
    }
  for (int t = 0; t < t_max; ++t) {
    const double s = h.row(t).sum();
    if (s > 0.0) h.row(t) /= s;
  }
  return h;
}

}  // namespace dfree::eval
