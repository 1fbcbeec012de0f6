#include "dfree/eval/report.hpp"

#include <charconv>
#include <cmath>
#include <fstream>

#include "dfree/errors.hpp"

namespace dfree::eval {

using nlohmann::json;

namespace {

std::string num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// JSON has no infinity; thresholds use the string "inf".
json jnum(double v) { return std::isfinite(v) ? json(v) : json(num(v)); }

json diag_json(const LocalOptimumDiagnostics& d) {
  return {{"pickup_rate", d.pickup_rate},
          {"mean_steps_pickup_to_termination",
           d.mean_steps_pickup_to_termination ? json(*d.mean_steps_pickup_to_termination) : json(nullptr)}};
}

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream os(p, std::ios::trunc);
  if (!os) throw IOFailure("cannot write " + p.string());
  os << text;
  if (!os) throw IOFailure("write failed for " + p.string());
}

}  // namespace

AggregateReport aggregate(const std::vector<std::vector<EpisodeRecord>>& per_seed,
                          const std::vector<std::string>& labels, const ReportOptions& opt) {
  if (per_seed.empty()) throw EmptyInput("report over zero seeds");
  if (labels.size() != per_seed.size()) throw std::invalid_argument("one label per seed is required");
  AggregateReport r;
  std::vector<double> srs, srwods;
  std::vector<EpisodeRecord> pooled;
  r.dd_curve.clear();
  for (double th : opt.dd_thresholds) r.dd_curve.emplace_back(th, 0.0);
  for (int k = 0; k <= opt.max_objects; ++k) r.object_curve.emplace_back(k, 0.0);
  for (std::size_t s = 0; s < per_seed.size(); ++s) {
    const auto& recs = per_seed[s];
    SeedSummary ss;
    ss.label = labels[s];
    ss.episodes = static_cast<int>(recs.size());
    ss.sr = success_rate(recs);
    ss.srwod = srwod(recs, opt.srwod_threshold_m);
    ss.diagnostics = local_optimum_diagnostics(recs);
    ss.temporary_displacement = temporary_displacement_fraction(recs, opt.srwod_threshold_m);
    srs.push_back(ss.sr);
    srwods.push_back(ss.srwod);
    const auto dd = dd_curve(recs, opt.dd_thresholds);
    for (std::size_t i = 0; i < dd.size(); ++i) r.dd_curve[i].second += dd[i].second / per_seed.size();
    const auto oc = object_count_curve(recs, opt.max_objects);
    for (std::size_t i = 0; i < oc.size(); ++i) r.object_curve[i].second += oc[i].second / per_seed.size();
    pooled.insert(pooled.end(), recs.begin(), recs.end());
    r.seeds.push_back(std::move(ss));
  }
  double a = 0.0, b = 0.0;
  for (std::size_t i = 0; i < srs.size(); ++i) {
    a += srs[i];
    b += srwods[i];
  }
  r.sr_mean = a / static_cast<double>(srs.size());
  r.srwod_mean = b / static_cast<double>(srs.size());
  r.sr_iqm = iqm(srs);
  r.srwod_iqm = iqm(srwods);
  r.diagnostics = local_optimum_diagnostics(pooled);
  r.temporary_displacement = temporary_displacement_fraction(pooled, opt.srwod_threshold_m);
  r.heatmap = action_heatmap(pooled, opt.heatmap_steps, opt.num_actions);
  return r;
}

json report_to_json(const AggregateReport& r) {
  json seeds = json::array();
  for (const auto& s : r.seeds)
    seeds.push_back({{"label", s.label},
                     {"episodes", s.episodes},
                     {"SR", s.sr},
                     {"SRwoD", s.srwod},
                     {"diagnostics", diag_json(s.diagnostics)},
                     {"temporary_displacement", s.temporary_displacement}});
  json dd = json::array();
  for (const auto& [th, v] : r.dd_curve) dd.push_back({{"threshold_m", jnum(th)}, {"fraction", v}});
  json oc = json::array();
  for (const auto& [k, v] : r.object_curve) oc.push_back({{"k", k}, {"fraction", v}});
  json hm = json::array();
  for (Eigen::Index t = 0; t < r.heatmap.rows(); ++t) {
    std::vector<double> row(r.heatmap.row(t).data(), r.heatmap.row(t).data() + r.heatmap.cols());
    hm.push_back(row);
  }
  return {{"meta", r.meta},
          {"seeds", seeds},
          {"SR", {{"mean", r.sr_mean}, {"iqm", r.sr_iqm}}},
          {"SRwoD", {{"mean", r.srwod_mean}, {"iqm", r.srwod_iqm}}},
          {"dd_curve", dd},
          {"object_count_curve", oc},
          {"diagnostics", diag_json(r.diagnostics)},
          {"temporary_displacement", r.temporary_displacement},
          {"action_heatmap", hm}};
}

void write_report(const AggregateReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_file(dir / "report.json", report_to_json(r).dump(2) + "\n");

  std::string s = "seed,episodes,SR,SRwoD,pickup_rate,mean_steps_pickup_to_termination,temporary_displacement\n";
  for (const auto& x : r.seeds) {
    s += x.label + ',' + std::to_string(x.episodes) + ',' + num(x.sr) + ',' + num(x.srwod) + ',' +
         num(x.diagnostics.pickup_rate) + ',' +
         (x.diagnostics.mean_steps_pickup_to_termination ? num(*x.diagnostics.mean_steps_pickup_to_termination) : "") +
         ',' + num(x.temporary_displacement) + '\n';
  }
  s += "mean,," + num(r.sr_mean) + ',' + num(r.srwod_mean) + ",,,\n";
  s += "iqm,," + num(r.sr_iqm) + ',' + num(r.srwod_iqm) + ",,,\n";
  write_file(dir / "summary.csv", s);

  std::string dd = "threshold_m,fraction\n";
  for (const auto& [th, v] : r.dd_curve) dd += num(th) + ',' + num(v) + '\n';
  write_file(dir / "dd_curve.csv", dd);

  std::string oc = "k,fraction\n";
  for (const auto& [k, v] : r.object_curve) oc += std::to_string(k) + ',' + num(v) + '\n';
  write_file(dir / "object_curve.csv", oc);

  std::string hm = "t";
  for (Eigen::Index a = 0; a < r.heatmap.cols(); ++a) hm += ",a" + std::to_string(a);
  hm += '\n';
  for (Eigen::Index t = 0; t < r.heatmap.rows(); ++t) {
    hm += std::to_string(t);
    for (Eigen::Index a = 0; a < r.heatmap.cols(); ++a) hm += ',' + num(r.heatmap(t, a));
    hm += '\n';
  }
  write_file(dir / "heatmap.csv", hm);
}

}  // namespace dfree::eval
