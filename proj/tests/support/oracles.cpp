#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "dfree/ad/losses.hpp"
#include "dfree/ad/tape.hpp"
#include "dfree/rl/config.hpp"
#include "dfree/sim/environment.hpp"

namespace dfree::testing {

scenes::DatasetManifest small_manifest(std::uint64_t seed) {
  scenes::DatasetManifest m;
  m.seed = seed;
  m.train_scenes = 3;
  m.val_scenes = 2;
  m.test_scenes = 2;
  m.episodes_per_scene = 8;
  return m;
}

TelescopingResult telescoping_check(const scenes::Dataset& ds, double lambda, int episodes, std::uint64_t seed) {
  sim::SimConfig cfg;
  cfg.reward.lambda_disturb = lambda;
  Rng rng = make_rng(seed, 77);
  TelescopingResult res;
  res.min_d_final = INFINITY;
  for (int e = 0; e < episodes; ++e) {
    const auto& spec = ds.episodes[static_cast<std::size_t>(e) % ds.episodes.size()];
    sim::Environment env(ds.scene(spec.scene_id), cfg);
    env.reset(spec);
    double sum_r = 0.0;
    double sum_rp = 0.0;
    while (!env.state().terminated) {
      const int a = static_cast<int>(uniform_int(rng, 0, env.action_space().size() - 1));
      const sim::StepOutcome out = env.step(a);
      sum_r += out.base_reward;
      sum_rp += out.shaped_reward;
    }
    const double dT = env.disturbance();
    res.max_abs_error = std::max(res.max_abs_error, std::abs((sum_rp - sum_r) + lambda * dT));
    res.min_d_final = std::min(res.min_d_final, dT);
    if (dT > 0.0) ++res.with_disturbance;
    ++res.episodes;
  }
  return res;
}

eval::EpisodeRecord random_record(Rng& rng, int horizon) {
  eval::EpisodeRecord r;
  r.episode_id = "r" + std::to_string(rng() % 100000);
  r.length = static_cast<int>(uniform_int(rng, 1, horizon));
  r.termination_step = r.length;
  r.pickup = uniform01(rng) < 0.6;
  r.success = r.pickup && uniform01(rng) < 0.6;
  if (r.pickup) r.pickup_step = static_cast<int>(uniform_int(rng, 1, r.length));
  r.ended_by = r.success ? "success" : (r.length == horizon ? "timeout" : "done");
  // Exact zeros are common: many episodes never touch anything.
  const double u = uniform01(rng);
  r.d_final = u < 0.4 ? 0.0 : 0.25 * static_cast<double>(uniform_int(rng, 1, 12)) * uniform01(rng);
  r.num_disturbed = r.d_final >= eval::kDefaultSrwodThreshold ? static_cast<int>(uniform_int(rng, 1, 4)) : 0;
  return r;
}

namespace {

std::vector<eval::EpisodeRecord> random_set(Rng& rng) {
  std::vector<eval::EpisodeRecord> v(static_cast<std::size_t>(uniform_int(rng, 1, 60)));
  for (auto& r : v) r = random_record(rng);
  return v;
}

}  // namespace

std::string check_srwod_le_sr(std::uint64_t seed, int sets) {
  Rng rng = make_rng(seed, 1);
  for (int i = 0; i < sets; ++i) {
    const auto v = random_set(rng);
    const double sr = eval::success_rate(v);
    const double wod = eval::srwod(v);
    if (wod > sr) {
      std::ostringstream os;
      os << "set " << i << ": SRwoD " << wod << " > SR " << sr;
      return os.str();
    }
  }
  return {};
}

std::string check_dd_curve_properties(std::uint64_t seed, int sets) {
  Rng rng = make_rng(seed, 2);
  const auto thresholds = eval::default_dd_thresholds();
  const auto at_001 = std::find(thresholds.begin(), thresholds.end(), 0.01);
  if (at_001 == thresholds.end()) return "default thresholds lack 0.01";
  const auto i001 = static_cast<std::size_t>(at_001 - thresholds.begin());
  for (int i = 0; i < sets; ++i) {
    const auto v = random_set(rng);
    const auto curve = eval::dd_curve(v, thresholds);
    for (std::size_t k = 1; k < curve.size(); ++k)
      if (curve[k].second < curve[k - 1].second) return "set " + std::to_string(i) + ": curve decreases";
    if (curve[i001].second != eval::srwod(v, 0.01)) return "set " + std::to_string(i) + ": dd(0.01) != SRwoD";
    if (curve.back().second != eval::success_rate(v)) return "set " + std::to_string(i) + ": plateau != SR";
  }
  return {};
}

std::string check_iqm_example() {
  const double v = eval::iqm({10, 20, 30, 40, 90});
  if (v != 30.0) return "iqm([10,20,30,40,90]) = " + std::to_string(v);
  return {};
}

std::string check_focal_gamma0(double tol) {
  for (int i = 1; i < 100; ++i) {
    const double p = i / 100.0;
    for (int c = 0; c <= 1; ++c) {
      const double ce = -(c * std::log(p) + (1 - c) * std::log(1.0 - p));
      const double scalar = ad::focal_loss(p, c, 0.0, 0.5);
      ad::Tape t(false);
      const double taped = t.scalar(ad::focal_loss(t.constant(ad::Matrix::Constant(1, 1, p)), {double(c)}, 0.0, 0.5));
      if (std::abs(scalar - 0.5 * ce) > tol || std::abs(taped - 0.5 * ce) > tol) {
        std::ostringstream os;
        os.precision(17);
        os << "p=" << p << " c=" << c << ": focal " << scalar << " / " << taped << " vs 0.5 CE " << 0.5 * ce;
        return os.str();
      }
    }
  }
  return {};
}

std::string check_lagrangian_nonnegative(std::uint64_t seed, int updates) {
  Rng rng = make_rng(seed, 3);
  rl::LagrangianState s;
  s.lambda0 = s.lambda = 15.0 * uniform01(rng);
  for (int i = 0; i < updates; ++i) {
    // Costs can be negative when episodes restore clutter pushed earlier.
    const double jc = 40.0 * (uniform01(rng) - 0.6);
    s.lr = uniform01(rng) < 0.1 ? 5.0 * uniform01(rng) : 0.05;
    s = rl::lagrangian_update(s, jc);
    if (!(s.lambda >= 0.0)) return "lambda became " + std::to_string(s.lambda) + " at update " + std::to_string(i);
  }
  return {};
}

}  // namespace dfree::testing
