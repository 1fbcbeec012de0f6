#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dfree/ad/losses.hpp"
#include "dfree/agent/checkpoint.hpp"
#include "dfree/errors.hpp"
#include "dfree/rl/ppo.hpp"
#include "dfree/rl/rollout.hpp"
#include "dfree/rl/trainer.hpp"
#include "support/oracles.hpp"

using namespace dfree;
using ad::Matrix;
namespace fs = std::filesystem;

namespace {

const scenes::Dataset& small_dataset() {
  static const scenes::Dataset ds = scenes::generate_dataset(testing::small_manifest());
  return ds;
}

agent::ArchConfig small_arch() {
  agent::ArchConfig a;
  a.enc_hidden = 16;
  a.enc_out = 12;
  a.goal_embed = 8;
  a.prev_action_embed = 4;
  a.hidden = 12;
  a.disturb_hidden = 16;
  a.invdyn_hidden = 16;
  return a;
}

rl::TrainConfig tiny_train(rl::Regime regime) {
  rl::TrainConfig c;
  c.arch = small_arch();
  c.regime = regime;
  c.ppo.workers = 4;
  c.ppo.minibatches = 2;
  c.ppo.rollout_length = 16;
  c.ppo.epochs = 2;
  c.schedule.stage1_frames = 4 * 16 * 3;
  c.schedule.stage2_frames = 4 * 16 * 2;
  c.checkpoint_every = 0;
  return c;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dfree_rl_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

rl::RolloutBuffer manual_buffer(int steps, int workers) {
  rl::RolloutBuffer b;
  b.steps = steps;
  b.workers = workers;
  const std::size_t n = static_cast<std::size_t>(steps) * workers;
  b.actions.assign(n, 0);
  b.rewards.assign(n, 0.0);
  b.values.assign(n, 0.0);
  b.dones.assign(n, 0.0);
  b.masks.assign(n, 1.0);
  b.bootstrap_values.assign(static_cast<std::size_t>(workers), 0.0);
  return b;
}

// Gives an overwhelming logit to one action so sampling is effectively
// deterministic.
void script_policy(agent::PolicyNet& net, sim::ActionId a) {
  auto& ps = net.params();
  ps.at("actor.w").value.setZero();
  ps.at("actor.b").value.setConstant(-60.0);
  ps.at("actor.b").value(0, net.action_space().index_of(a)) = 60.0;
}

}  // namespace

TEST_SUITE("rl") {

TEST_CASE("gae closed-form cases") {
  auto b = manual_buffer(1, 1);
  b.rewards = {1.0};
  b.dones = {1.0};
  b.bootstrap_values = {123.0};
  rl::compute_gae(b, 0.99, 0.95, false);
  CHECK(b.advantages[0] == 1.0);
  CHECK(b.returns[0] == 1.0);

  auto c = manual_buffer(5, 2);
  for (std::size_t i = 0; i < c.rows(); ++i) c.rewards[i] = 0.5 * static_cast<double>(i) - 1.0;
  rl::compute_gae(c, 1.0, 1.0, false);
  for (int w = 0; w < 2; ++w)
    for (int t = 0; t < 5; ++t) {
      double tail = 0.0;
      for (int s = t; s < 5; ++s) tail += c.rewards[c.index(s, w)];
      CHECK(c.advantages[c.index(t, w)] == doctest::Approx(tail).epsilon(1e-12));
    }

  // A done cuts the recursion and the bootstrap.
  auto d = manual_buffer(3, 1);
  d.rewards = {1.0, 2.0, 4.0};
  d.values = {0.5, 0.25, 1.0};
  d.dones = {0.0, 1.0, 0.0};
  d.bootstrap_values = {2.0};
  const double g = 0.9, l = 0.8;
  rl::compute_gae(d, g, l, false);
  const double a2 = 4.0 + g * 2.0 - 1.0;
  const double a1 = 2.0 - 0.25;
  const double a0 = (1.0 + g * 0.25 - 0.5) + g * l * a1;
  CHECK(d.advantages[2] == doctest::Approx(a2));
  CHECK(d.advantages[1] == doctest::Approx(a1));
  CHECK(d.advantages[0] == doctest::Approx(a0));
  CHECK(d.returns[0] == doctest::Approx(a0 + 0.5));
}

TEST_CASE("gae normalization standardizes the batch") {
  auto b = manual_buffer(8, 3);
  Rng rng = make_rng(1);
  for (auto& r : b.rewards) r = 3.0 * uniform01(rng) + 1.0;
  for (auto& v : b.values) v = uniform01(rng);
  rl::compute_gae(b, 0.99, 0.95, true);
  double mean = 0.0, sq = 0.0;
  for (double a : b.advantages) mean += a;
  mean /= static_cast<double>(b.rows());
  for (double a : b.advantages) sq += (a - mean) * (a - mean);
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::sqrt(sq / static_cast<double>(b.rows())) == doctest::Approx(1.0).epsilon(1e-6));
  auto bad = manual_buffer(2, 1);
  bad.values.pop_back();
  CHECK_THROWS_AS(rl::compute_gae(bad, 0.99, 0.95, false), ShapeMismatch);
}

TEST_CASE("lagrangian multiplier update") {
  rl::LagrangianState s;
  s.lambda = 1.0;
  s.lr = 0.1;
  CHECK(rl::lagrangian_update(s, 0.5).lambda == doctest::Approx(1.05));
  s.lambda = 0.1;
  CHECK(rl::lagrangian_update(s, -5.0).lambda == 0.0);
  s.lambda = 0.7;
  CHECK(rl::lagrangian_update(s, 0.0).lambda == 0.7);
  CHECK(rl::lagrangian_update(s, 0.25).jc_estimate == 0.25);
  CHECK(testing::check_lagrangian_nonnegative(3, 5000) == "");
}

TEST_CASE("rollout shapes and the scripted trace") {
  const auto& ds = small_dataset();
  sim::SimConfig sc;
  sc.horizon = 10;
  sc.reward.lambda_disturb = 15.0;
  const int W = 2, L = 14;
  rl::EnvPool pool(ds, sim::Split::Train, sc, W, small_arch().hidden, 5, 0.99);
  agent::PolicyNet net(small_arch(), 1);
  script_policy(net, sim::ActionId::MoveAhead);

  std::vector<sim::Environment> twins;
  for (int w = 0; w < W; ++w) twins.push_back(pool.env(w));
  const auto buf = rl::collect_rollouts(pool, net, L);
  CHECK(buf.rows() == static_cast<std::size_t>(W * L));
  CHECK(buf.obs.rows() == W * L);
  CHECK(buf.bootstrap_values.size() == static_cast<std::size_t>(W));
  CHECK(buf.finished.size() == static_cast<std::size_t>(W));

  const int move = net.action_space().index_of(sim::ActionId::MoveAhead);
  for (int w = 0; w < W; ++w) {
    sim::Environment& env = twins[static_cast<std::size_t>(w)];
    for (int t = 0; t < sc.horizon; ++t) {
      const std::size_t i = buf.index(t, w);
      CAPTURE(w);
      CAPTURE(t);
      const auto obs = env.observe();
      CHECK(Eigen::Map<const Eigen::RowVectorXd>(obs.window.data(), buf.obs.window.cols()) == buf.obs.window.row(i));
      CHECK(buf.masks[i] == (t == 0 ? 0.0 : 1.0));
      CHECK(buf.actions[i] == move);
      const auto out = env.step(move);
      CHECK(buf.base_rewards[i] == out.base_reward);
      CHECK(buf.shaped_rewards[i] == out.shaped_reward);
      CHECK(buf.costs[i] == out.disturbance_delta);
      CHECK(buf.labels[i] == (out.disturbance_event ? 1.0 : 0.0));
      CHECK(buf.dones[i] == (out.episode_done ? 1.0 : 0.0));
    }
    CHECK(env.state().terminated);
    // The worker moved straight on to its next episode.
    const std::size_t next = buf.index(sc.horizon, w);
    CHECK(buf.masks[next] == 0.0);
    CHECK(buf.obs.prev_action[next] == net.action_space().start_token());
  }
  for (const auto& e : buf.finished) CHECK(e.length == sc.horizon);
}

TEST_CASE("random-policy disturbance events are a minority") {
  const auto& ds = small_dataset();
  sim::SimConfig sc;
  rl::EnvPool pool(ds, sim::Split::Train, sc, 4, small_arch().hidden, 9, 0.99);
  agent::PolicyNet net(small_arch(), 2);
  net.params().at("actor.w").value.setZero();
  net.params().at("actor.b").value.setZero();
  const auto buf = rl::collect_rollouts(pool, net, 200);
  double events = 0.0;
  for (double c : buf.labels) events += c;
  const double frac = events / static_cast<double>(buf.rows());
  MESSAGE("random-policy event fraction " << frac);
  CHECK(frac > 0.0);
  CHECK(frac < 0.25);
}

TEST_CASE("training rewards and telescoping per logged episode") {
  const auto& ds = small_dataset();
  sim::SimConfig sc;
  sc.reward.lambda_disturb = 15.0;
  rl::EnvPool pool(ds, sim::Split::Train, sc, 3, small_arch().hidden, 4, 0.99);
  agent::PolicyNet net(small_arch(), 3);
  net.params().at("actor.w").value.setZero();
  net.params().at("actor.b").value.setZero();
  auto buf = rl::collect_rollouts(pool, net, 240);
  rl::assign_training_rewards(buf, 0.0);
  CHECK(buf.rewards == buf.base_rewards);
  rl::assign_training_rewards(buf, 15.0);
  for (std::size_t i = 0; i < buf.rows(); ++i) CHECK(buf.rewards[i] == doctest::Approx(buf.shaped_rewards[i]).epsilon(1e-12));
  REQUIRE(!buf.finished.empty());
  for (const auto& e : buf.finished) CHECK(std::abs(e.return_shaped - e.return_base + 15.0 * e.d_final) <= 1e-9);
  for (const auto& e : buf.finished) CHECK(std::abs(e.cost_total - e.d_final) <= 1e-9);
}

TEST_CASE("ppo loss identities") {
  const auto& ds = small_dataset();
  sim::SimConfig sc;
  rl::EnvPool pool(ds, sim::Split::Train, sc, 4, small_arch().hidden, 2, 0.99);
  agent::PolicyNet net(small_arch(), 4);
  auto buf = rl::collect_rollouts(pool, net, 12);
  rl::assign_training_rewards(buf, 0.0);
  rl::compute_gae(buf, 0.99, 0.95, false);
  const std::vector<int> all = {0, 1, 2, 3};
  rl::PPOConfig cfg;

  SUBCASE("unchanged policy: ratio 1, loss is minus the mean advantage") {
    rl::LossParts parts;
    ad::Tape t;
    rl::ppo_minibatch_loss(t, net, buf, all, cfg, rl::AuxMode::None, &parts);
    double mean_adv = 0.0;
    for (double a : buf.advantages) mean_adv += a;
    mean_adv /= static_cast<double>(buf.rows());
    CHECK(parts.policy == doctest::Approx(-mean_adv).epsilon(1e-9));
    CHECK(std::abs(parts.approx_kl) < 1e-12);
    CHECK(parts.clip_fraction == 0.0);
    CHECK(parts.aux == 0.0);
  }

  SUBCASE("zero advantages leave only value and entropy gradients on the actor") {
    std::fill(buf.advantages.begin(), buf.advantages.end(), 0.0);
    auto grad_of = [&](double entropy_coef) {
      rl::PPOConfig c = cfg;
      c.entropy_coef = entropy_coef;
      net.params().zero_grad();
      ad::Tape t;
      t.backward(rl::ppo_minibatch_loss(t, net, buf, all, c, rl::AuxMode::None));
      return Matrix(net.params().at("actor.b").grad);
    };
    CHECK(grad_of(0.0).cwiseAbs().maxCoeff() < 1e-14);
    CHECK(grad_of(0.01).cwiseAbs().maxCoeff() > 1e-8);
  }

  SUBCASE("disturbance aux loss at p = 0.5 with no events") {
    std::fill(buf.labels.begin(), buf.labels.end(), 0.0);
    net.params().at("disturb.w2").value.setZero();
    net.params().at("disturb.b2").value.setZero();
    rl::LossParts parts;
    ad::Tape t;
    rl::ppo_minibatch_loss(t, net, buf, all, cfg, rl::AuxMode::Disturb, &parts);
    CHECK(parts.aux == doctest::Approx(0.5 * 0.25 * std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("ppo update steps and reports") {
    Rng rng = make_rng(1);
    const auto before = net.params().at("actor.w").value;
    const auto rep = rl::ppo_update(net, buf, cfg, rl::AuxMode::Disturb, rng);
    CHECK_FALSE(rep.aborted);
    CHECK(rep.optimizer_steps == cfg.epochs * cfg.minibatches);
    CHECK(net.params().at("actor.w").value != before);
    CHECK(rep.aux_loss > 0.0);
  }

  SUBCASE("non-finite loss rolls the update back") {
    buf.advantages[3] = NAN;
    Rng rng = make_rng(1);
    const ad::ParamStore before = net.params();
    const auto rep = rl::ppo_update(net, buf, cfg, rl::AuxMode::None, rng);
    CHECK(rep.aborted);
    for (const auto& name : before.names()) {
      CHECK(net.params().at(name).value == before.at(name).value);
      CHECK(net.params().at(name).m == before.at(name).m);
    }
    CHECK(net.params().step() == before.step());
  }
}

TEST_CASE("clipped surrogate equals the plain policy gradient inside the trust region") {
  const auto& ds = small_dataset();
  rl::EnvPool pool(ds, sim::Split::Train, sim::SimConfig{}, 2, small_arch().hidden, 8, 0.99);
  agent::PolicyNet net(small_arch(), 6);
  auto buf = rl::collect_rollouts(pool, net, 10);
  rl::assign_training_rewards(buf, 0.0);
  rl::compute_gae(buf, 0.99, 0.95, false);
  // Small perturbation so ratios differ from 1 but stay inside [0.8, 1.2].
  net.params().at("actor.b").value(0, 0) += 0.05;
  auto grad = [&](double eps) {
    rl::PPOConfig c;
    c.clip_eps = eps;
    c.value_coef = 0.0;
    c.entropy_coef = 0.0;
    rl::LossParts parts;
    net.params().zero_grad();
    ad::Tape t;
    t.backward(rl::ppo_minibatch_loss(t, net, buf, {0, 1}, c, rl::AuxMode::None, &parts));
    CHECK(parts.clip_fraction == 0.0);
    return Matrix(net.params().at("actor.w").grad);
  };
  const Matrix clipped = grad(0.2), plain = grad(1e6);
  CHECK((clipped - plain).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("aux losses ignore rows past an episode boundary") {
  const auto& ds = small_dataset();
  sim::SimConfig sc;
  sc.horizon = 5;
  rl::EnvPool pool(ds, sim::Split::Train, sc, 2, small_arch().hidden, 3, 0.99);
  agent::PolicyNet net(small_arch(), 7);
  auto buf = rl::collect_rollouts(pool, net, 10);
  rl::assign_training_rewards(buf, 0.0);
  rl::compute_gae(buf, 0.99, 0.95, false);
  rl::PPOConfig cfg;
  cfg.value_coef = cfg.entropy_coef = 0.0;
  rl::LossParts parts;
  {
    ad::Tape t;
    rl::ppo_minibatch_loss(t, net, buf, {0, 1}, cfg, rl::AuxMode::InvDyn, &parts);
  }
  // Independent masked mean: a terminal row's "next observation" belongs to
  // the following episode and carries no target.
  ad::Tape t(false);
  const auto un = net.unroll(t, buf.obs, buf.h0, buf.masks, buf.steps, buf.workers);
  const Matrix& beliefs = t.value(un.beliefs);
  double total = 0.0, all_rows = 0.0;
  int valid = 0, terminal = 0;
  for (int w = 0; w < buf.workers; ++w)
    for (int s = 0; s < buf.steps; ++s) {
      const std::size_t i = buf.index(s, w);
      const Matrix next = s + 1 < buf.steps ? Matrix(buf.obs.window.row(static_cast<Eigen::Index>(buf.index(s + 1, w))))
                                            : Matrix(buf.final_windows.row(w));
      ad::Tape r(false);
      const Matrix logits = r.value(net.invdyn_logits(r, r.constant(beliefs.row(static_cast<Eigen::Index>(i))),
                                                      net.encode(r, next)));
      const double ce = ad::cross_entropy(std::vector<double>(logits.data(), logits.data() + logits.size()),
                                          buf.actions[i]);
      all_rows += ce;
      if (buf.dones[i] == 1.0) {
        ++terminal;
        continue;
      }
      total += ce;
      ++valid;
    }
  REQUIRE(terminal > 0);
  CHECK(parts.aux == doctest::Approx(total / valid).epsilon(1e-10));
  CHECK(parts.aux != doctest::Approx(all_rows / static_cast<double>(buf.rows())).epsilon(1e-10));
}

TEST_CASE("training is deterministic and logs every update") {
  const auto& ds = small_dataset();
  auto cfg = tiny_train(rl::Regime::ScratchRPrime);
  cfg.aux = rl::AuxMode::Disturb;
  const fs::path da = fresh_dir("det_a"), db = fresh_dir("det_b");
  const auto a = rl::run_training(cfg, ds, 3, da);
  const auto b = rl::run_training(cfg, ds, 3, db);
  CHECK(a.metrics.size() == 5);
  CHECK(a.metrics.back().frames == cfg.total_frames());
  CHECK(slurp(da / "metrics.csv") == slurp(db / "metrics.csv"));
  CHECK(slurp(da / "final.json") == slurp(db / "final.json"));
  CHECK(rl::parse_metrics_csv(slurp(da / "metrics.csv")).size() == a.metrics.size());
  for (const auto& r : a.metrics) CHECK(r.lambda_k == 15.0);
  const auto c = rl::run_training(cfg, ds, 4, fresh_dir("det_c"));
  CHECK(c.metrics.front().policy_loss != a.metrics.front().policy_loss);
}

TEST_CASE("metrics csv round trip keeps NaN markers") {
  std::vector<rl::MetricRow> rows(2);
  rows[0] = {1, 64, 0.1 + 0.2, 0.5, 1.0 / 3.0, -0.01, 2.5, 1.9, 0.0, 15.0};
  rows[1] = {2, 128, NAN, NAN, NAN, 0.02, 1.5, 1.8, 0.03, 15.0};
  const auto back = rl::parse_metrics_csv(rl::metrics_csv(rows));
  REQUIRE(back.size() == 2);
  CHECK(back[0] == rows[0]);
  CHECK(std::isnan(back[1].mean_return));
  CHECK(back[1].aux_loss == 0.03);
  CHECK(rl::metrics_csv(rows).rfind("update_index,frames,mean_return,SR_train,mean_dT,", 0) == 0);
}

TEST_CASE("resuming from a checkpoint reproduces the uninterrupted run") {
  const auto& ds = small_dataset();
  auto cfg = tiny_train(rl::Regime::Curriculum);
  cfg.aux = rl::AuxMode::InvDyn;
  cfg.checkpoint_every = 2;
  const fs::path full = fresh_dir("resume_full"), cut = fresh_dir("resume_cut");
  rl::run_training(cfg, ds, 5, full);
  struct Stop {};
  CHECK_THROWS_AS(rl::run_training(cfg, ds, 5, cut, {},
                                   [](const rl::MetricRow& r) {
                                     if (r.update_index == 3) throw Stop{};
                                   }),
                  Stop);
  const fs::path side = rl::state_path_for(cut / "checkpoints" / "latest.json");
  REQUIRE(fs::exists(side));
  rl::run_training(cfg, ds, 5, cut, side);
  CHECK(slurp(full / "metrics.csv") == slurp(cut / "metrics.csv"));
  CHECK(slurp(full / "final.json") == slurp(cut / "final.json"));

  auto other = cfg;
  other.regime = rl::Regime::Stage1;
  CHECK_THROWS_AS(rl::run_training(other, ds, 5, fresh_dir("resume_bad"), side), CheckpointMismatch);
}

TEST_CASE("curriculum with an empty second stage is stage-1 training") {
  const auto& ds = small_dataset();
  auto cur = tiny_train(rl::Regime::Curriculum);
  cur.schedule.stage2_frames = 0;
  auto s1 = tiny_train(rl::Regime::Stage1);
  s1.frames = cur.schedule.stage1_frames;
  const fs::path a = fresh_dir("n2zero_cur"), b = fresh_dir("n2zero_s1");
  rl::run_training(cur, ds, 2, a);
  rl::run_training(s1, ds, 2, b);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  // Only the optimizer step counter differs: the curriculum still crosses
  // into (an empty) stage 2, which resets the moments.
  const auto pa = agent::load_policy(a / "final.json"), pb = agent::load_policy(b / "final.json");
  CHECK(pa.params().to_json(false).at("params") == pb.params().to_json(false).at("params"));
}

TEST_CASE("fine-tuning from a stage-1 checkpoint matches the continuous curriculum") {
  const auto& ds = small_dataset();
  auto cur = tiny_train(rl::Regime::Curriculum);
  cur.aux = rl::AuxMode::Disturb;
  const fs::path a = fresh_dir("init_full"), b = fresh_dir("init_split");
  const auto full = rl::run_training(cur, ds, 8, a);
  CHECK(full.metrics.size() == 5);
  CHECK(full.metrics[2].lambda_k == 0.0);
  CHECK(full.metrics[3].lambda_k == 15.0);
  auto ft = cur;
  ft.init_checkpoint = (a / "stage1_final.json").string();
  rl::run_training(ft, ds, 8, b);
  CHECK(slurp(a / "metrics.csv") == slurp(b / "metrics.csv"));
  CHECK(slurp(a / "final.json") == slurp(b / "final.json"));

  auto wrong = ft;
  wrong.arch.hidden += 1;
  CHECK_THROWS_AS(rl::run_training(wrong, ds, 8, fresh_dir("init_bad")), CheckpointMismatch);
}

TEST_CASE("lagrangian regime logs a non-negative multiplier trajectory") {
  const auto& ds = small_dataset();
  auto cfg = tiny_train(rl::Regime::Lagrangian);
  cfg.ppo.rollout_length = 40;
  cfg.frames = 4 * 40 * 6;
  cfg.lagrangian.lambda0 = 1.0;
  const auto r = rl::run_training(cfg, ds, 1, fresh_dir("lagr"));
  REQUIRE(r.metrics.size() == 6);
  bool moved = false;
  for (const auto& m : r.metrics) {
    CHECK(m.lambda_k >= 0.0);
    moved = moved || m.lambda_k != 1.0;
  }
  CHECK(moved);
}

TEST_CASE("config validation") {
  auto cfg = tiny_train(rl::Regime::Stage1);
  cfg.init_checkpoint = "x.json";
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  rl::PPOConfig p;
  p.gamma = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = {};
  p.clip_eps = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  rl::TrainConfig t;
  CHECK(t.total_frames() == 700'000);
}

}  // TEST_SUITE
