#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "dfree/ad/losses.hpp"
#include "dfree/ad/optim.hpp"
#include "dfree/agent/checkpoint.hpp"
#include "dfree/agent/policy.hpp"
#include "dfree/errors.hpp"
#include "dfree/sim/observation.hpp"

using namespace dfree;
using agent::ArchConfig;
using agent::PolicyNet;
using ad::Matrix;
using ad::Var;

namespace {

ArchConfig tiny_arch() {
  ArchConfig a;
  a.window = 3;
  a.enc_hidden = 8;
  a.enc_out = 6;
  a.goal_embed = 4;
  a.prev_action_embed = 3;
  a.hidden = 5;
  a.disturb_hidden = 8;
  a.invdyn_hidden = 8;
  return a;
}

sim::Observation random_obs(const ArchConfig& a, Rng& rng) {
  sim::Observation o;
  o.k = a.window;
  o.window.resize(static_cast<std::size_t>(a.obs_dim()));
  for (auto& v : o.window) v = uniform01(rng) < 0.3 ? 1.0 : 0.0;
  o.goal_rho = 8.0 * uniform01(rng);
  o.goal_theta = 3.0 * (2.0 * uniform01(rng) - 1.0);
  o.holding = uniform01(rng) < 0.5;
  o.prev_action = sim::ActionId::MoveAhead;
  return o;
}

}  // namespace

TEST_SUITE("agent") {

TEST_CASE("argmax ties go to the lowest index") {
  CHECK(agent::argmax_first({1.0, 3.0, 3.0, 2.0}) == 1);
  CHECK(agent::argmax_first({0.0, 0.0}) == 0);
}

TEST_CASE("greedy act breaks exact ties by index") {
  PolicyNet net(tiny_arch(), 1);
  auto& ps = net.params();
  ps.at("actor.w").value.setZero();
  ps.at("actor.b").value.setZero();
  ps.at("actor.b").value(0, 2) = 1.5;
  ps.at("actor.b").value(0, 5) = 1.5;
  Rng rng = make_rng(3);
  const auto b = agent::belief_update(net, agent::initial_belief(net), random_obs(net.arch(), rng));
  const auto r = agent::act(net, b, agent::ActMode::Greedy);
  CHECK(r.action == 2);
  CHECK(r.log_prob == doctest::Approx(std::log(r.probs[2])));
  double total = 0.0;
  for (double p : r.probs) total += p;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(agent::act(net, b, agent::ActMode::Sample), std::invalid_argument);
}

TEST_CASE("categorical sampling frequencies") {
  const std::vector<double> p = {0.1, 0.0, 0.45, 0.3, 0.15};
  Rng rng = make_rng(11);
  const int n = 20000;
  std::vector<int> counts(p.size(), 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(agent::sample_categorical(p, rng))];
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double sigma = std::sqrt(n * p[i] * (1 - p[i]));
    CAPTURE(i);
    CHECK(std::abs(counts[i] - n * p[i]) <= 3.0 * sigma + 1e-9);
  }
  CHECK(counts[1] == 0);
}

TEST_CASE("sampled actions are reproducible for a fixed rng") {
  PolicyNet net(tiny_arch(), 2);
  Rng orng = make_rng(4);
  const auto b = agent::belief_update(net, agent::initial_belief(net), random_obs(net.arch(), orng));
  Rng r1 = make_rng(9), r2 = make_rng(9);
  for (int i = 0; i < 50; ++i)
    CHECK(agent::act(net, b, agent::ActMode::Sample, &r1).action ==
          agent::act(net, b, agent::ActMode::Sample, &r2).action);
}

TEST_CASE("belief update is deterministic and masks the stale state at episode start") {
  PolicyNet net(tiny_arch(), 5);
  Rng rng = make_rng(6);
  const auto o1 = random_obs(net.arch(), rng), o2 = random_obs(net.arch(), rng);
  auto b1 = agent::belief_update(net, agent::initial_belief(net), o1);
  CHECK_FALSE(b1.episode_start);
  const auto b2 = agent::belief_update(net, b1, o2);
  CHECK(agent::belief_update(net, b1, o2).h == b2.h);
  CHECK(b2.h != agent::belief_update(net, agent::initial_belief(net), o2).h);

  agent::Belief stale = b2;
  stale.episode_start = true;
  CHECK(agent::belief_update(net, stale, o1).h == b1.h);
  CHECK_THROWS_AS(agent::belief_update(net, agent::Belief{Eigen::RowVectorXd::Zero(3), true}, o1), ShapeMismatch);

  sim::Observation bad = o1;
  bad.window.pop_back();
  CHECK_THROWS_AS(agent::belief_update(net, b1, bad), ShapeMismatch);
}

TEST_CASE("start token and goal features") {
  ArchConfig a = tiny_arch();
  a.variant = sim::ActionVariant::Small;
  PolicyNet net(a, 1);
  Rng rng = make_rng(1);
  auto o = random_obs(a, rng);
  o.prev_action.reset();
  o.goal_theta = 0.5;
  const auto batch = agent::make_batch({o}, net.action_space());
  CHECK(batch.prev_action[0] == 7);
  CHECK(batch.goal(0, 1) == doctest::Approx(std::cos(0.5)));
  CHECK(batch.goal(0, 2) == doctest::Approx(std::sin(0.5)));
  CHECK(net.params().at("prev_action.table").value.rows() == 8);
}

TEST_CASE("same seed gives the same network") {
  PolicyNet a(tiny_arch(), 17), b(tiny_arch(), 17), c(tiny_arch(), 18);
  for (const auto& name : a.params().names()) CHECK(a.params().at(name).value == b.params().at(name).value);
  CHECK(a.params().at("gru.w_h").value != c.params().at("gru.w_h").value);
}

TEST_CASE("checkpoint round trip") {
  PolicyNet net(tiny_arch(), 21);
  const auto path = std::filesystem::temp_directory_path() / "dfree_agent_ckpt.json";
  agent::save_policy(net, path);
  PolicyNet loaded = agent::load_policy(path);
  CHECK(loaded.arch() == net.arch());
  Rng rng = make_rng(2);
  agent::Belief b1 = agent::initial_belief(net), b2 = agent::initial_belief(loaded);
  for (int i = 0; i < 4; ++i) {
    const auto o = random_obs(net.arch(), rng);
    b1 = agent::belief_update(net, b1, o);
    b2 = agent::belief_update(loaded, b2, o);
    CHECK(b1.h == b2.h);
    const auto r1 = agent::act(net, b1, agent::ActMode::Greedy), r2 = agent::act(loaded, b2, agent::ActMode::Greedy);
    CHECK(r1.action == r2.action);
    CHECK(r1.value == r2.value);
    CHECK(agent::predict_disturbance(net, b1) == agent::predict_disturbance(loaded, b2));
  }
  CHECK_NOTHROW(agent::load_policy(path, tiny_arch()));
  ArchConfig other = tiny_arch();
  other.hidden = 6;
  CHECK_THROWS_AS(agent::load_policy(path, other), CheckpointMismatch);
  other = tiny_arch();
  other.variant = sim::ActionVariant::Small;
  CHECK_THROWS_AS(agent::load_policy(path, other), CheckpointMismatch);
  CHECK_THROWS_AS(agent::load_policy(path.string() + ".missing"), IOFailure);
}

TEST_CASE("disturbance head can fit a fixed labelling") {
  PolicyNet net(tiny_arch(), 3);
  const int n = 32, A = net.arch().num_actions();
  Rng rng = make_rng(12);
  Matrix beliefs(n, net.arch().hidden);
  std::vector<int> actions(n);
  std::vector<double> labels(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < beliefs.cols(); ++j) beliefs(i, j) = 2.0 * uniform01(rng) - 1.0;
    actions[static_cast<std::size_t>(i)] = static_cast<int>(uniform01(rng) * A);
    labels[static_cast<std::size_t>(i)] = beliefs(i, 0) + beliefs(i, 1) > 0.0 ? 1.0 : 0.0;
  }
  auto loss_fn = [&](ad::Tape& t) {
    const Var p = ad::gather_cols(net.disturb_probs(t, t.constant(beliefs)), actions);
    return ad::mean(ad::focal_loss(p, labels, 2.0, 0.5));
  };
  double first = 0.0, last = 0.0;
  for (int it = 0; it < 600; ++it) {
    net.params().zero_grad();
    ad::Tape t;
    const Var loss = loss_fn(t);
    if (it == 0) first = t.scalar(loss);
    last = t.scalar(loss);
    t.backward(loss);
    ad::adam_step(net.params(), {.lr = 0.01});
  }
  CHECK(last < 0.25 * first);
  ad::Tape t(false);
  const Matrix p = t.value(ad::gather_cols(net.disturb_probs(t, t.constant(beliefs)), actions));
  int correct = 0;
  for (int i = 0; i < n; ++i) correct += (p(i, 0) > 0.5) == (labels[static_cast<std::size_t>(i)] > 0.5);
  CHECK(correct >= n - 2);
}

TEST_CASE("inverse dynamics head can fit a fixed labelling") {
  PolicyNet net(tiny_arch(), 4);
  const int n = 24, A = net.arch().num_actions();
  Rng rng = make_rng(13);
  Matrix beliefs(n, net.arch().hidden), next(n, net.arch().enc_out);
  std::vector<int> targets(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < beliefs.cols(); ++j) beliefs(i, j) = 2.0 * uniform01(rng) - 1.0;
    for (int j = 0; j < next.cols(); ++j) next(i, j) = uniform01(rng);
    targets[static_cast<std::size_t>(i)] = i % A;
  }
  double last = 0.0;
  for (int it = 0; it < 800; ++it) {
    net.params().zero_grad();
    ad::Tape t;
    const Var loss = ad::cross_entropy(net.invdyn_logits(t, t.constant(beliefs), t.constant(next)), targets);
    last = t.scalar(loss);
    t.backward(loss);
    ad::adam_step(net.params(), {.lr = 0.01});
  }
  CHECK(last < 0.1);
  CHECK(last < std::log(double(A)));
}

}  // TEST_SUITE
