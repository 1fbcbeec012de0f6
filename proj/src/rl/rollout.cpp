#include "dfree/rl/rollout.hpp"

#include <cmath>
#include <numeric>

#include "dfree/errors.hpp"
#include "dfree/sim/state_io.hpp"

namespace dfree::rl {

using nlohmann::json;

EnvPool::EnvPool(const scenes::Dataset& dataset, sim::Split split, const sim::SimConfig& cfg, int workers, int hidden,
                 std::uint64_t seed, double gamma)
    : dataset_(&dataset), episodes_(dataset.episodes_in(split)), cfg_(cfg), gamma_(gamma) {
  if (episodes_.empty()) throw EmptyInput("no episodes in split " + std::string(sim::split_name(split)));
  if (workers < 1) throw std::invalid_argument("EnvPool needs at least one worker");
  workers_.reserve(static_cast<std::size_t>(workers));
  for (int w = 0; w < workers; ++w) {
    Worker wk{sim::Environment(dataset.scene(episodes_.front().scene_id), cfg_),
              make_rng(seed, 1000 + static_cast<std::uint64_t>(w)),
              make_rng(seed, 2000 + static_cast<std::uint64_t>(w)),
              {},
              0,
              0,
              true,
              {},
              {},
              1.0};
    wk.order.resize(episodes_.size());
    std::iota(wk.order.begin(), wk.order.end(), 0);
    shuffle(wk.order.begin(), wk.order.end(), wk.order_rng);
    workers_.push_back(std::move(wk));
    load_episode(workers_.back(), workers_.back().order[0]);
    workers_.back().cursor = 1;
  }
  beliefs_ = Matrix::Zero(workers, hidden);
}

void EnvPool::set_lambda_disturb(double lambda) {
  cfg_.reward.lambda_disturb = lambda;
  for (auto& wk : workers_) {
    const sim::WorldState st = wk.env.state();
    sim::Environment env(dataset_->scene(wk.env.episode().scene_id), cfg_);
    env.restore(dataset_->scene(wk.env.episode().scene_id), wk.env.episode(), st);
    wk.env = std::move(env);
  }
}

void EnvPool::load_episode(Worker& wk, int episode) {
  const auto& spec = episodes_[static_cast<std::size_t>(episode)];
  wk.env.reset(dataset_->scene(spec.scene_id), spec);
  wk.episode = episode;
  wk.start = true;
  wk.obs = wk.env.observe();
  wk.acc = EpisodeSummary{};
  wk.acc.episode_id = spec.episode_id;
  wk.discount = 1.0;
}

void EnvPool::next_episode(Worker& wk) {
  if (wk.cursor >= wk.order.size()) {
    shuffle(wk.order.begin(), wk.order.end(), wk.order_rng);
    wk.cursor = 0;
  }
  load_episode(wk, wk.order[wk.cursor++]);
}

sim::StepOutcome EnvPool::step(int w, int action, std::optional<EpisodeSummary>* finished) {
  Worker& wk = workers_[static_cast<std::size_t>(w)];
  const sim::StepOutcome out = wk.env.step(action);
  wk.acc.return_base += out.base_reward;
  wk.acc.return_shaped += out.shaped_reward;
  wk.acc.cost_total += out.disturbance_delta;
  wk.acc.cost_discounted += wk.discount * out.disturbance_delta;
  wk.discount *= gamma_;
  wk.acc.length += 1;
  wk.start = false;
  if (finished) finished->reset();
  if (out.episode_done) {
    const auto& st = wk.env.state();
    wk.acc.d_final = out.d_curr;
    wk.acc.success = st.succeeded;
    wk.acc.pickup = st.picked_up;
    if (finished) *finished = wk.acc;
    next_episode(wk);
  } else {
    wk.obs = wk.env.observe();
  }
  return out;
}

namespace {

json summary_json(const EpisodeSummary& s) {
  return {{"episode_id", s.episode_id},       {"return_base", s.return_base}, {"return_shaped", s.return_shaped},
          {"d_final", s.d_final},             {"cost_total", s.cost_total},   {"cost_discounted", s.cost_discounted},
          {"success", s.success},             {"pickup", s.pickup},           {"length", s.length}};
}

EpisodeSummary summary_from(const json& j) {
  EpisodeSummary s;
  s.episode_id = j.at("episode_id").get<std::string>();
  s.return_base = j.at("return_base").get<double>();
  s.return_shaped = j.at("return_shaped").get<double>();
  s.d_final = j.at("d_final").get<double>();
  s.cost_total = j.at("cost_total").get<double>();
  s.cost_discounted = j.at("cost_discounted").get<double>();
  s.success = j.at("success").get<bool>();
  s.pickup = j.at("pickup").get<bool>();
  s.length = j.at("length").get<int>();
  return s;
}

}  // namespace

json EnvPool::state_json() const {
  json ws = json::array();
  for (std::size_t w = 0; w < workers_.size(); ++w) {
    const Worker& wk = workers_[w];
    std::vector<double> h(beliefs_.row(static_cast<Eigen::Index>(w)).data(),
                          beliefs_.row(static_cast<Eigen::Index>(w)).data() + beliefs_.cols());
    ws.push_back({{"order_rng", rng_state(wk.order_rng)},
                  {"act_rng", rng_state(wk.act_rng)},
                  {"order", wk.order},
                  {"cursor", wk.cursor},
                  {"episode", wk.episode},
                  {"start", wk.start},
                  {"world", sim::world_state_to_json(wk.env.state())},
                  {"acc", summary_json(wk.acc)},
                  {"discount", wk.discount},
                  {"belief", h}});
  }
  return {{"lambda_disturb", cfg_.reward.lambda_disturb}, {"workers", ws}};
}

void EnvPool::load_state_json(const json& j) {
  const auto& ws = j.at("workers");
  if (ws.size() != workers_.size())
    throw CheckpointMismatch("training state has " + std::to_string(ws.size()) + " workers, config has " +
                             std::to_string(workers_.size()));
  cfg_.reward.lambda_disturb = j.at("lambda_disturb").get<double>();
  for (std::size_t w = 0; w < workers_.size(); ++w) {
    const json& s = ws[w];
    Worker& wk = workers_[w];
    set_rng_state(wk.order_rng, s.at("order_rng").get<std::string>());
    set_rng_state(wk.act_rng, s.at("act_rng").get<std::string>());
    wk.order = s.at("order").get<std::vector<int>>();
    if (wk.order.size() != episodes_.size()) throw CheckpointMismatch("episode list differs from the checkpoint");
    wk.cursor = s.at("cursor").get<std::size_t>();
    wk.episode = s.at("episode").get<int>();
    wk.start = s.at("start").get<bool>();
    const auto& spec = episodes_.at(static_cast<std::size_t>(wk.episode));
    auto scene = dataset_->scene(spec.scene_id);
    wk.env = sim::Environment(scene, cfg_);
    wk.env.restore(scene, spec, sim::world_state_from_json(s.at("world")));
    wk.obs = wk.env.observe();
    wk.acc = summary_from(s.at("acc"));
    wk.discount = s.at("discount").get<double>();
    const auto h = s.at("belief").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(h.size()) != beliefs_.cols()) throw CheckpointMismatch("belief size differs");
    for (Eigen::Index k = 0; k < beliefs_.cols(); ++k)
      beliefs_(static_cast<Eigen::Index>(w), k) = h[static_cast<std::size_t>(k)];
  }
}

// ---- collection ---------------------------------------------------------------

namespace {

// One batched belief step for every worker of the pool; returns the new
// beliefs, log-probabilities and values.
struct StepEval {
  Matrix h;
  Matrix logp;
  Matrix values;
};

StepEval eval_step(agent::PolicyNet& net, const agent::ObsBatch& batch, const Matrix& h_prev,
                   const std::vector<double>& mask, bool want_policy) {
  ad::Tape t(false);
  const Var gx = net.gru_inputs(t, batch);
  const Var h = net.gru_step(t, gx, t.constant(h_prev), mask);
  StepEval out;
  if (want_policy) out.logp = t.value(ad::log_softmax(net.actor_logits(t, h)));
  out.values = t.value(net.value(t, h));
  out.h = t.value(h);
  return out;
}

agent::ObsBatch pool_batch(const EnvPool& pool, const sim::ActionSpace& space, int obs_dim,
                           std::vector<double>& mask) {
  const int W = pool.size();
  agent::ObsBatch b;
  b.window.resize(W, obs_dim);
  b.goal.resize(W, agent::kGoalFeatures);
  b.prev_action.resize(static_cast<std::size_t>(W));
  mask.resize(static_cast<std::size_t>(W));
  for (int w = 0; w < W; ++w) {
    agent::append_observation(b, w, pool.observation(w), space);
    mask[static_cast<std::size_t>(w)] = pool.episode_start(w) ? 0.0 : 1.0;
  }
  return b;
}

}  // namespace

RolloutBuffer collect_rollouts(EnvPool& pool, agent::PolicyNet& net, int steps) {
  const int W = pool.size();
  const int obs_dim = net.arch().obs_dim();
  const auto& space = net.action_space();
  if (pool.config().action_variant != net.arch().variant)
    throw ShapeMismatch("environment and network use different action spaces");
  RolloutBuffer buf;
  buf.steps = steps;
  buf.workers = W;
  const std::size_t n = static_cast<std::size_t>(steps) * W;
  buf.obs.window.resize(static_cast<Eigen::Index>(n), obs_dim);
  buf.obs.goal.resize(static_cast<Eigen::Index>(n), agent::kGoalFeatures);
  buf.obs.prev_action.resize(n);
  for (auto* v : {&buf.log_probs, &buf.values, &buf.base_rewards, &buf.shaped_rewards, &buf.costs, &buf.labels,
                  &buf.masks, &buf.dones})
    v->resize(n);
  buf.actions.resize(n);
  buf.h0 = pool.beliefs();

  std::vector<double> mask;
  std::optional<EpisodeSummary> finished;
  std::vector<double> probs(static_cast<std::size_t>(space.size()));
  for (int t = 0; t < steps; ++t) {
    const agent::ObsBatch batch = pool_batch(pool, space, obs_dim, mask);
    const auto r0 = static_cast<Eigen::Index>(buf.index(t, 0));
    buf.obs.window.middleRows(r0, W) = batch.window;
    buf.obs.goal.middleRows(r0, W) = batch.goal;
    const StepEval ev = eval_step(net, batch, pool.beliefs(), mask, true);
    pool.beliefs() = ev.h;
    for (int w = 0; w < W; ++w) {
      const std::size_t i = buf.index(t, w);
      buf.obs.prev_action[i] = batch.prev_action[static_cast<std::size_t>(w)];
      buf.masks[i] = mask[static_cast<std::size_t>(w)];
      for (int a = 0; a < space.size(); ++a) probs[static_cast<std::size_t>(a)] = std::exp(ev.logp(w, a));
      const int action = agent::sample_categorical(probs, pool.action_rng(w));
      buf.actions[i] = action;
      buf.log_probs[i] = ev.logp(w, action);
      buf.values[i] = ev.values(w, 0);
      const sim::StepOutcome out = pool.step(w, action, &finished);
      buf.base_rewards[i] = out.base_reward;
      buf.shaped_rewards[i] = out.shaped_reward;
      buf.costs[i] = out.disturbance_delta;
      buf.labels[i] = out.disturbance_event ? 1.0 : 0.0;
      buf.dones[i] = out.episode_done ? 1.0 : 0.0;
      if (finished) buf.finished.push_back(*finished);
    }
  }
  // Bootstrap from the belief that the next observation would produce;
  // the pool keeps its pre-step belief so the next rollout recomputes it.
  const agent::ObsBatch batch = pool_batch(pool, space, obs_dim, mask);
  buf.final_windows = batch.window;
  const StepEval ev = eval_step(net, batch, pool.beliefs(), mask, false);
  buf.bootstrap_values.resize(static_cast<std::size_t>(W));
  for (int w = 0; w < W; ++w) buf.bootstrap_values[static_cast<std::size_t>(w)] = ev.values(w, 0);
  buf.rewards = buf.shaped_rewards;
  return buf;
}

void assign_training_rewards(RolloutBuffer& buf, double lambda) {
  buf.rewards.resize(buf.rows());
  for (std::size_t i = 0; i < buf.rows(); ++i) buf.rewards[i] = buf.base_rewards[i] - lambda * buf.costs[i];
}

void compute_gae(RolloutBuffer& buf, double gamma, double gae_lambda, bool normalize) {
  const std::size_t n = buf.rows();
  if (buf.rewards.size() != n || buf.values.size() != n || buf.bootstrap_values.size() != std::size_t(buf.workers))
    throw ShapeMismatch("compute_gae: buffer fields are incomplete");
  buf.advantages.assign(n, 0.0);
  buf.returns.assign(n, 0.0);
  for (int w = 0; w < buf.workers; ++w) {
    double gae = 0.0;
    for (int t = buf.steps - 1; t >= 0; --t) {
      const std::size_t i = buf.index(t, w);
      const double nonterminal = 1.0 - buf.dones[i];
      const double next_value =
          t + 1 < buf.steps ? buf.values[buf.index(t + 1, w)] : buf.bootstrap_values[static_cast<std::size_t>(w)];
      const double delta = buf.rewards[i] + gamma * next_value * nonterminal - buf.values[i];
      gae = delta + gamma * gae_lambda * nonterminal * gae;
      buf.advantages[i] = gae;
      buf.returns[i] = gae + buf.values[i];
    }
  }
  if (normalize && n > 1) {
    double mean = 0.0;
    for (double a : buf.advantages) mean += a;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (double a : buf.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : buf.advantages) a = (a - mean) / (sd + 1e-8);
  }
}

}  // namespace dfree::rl
