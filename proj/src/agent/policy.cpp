#include "dfree/agent/policy.hpp"

#include <cmath>
#include <numbers>

#include "dfree/errors.hpp"

namespace dfree::agent {

void append_observation(ObsBatch& batch, Eigen::Index row, const sim::Observation& obs,
                        const sim::ActionSpace& space) {
  if (static_cast<Eigen::Index>(obs.window.size()) != batch.window.cols())
    throw ShapeMismatch("observation window of " + std::to_string(obs.window.size()) + " values, network expects " +
                        std::to_string(batch.window.cols()));
  batch.window.row(row) = Eigen::Map<const Eigen::RowVectorXd>(obs.window.data(), batch.window.cols());
  batch.goal(row, 0) = obs.goal_rho / 8.0;
  batch.goal(row, 1) = std::cos(obs.goal_theta);
  batch.goal(row, 2) = std::sin(obs.goal_theta);
  batch.goal(row, 3) = obs.goal_theta / std::numbers::pi;
  batch.goal(row, 4) = obs.holding ? 1.0 : 0.0;
  batch.prev_action[static_cast<std::size_t>(row)] =
      obs.prev_action ? space.index_of(*obs.prev_action) : space.start_token();
}

ObsBatch make_batch(const std::vector<sim::Observation>& obs, const sim::ActionSpace& space) {
  if (obs.empty()) throw ShapeMismatch("empty observation batch");
  const auto n = static_cast<Eigen::Index>(obs.size());
  ObsBatch b;
  b.window.resize(n, static_cast<Eigen::Index>(obs.front().window.size()));
  b.goal.resize(n, kGoalFeatures);
  b.prev_action.resize(obs.size());
  for (Eigen::Index i = 0; i < n; ++i) append_observation(b, i, obs[static_cast<std::size_t>(i)], space);
  return b;
}

PolicyNet::PolicyNet(const ArchConfig& arch, std::uint64_t seed) : arch_(arch), space_(arch.variant) {
  Rng rng = make_rng(seed, 0x9E7);
  const int A = arch.num_actions();
  const int H = arch.hidden;
  const double relu_gain = std::sqrt(2.0);
  params_.add("enc.w1", ad::glorot_uniform(arch.obs_dim(), arch.enc_hidden, rng, relu_gain));
  params_.add("enc.b1", ad::zeros(1, arch.enc_hidden));
  params_.add("enc.w2", ad::glorot_uniform(arch.enc_hidden, arch.enc_out, rng, relu_gain));
  params_.add("enc.b2", ad::zeros(1, arch.enc_out));
  params_.add("goal.w", ad::glorot_uniform(kGoalFeatures, arch.goal_embed, rng));
  params_.add("goal.b", ad::zeros(1, arch.goal_embed));
  params_.add("prev_action.table", ad::glorot_uniform(A + 1, arch.prev_action_embed, rng));
  params_.add("gru.w_i", ad::glorot_uniform(arch.gru_input(), 3 * H, rng));
  params_.add("gru.b_i", ad::zeros(1, 3 * H));
  params_.add("gru.w_h", ad::glorot_uniform(H, 3 * H, rng));
  params_.add("gru.b_h", ad::zeros(1, 3 * H));
  params_.add("actor.w", ad::glorot_uniform(H, A, rng, 0.01));
  params_.add("actor.b", ad::zeros(1, A));
  params_.add("critic.w", ad::glorot_uniform(H, 1, rng));
  params_.add("critic.b", ad::zeros(1, 1));
  params_.add("disturb.w1", ad::glorot_uniform(H, arch.disturb_hidden, rng, relu_gain));
  params_.add("disturb.b1", ad::zeros(1, arch.disturb_hidden));
  params_.add("disturb.w2", ad::glorot_uniform(arch.disturb_hidden, A, rng, 0.1));
  params_.add("disturb.b2", ad::zeros(1, A));
  params_.add("invdyn.w1", ad::glorot_uniform(H + arch.enc_out, arch.invdyn_hidden, rng, relu_gain));
  params_.add("invdyn.b1", ad::zeros(1, arch.invdyn_hidden));
  params_.add("invdyn.w2", ad::glorot_uniform(arch.invdyn_hidden, A, rng, 0.1));
  params_.add("invdyn.b2", ad::zeros(1, A));
}

Var PolicyNet::encode(ad::Tape& t, const Matrix& window) {
  const Var x = t.constant(window);
  const Var h1 = ad::relu(ad::add(ad::matmul(x, t.param(params_, "enc.w1")), t.param(params_, "enc.b1")));
  return ad::relu(ad::add(ad::matmul(h1, t.param(params_, "enc.w2")), t.param(params_, "enc.b2")));
}

Var PolicyNet::gru_inputs(ad::Tape& t, const ObsBatch& obs, Var* encoded) {
  const Var enc = encode(t, obs.window);
  if (encoded) *encoded = enc;
  const Var goal =
      ad::tanh(ad::add(ad::matmul(t.constant(obs.goal), t.param(params_, "goal.w")), t.param(params_, "goal.b")));
  const Var prev = ad::embedding_lookup(t.param(params_, "prev_action.table"), obs.prev_action);
  const Var x = ad::concat_cols({enc, goal, prev});
  return ad::add(ad::matmul(x, t.param(params_, "gru.w_i")), t.param(params_, "gru.b_i"));
}

Var PolicyNet::gru_step(ad::Tape& t, Var gx, Var h_prev, const std::vector<double>& mask) {
  return ad::gru_cell(gx, ad::scale_rows(h_prev, mask), t.param(params_, "gru.w_h"), t.param(params_, "gru.b_h"));
}

Var PolicyNet::actor_logits(ad::Tape& t, Var belief) {
  return ad::add(ad::matmul(belief, t.param(params_, "actor.w")), t.param(params_, "actor.b"));
}

Var PolicyNet::value(ad::Tape& t, Var belief) {
  return ad::add(ad::matmul(belief, t.param(params_, "critic.w")), t.param(params_, "critic.b"));
}

Var PolicyNet::disturb_probs(ad::Tape& t, Var belief) {
  const Var h = ad::relu(ad::add(ad::matmul(belief, t.param(params_, "disturb.w1")), t.param(params_, "disturb.b1")));
  return ad::sigmoid(ad::add(ad::matmul(h, t.param(params_, "disturb.w2")), t.param(params_, "disturb.b2")));
}

Var PolicyNet::invdyn_logits(ad::Tape& t, Var belief, Var next_encoding) {
  const Var x = ad::concat_cols({belief, next_encoding});
  const Var h = ad::relu(ad::add(ad::matmul(x, t.param(params_, "invdyn.w1")), t.param(params_, "invdyn.b1")));
  return ad::add(ad::matmul(h, t.param(params_, "invdyn.w2")), t.param(params_, "invdyn.b2"));
}

PolicyNet::Unrolled PolicyNet::unroll(ad::Tape& t, const ObsBatch& obs, const Matrix& h0,
                                      const std::vector<double>& masks, int steps, int batch) {
  if (obs.rows() != static_cast<Eigen::Index>(steps) * batch || masks.size() != obs.prev_action.size())
    throw ShapeMismatch("unroll: inputs do not match steps x batch");
  if (h0.rows() != batch || h0.cols() != arch_.hidden) throw ShapeMismatch("unroll: bad initial belief shape");
  Var enc;
  const Var gx = gru_inputs(t, obs, &enc);
  Var h = t.constant(h0);
  std::vector<Var> hs;
  hs.reserve(static_cast<std::size_t>(steps));
  for (int s = 0; s < steps; ++s) {
    const std::vector<double> m(masks.begin() + static_cast<std::ptrdiff_t>(s) * batch,
                                masks.begin() + static_cast<std::ptrdiff_t>(s + 1) * batch);
    h = gru_step(t, ad::slice_rows(gx, static_cast<Eigen::Index>(s) * batch, batch), h, m);
    hs.push_back(h);
  }
  return {ad::concat_rows(hs), enc};
}

// ---- single-agent inference -------------------------------------------------

Belief initial_belief(const PolicyNet& net) { return {Eigen::RowVectorXd::Zero(net.arch().hidden), true}; }

Belief belief_update(PolicyNet& net, const Belief& belief, const sim::Observation& obs) {
  if (belief.h.size() != net.arch().hidden) throw ShapeMismatch("belief size does not match the network");
  ad::Tape t(false);
  const ObsBatch batch = make_batch({obs}, net.action_space());
  const Var gx = net.gru_inputs(t, batch);
  const Var h = net.gru_step(t, gx, t.constant(Matrix(belief.h)), {belief.episode_start ? 0.0 : 1.0});
  return {t.value(h).row(0), false};
}

int argmax_first(const std::vector<double>& values) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(values.size()); ++i)
    if (values[static_cast<std::size_t>(i)] > values[static_cast<std::size_t>(best)]) best = i;
  return best;
}

int sample_categorical(const std::vector<double>& probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  for (int i = 0; i < static_cast<int>(probs.size()); ++i) {
    acc += probs[static_cast<std::size_t>(i)];
    if (u < acc) return i;
  }
  // Round-off left u above the total; fall back to the last nonzero entry.
  for (int i = static_cast<int>(probs.size()) - 1; i >= 0; --i)
    if (probs[static_cast<std::size_t>(i)] > 0.0) return i;
  return 0;
}

ActResult act(PolicyNet& net, const Belief& belief, ActMode mode, Rng* rng) {
  ad::Tape t(false);
  const Var b = t.constant(Matrix(belief.h));
  const Var logits = net.actor_logits(t, b);
  const Matrix logp = t.value(ad::log_softmax(logits));
  ActResult r;
  r.probs.resize(static_cast<std::size_t>(logp.cols()));
  for (Eigen::Index i = 0; i < logp.cols(); ++i) r.probs[static_cast<std::size_t>(i)] = std::exp(logp(0, i));
  if (mode == ActMode::Greedy) {
    r.action = argmax_first(std::vector<double>(logp.data(), logp.data() + logp.size()));
  } else {
    if (!rng) throw std::invalid_argument("sampling requires an rng");
    r.action = sample_categorical(r.probs, *rng);
  }
  r.log_prob = logp(0, r.action);
  r.value = t.scalar(net.value(t, b));
  return r;
}

std::vector<double> predict_disturbance(PolicyNet& net, const Belief& belief) {
  ad::Tape t(false);
  const Matrix& p = t.value(net.disturb_probs(t, t.constant(Matrix(belief.h))));
  return {p.data(), p.data() + p.size()};
}

std::vector<double> encode_observation(PolicyNet& net, const sim::Observation& obs) {
  ad::Tape t(false);
  const ObsBatch batch = make_batch({obs}, net.action_space());
  const Matrix& e = t.value(net.encode(t, batch.window));
  return {e.data(), e.data() + e.size()};
}

std::vector<double> predict_inverse_dynamics(PolicyNet& net, const Belief& belief,
                                             const std::vector<double>& next_obs_encoding) {
  if (static_cast<int>(next_obs_encoding.size()) != net.arch().enc_out)
    throw ShapeMismatch("next observation encoding has the wrong size");
  ad::Tape t(false);
  Matrix enc = Eigen::Map<const Eigen::RowVectorXd>(next_obs_encoding.data(),
                                                    static_cast<Eigen::Index>(next_obs_encoding.size()));
  const Var logits = net.invdyn_logits(t, t.constant(Matrix(belief.h)), t.constant(std::move(enc)));
  const Matrix& p = t.value(ad::softmax(logits));
  return {p.data(), p.data() + p.size()};
}

}  // namespace dfree::agent
