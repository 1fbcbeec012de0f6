#include "dfree/rl/ppo.hpp"

#include <cmath>
#include <numeric>

#include "dfree/ad/losses.hpp"
#include "dfree/errors.hpp"

namespace dfree::rl {

namespace {

// Gathers the rows of the given workers, keeping the time-major layout.
struct Chunk {
  agent::ObsBatch obs;
  Matrix h0;
  std::vector<double> masks;
  std::vector<int> actions;
  Matrix old_logp;
  Matrix adv;
  Matrix ret;
  std::vector<double> labels;
  Matrix next_windows;
  Matrix invdyn_valid;
};

Chunk gather(const RolloutBuffer& buf, const std::vector<int>& workers, bool want_next) {
  const int b = static_cast<int>(workers.size());
  const int T = buf.steps;
  const auto n = static_cast<Eigen::Index>(T) * b;
  Chunk c;
  c.obs.window.resize(n, buf.obs.window.cols());
  c.obs.goal.resize(n, buf.obs.goal.cols());
  c.obs.prev_action.resize(static_cast<std::size_t>(n));
  c.h0.resize(b, buf.h0.cols());
  c.masks.resize(static_cast<std::size_t>(n));
  c.actions.resize(static_cast<std::size_t>(n));
  c.old_logp.resize(n, 1);
  c.adv.resize(n, 1);
  c.ret.resize(n, 1);
  c.labels.resize(static_cast<std::size_t>(n));
  if (want_next) {
    c.next_windows.resize(n, buf.obs.window.cols());
    c.invdyn_valid.resize(n, 1);
  }
  for (int j = 0; j < b; ++j) c.h0.row(j) = buf.h0.row(workers[static_cast<std::size_t>(j)]);
  for (int t = 0; t < T; ++t) {
    for (int j = 0; j < b; ++j) {
      const int w = workers[static_cast<std::size_t>(j)];
      const std::size_t src = buf.index(t, w);
      const Eigen::Index dst = static_cast<Eigen::Index>(t) * b + j;
      const auto d = static_cast<std::size_t>(dst);
      c.obs.window.row(dst) = buf.obs.window.row(static_cast<Eigen::Index>(src));
      c.obs.goal.row(dst) = buf.obs.goal.row(static_cast<Eigen::Index>(src));
      c.obs.prev_action[d] = buf.obs.prev_action[src];
      c.masks[d] = buf.masks[src];
      c.actions[d] = buf.actions[src];
      c.old_logp(dst, 0) = buf.log_probs[src];
      c.adv(dst, 0) = buf.advantages[src];
      c.ret(dst, 0) = buf.returns[src];
      c.labels[d] = buf.labels[src];
      if (want_next) {
        // The pair (o_t, o_{t+1}) is only valid inside one episode.
        c.invdyn_valid(dst, 0) = 1.0 - buf.dones[src];
        c.next_windows.row(dst) = t + 1 < T ? buf.obs.window.row(static_cast<Eigen::Index>(buf.index(t + 1, w)))
                                            : buf.final_windows.row(w);
      }
    }
  }
  return c;
}

}  // namespace

Var ppo_minibatch_loss(ad::Tape& t, agent::PolicyNet& net, const RolloutBuffer& buf, const std::vector<int>& workers,
                       const PPOConfig& cfg, AuxMode aux, LossParts* parts) {
  if (buf.advantages.size() != buf.rows()) throw ShapeMismatch("ppo loss needs advantages; run compute_gae first");
  const Chunk c = gather(buf, workers, aux == AuxMode::InvDyn);
  const int b = static_cast<int>(workers.size());
  const auto un = net.unroll(t, c.obs, c.h0, c.masks, buf.steps, b);

  const Var logits = net.actor_logits(t, un.beliefs);
  const Var logp = ad::gather_cols(ad::log_softmax(logits), c.actions);
  const Var ratio = ad::exp(ad::sub(logp, t.constant(c.old_logp)));
  const Var adv = t.constant(c.adv);
  const Var surr1 = ad::mul(ratio, adv);
  const Var surr2 = ad::mul(ad::clamp(ratio, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps), adv);
  const Var policy_loss = ad::scale(ad::mean(ad::minimum(surr1, surr2)), -1.0);
  const Var value_loss = ad::mean(ad::value_loss_rows(net.value(t, un.beliefs), c.ret));
  const Var entropy = ad::mean(ad::entropy_rows_from_logits(logits));

  Var total = ad::add(policy_loss, ad::sub(ad::scale(value_loss, cfg.value_coef), ad::scale(entropy, cfg.entropy_coef)));
  Var aux_loss;
  bool has_aux = false;
  if (aux == AuxMode::Disturb) {
    const Var p = ad::gather_cols(net.disturb_probs(t, un.beliefs), c.actions);
    aux_loss = ad::mean(ad::focal_loss(p, c.labels, cfg.focal_gamma, cfg.focal_alpha));
    has_aux = true;
  } else if (aux == AuxMode::InvDyn) {
    const Var next_enc = net.encode(t, c.next_windows);
    const Var ce = ad::cross_entropy_rows(net.invdyn_logits(t, un.beliefs, next_enc), c.actions);
    aux_loss = ad::weighted_mean(ce, c.invdyn_valid);
    has_aux = true;
  }
  if (has_aux) total = ad::add(total, ad::scale(aux_loss, cfg.aux_weight));

  if (parts) {
    parts->policy = t.scalar(policy_loss);
    parts->value = t.scalar(value_loss);
    parts->entropy = t.scalar(entropy);
    parts->aux = has_aux ? t.scalar(aux_loss) : 0.0;
    const Matrix& r = t.value(ratio);
    double kl = 0.0;
    int clipped = 0;
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      // (ratio - 1) - log ratio: non-negative estimator of KL(old || new).
      kl += (r(i, 0) - 1.0) - std::log(r(i, 0));
      if (std::abs(r(i, 0) - 1.0) > cfg.clip_eps) ++clipped;
    }
    parts->approx_kl = kl / static_cast<double>(r.rows());
    parts->clip_fraction = static_cast<double>(clipped) / static_cast<double>(r.rows());
  }
  return total;
}

LossReport ppo_update(agent::PolicyNet& net, const RolloutBuffer& buf, const PPOConfig& cfg, AuxMode aux, Rng& rng) {
  cfg.validate();
  if (buf.workers % cfg.minibatches != 0) throw ShapeMismatch("minibatch count must divide the worker count");
  ad::ParamStore& params = net.params();
  const ad::ParamStore snapshot = params;
  const ad::AdamConfig adam{cfg.lr};
  const int per = buf.workers / cfg.minibatches;
  std::vector<int> order(static_cast<std::size_t>(buf.workers));
  LossReport rep;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    shuffle(order.begin(), order.end(), rng);
    for (int m = 0; m < cfg.minibatches; ++m) {
      const std::vector<int> ws(order.begin() + m * per, order.begin() + (m + 1) * per);
      params.zero_grad();
      ad::Tape t;
      LossParts parts;
      const Var loss = ppo_minibatch_loss(t, net, buf, ws, cfg, aux, &parts);
      const double lv = t.scalar(loss);
      if (!std::isfinite(lv)) {
        params = snapshot;
        LossReport bad;
        bad.aborted = true;
        return bad;
      }
      t.backward(loss);
      if (!params.grads_finite()) {
        params = snapshot;
        LossReport bad;
        bad.aborted = true;
        return bad;
      }
      rep.grad_norm += params.clip_grad_norm(cfg.max_grad_norm);
      ad::adam_step(params, adam);
      rep.policy_loss += parts.policy;
      rep.value_loss += parts.value;
      rep.entropy += parts.entropy;
      rep.aux_loss += parts.aux;
      rep.approx_kl += parts.approx_kl;
      rep.clip_fraction += parts.clip_fraction;
      ++rep.optimizer_steps;
    }
  }
  const double k = rep.optimizer_steps;
  for (double* v : {&rep.policy_loss, &rep.value_loss, &rep.entropy, &rep.aux_loss, &rep.approx_kl,
                    &rep.clip_fraction, &rep.grad_norm})
    *v /= k;
  params.zero_grad();
  return rep;
}

}  // namespace dfree::rl
