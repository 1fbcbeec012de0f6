#include "dfree/checks/gradcheck_suite.hpp"

#include <cmath>
#include <functional>

#include "dfree/ad/losses.hpp"
#include "dfree/agent/policy.hpp"
#include "dfree/rl/ppo.hpp"
#include "dfree/rng.hpp"

namespace dfree::checks {

using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

Matrix uniform(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = lo + (hi - lo) * uniform01(rng);
  return m;
}

// Values in +-[lo, hi]; keeps elementwise kinks at 0 out of the eps window.
Matrix away_from_zero(Rng& rng, Eigen::Index r, Eigen::Index c, double lo, double hi) {
  Matrix m = uniform(rng, r, c, lo, hi);
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (uniform01(rng) < 0.5) m.data()[i] = -m.data()[i];
  return m;
}

// Reduces an arbitrary node to a scalar with fixed random weights so every
// output element gets a distinct upstream gradient.
Var reduce(Tape& t, Var v, const Matrix& w) { return ad::sum(ad::mul(v, t.constant(w))); }

struct Case {
  std::string name;
  std::function<void(ad::ParamStore&, Rng&)> setup;
  std::function<Var(Tape&, ad::ParamStore&)> loss;
};

}  // namespace

std::vector<GradcheckCase> primitive_gradchecks(std::uint64_t seed) {
  Rng rng = make_rng(seed, 77);
  const Matrix w34 = uniform(rng, 3, 4, -1.0, 1.0);
  const Matrix w35 = uniform(rng, 3, 5, -1.0, 1.0);
  const Matrix w31 = uniform(rng, 3, 1, -1.0, 1.0);
  const Matrix w64 = uniform(rng, 6, 4, -1.0, 1.0);
  const Matrix w24 = uniform(rng, 2, 4, -1.0, 1.0);
  const Matrix w32 = uniform(rng, 3, 2, -1.0, 1.0);
  const Matrix w44 = uniform(rng, 4, 4, -1.0, 1.0);
  const Matrix wts = uniform(rng, 3, 4, 0.1, 1.0);
  const std::vector<int> idx3 = {2, 0, 3};
  const std::vector<int> emb_idx = {1, 4, 1, 0};
  const std::vector<double> row_f = {1.0, 0.0, -0.7};
  const std::vector<double> labels = {1, 0, 0, 1, 0, 1, 1, 0, 0, 0, 1, 0};

  auto p = [](Tape& t, ad::ParamStore& s, const char* n) { return t.param(s, n); };
  std::vector<Case> cases = {
      {"matmul", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 5, -1, 1)); s.add("b", uniform(r, 5, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::matmul(p(t, s, "a"), p(t, s, "b")), w34); }},
      {"add", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); s.add("b", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::add(p(t, s, "a"), p(t, s, "b")), w34); }},
      {"add_broadcast", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); s.add("b", uniform(r, 1, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::add(p(t, s, "a"), p(t, s, "b")), w34); }},
      {"sub", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); s.add("b", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::sub(p(t, s, "a"), p(t, s, "b")), w34); }},
      {"mul", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); s.add("b", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::mul(p(t, s, "a"), p(t, s, "b")), w34); }},
      {"scale", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::scale(p(t, s, "a"), -1.7), w34); }},
      {"add_scalar", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::add_scalar(p(t, s, "a"), 0.3), w34); }},
      {"scale_rows", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::scale_rows(p(t, s, "a"), row_f), w34); }},
      {"concat_cols", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 2, -1, 1)); s.add("b", uniform(r, 3, 3, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::concat_cols({p(t, s, "a"), p(t, s, "b")}), w35); }},
      {"concat_rows", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 2, 4, -1, 1)); s.add("b", uniform(r, 4, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::concat_rows({p(t, s, "a"), p(t, s, "b")}), w64); }},
      {"slice_rows", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 5, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::slice_rows(p(t, s, "a"), 1, 2), w24); }},
      {"slice_cols", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 5, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::slice_cols(p(t, s, "a"), 2, 2), w32); }},
      {"embedding_lookup", [](ad::ParamStore& s, Rng& r) { s.add("table", uniform(r, 5, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::embedding_lookup(p(t, s, "table"), emb_idx), w44); }},
      {"tanh", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -2, 2)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::tanh(p(t, s, "a")), w34); }},
      {"sigmoid", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -3, 3)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::sigmoid(p(t, s, "a")), w34); }},
      {"relu", [](ad::ParamStore& s, Rng& r) { s.add("a", away_from_zero(r, 3, 4, 0.05, 1.0)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::relu(p(t, s, "a")), w34); }},
      {"exp", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::exp(p(t, s, "a")), w34); }},
      {"clamp", [](ad::ParamStore& s, Rng& r) {
         // Half the entries inside (-0.5, 0.5), half clearly outside.
         Matrix a = away_from_zero(r, 3, 4, 0.05, 0.45);
         for (Eigen::Index i = 0; i < a.size(); i += 2) a.data()[i] *= 2.5;
         s.add("a", a);
       },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::clamp(p(t, s, "a"), -0.5, 0.5), w34); }},
      {"minimum", [](ad::ParamStore& s, Rng& r) {
         Matrix a = uniform(r, 3, 4, -1, 1);
         s.add("b", a + away_from_zero(r, 3, 4, 0.05, 0.5));
         s.add("a", a);
       },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::minimum(p(t, s, "a"), p(t, s, "b")), w34); }},
      {"softmax", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -2, 2)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::softmax(p(t, s, "a")), w34); }},
      {"log_softmax", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -2, 2)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::log_softmax(p(t, s, "a")), w34); }},
      {"gather_cols", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::gather_cols(p(t, s, "a"), idx3), w31); }},
      {"sum", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return ad::scale(ad::sum(ad::mul(p(t, s, "a"), p(t, s, "a"))), 0.5); }},
      {"mean", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return ad::mean(ad::mul(p(t, s, "a"), t.constant(w34))); }},
      {"weighted_mean", [](ad::ParamStore& s, Rng& r) { s.add("a", uniform(r, 3, 4, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) { return ad::weighted_mean(ad::mul(p(t, s, "a"), p(t, s, "a")), wts); }},
      {"gru_cell", [](ad::ParamStore& s, Rng& r) {
         s.add("x", uniform(r, 3, 5, -1, 1));
         s.add("h", uniform(r, 3, 2, -1, 1));
         s.add("w_i", uniform(r, 5, 6, -0.8, 0.8));
         s.add("b_i", uniform(r, 1, 6, -0.3, 0.3));
         s.add("w_h", uniform(r, 2, 6, -0.8, 0.8));
         s.add("b_h", uniform(r, 1, 6, -0.3, 0.3));
       },
       [&](Tape& t, ad::ParamStore& s) {
         return reduce(t, ad::gru_cell(p(t, s, "x"), p(t, s, "h"), p(t, s, "w_i"), p(t, s, "b_i"), p(t, s, "w_h"),
                                       p(t, s, "b_h")),
                       w32);
       }},
      {"focal_loss", [](ad::ParamStore& s, Rng& r) { s.add("p", uniform(r, 3, 4, 0.05, 0.95)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::focal_loss(p(t, s, "p"), labels, 2.0, 0.5), w34); }},
      {"cross_entropy", [](ad::ParamStore& s, Rng& r) { s.add("logits", uniform(r, 3, 6, -2, 2)); },
       [&](Tape& t, ad::ParamStore& s) { return ad::cross_entropy(p(t, s, "logits"), {5, 0, 2}); }},
      {"entropy", [](ad::ParamStore& s, Rng& r) { s.add("logits", uniform(r, 3, 6, -2, 2)); },
       [&](Tape& t, ad::ParamStore& s) { return reduce(t, ad::entropy_rows_from_logits(p(t, s, "logits")), w31); }},
      {"value_loss", [](ad::ParamStore& s, Rng& r) { s.add("v", uniform(r, 3, 1, -1, 1)); },
       [&](Tape& t, ad::ParamStore& s) {
         Matrix ret(3, 1);
         ret << 0.5, -1.0, 2.0;
         return ad::mean(ad::value_loss_rows(p(t, s, "v"), ret));
       }},
      {"clipped_value_loss", [](ad::ParamStore& s, Rng&) {
         Matrix v(3, 1);
         v << 0.1, 0.9, -0.4;  // v - v_old = 0.1 (inside), 0.9 (clipped), -0.4 (clipped)
         s.add("v", v);
       },
       [&](Tape& t, ad::ParamStore& s) {
         Matrix old = Matrix::Zero(3, 1), ret(3, 1);
         ret << 1.0, 0.1, 1.0;
         return ad::mean(ad::clipped_value_loss_rows(p(t, s, "v"), old, ret, 0.2));
       }},
  };

  std::vector<GradcheckCase> out;
  for (auto& c : cases) {
    ad::ParamStore store;
    Rng init = make_rng(seed, std::hash<std::string>{}(c.name) & 0xFFFF);
    c.setup(store, init);
    auto fn = [&](Tape& t) { return c.loss(t, store); };
    out.push_back({c.name, ad::gradcheck(fn, store, 1e-5), kPrimitiveTolerance});
  }
  return out;
}

GradcheckCase composite_gradcheck(std::uint64_t seed, const std::string& aux) {
  agent::ArchConfig arch;
  arch.window = 3;
  arch.enc_hidden = 6;
  arch.enc_out = 5;
  arch.goal_embed = 4;
  arch.prev_action_embed = 3;
  arch.hidden = 6;
  arch.disturb_hidden = 7;
  arch.invdyn_hidden = 7;
  arch.variant = sim::ActionVariant::Small;
  agent::PolicyNet net(arch, seed);
  // Larger weights than the default init so every term has a visible
  // gradient.
  Rng rng = make_rng(seed, 99);
  for (auto& [name, prm] : net.params())
    for (Eigen::Index i = 0; i < prm.value.size(); ++i) prm.value.data()[i] = 0.6 * (2.0 * uniform01(rng) - 1.0);

  const int T = 4, W = 2, A = arch.num_actions();
  rl::RolloutBuffer buf;
  buf.steps = T;
  buf.workers = W;
  const auto n = static_cast<Eigen::Index>(T * W);
  buf.obs.window.resize(n, arch.obs_dim());
  for (Eigen::Index i = 0; i < buf.obs.window.size(); ++i) buf.obs.window.data()[i] = uniform01(rng) < 0.3 ? 1.0 : 0.0;
  buf.obs.goal = uniform(rng, n, agent::kGoalFeatures, -1, 1);
  buf.obs.prev_action.resize(static_cast<std::size_t>(n));
  buf.actions.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    buf.obs.prev_action[i] = static_cast<int>(uniform_int(rng, 0, A));
    buf.actions[i] = static_cast<int>(uniform_int(rng, 0, A - 1));
  }
  // Worker 1 starts a new episode at t = 2.
  buf.masks = {0, 1, 1, 1, 1, 0, 1, 1};
  buf.dones = {0, 0, 0, 1, 0, 0, 0, 0};
  buf.labels = {0, 1, 0, 0, 1, 0, 0, 1};
  buf.h0 = uniform(rng, W, arch.hidden, -0.5, 0.5);
  buf.final_windows = buf.obs.window.topRows(W);
  buf.advantages.resize(static_cast<std::size_t>(n));
  buf.returns.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    buf.advantages[i] = 2.0 * uniform01(rng) - 1.0;
    buf.returns[i] = 2.0 * uniform01(rng) - 1.0;
  }
  buf.values.assign(static_cast<std::size_t>(n), 0.0);
  buf.rewards.assign(static_cast<std::size_t>(n), 0.0);
  buf.bootstrap_values.assign(W, 0.0);

  // Old log-probs place the ratios at fixed offsets: some inside the clip
  // range, some clipped above or below, none within 0.02 of a breakpoint.
  {
    Tape t(false);
    const auto un = net.unroll(t, buf.obs, buf.h0, buf.masks, T, W);
    const Matrix logp = t.value(ad::gather_cols(ad::log_softmax(net.actor_logits(t, un.beliefs)), buf.actions));
    const double ratios[] = {1.05, 1.5, 0.6, 0.95, 1.1, 0.7, 1.35, 0.9};
    buf.log_probs.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) buf.log_probs[static_cast<std::size_t>(i)] = logp(i, 0) - std::log(ratios[i]);
  }

  rl::PPOConfig cfg;
  cfg.entropy_coef = 0.05;
  cfg.aux_weight = 0.5;
  const rl::AuxMode mode = aux == "invdyn" ? rl::AuxMode::InvDyn : rl::AuxMode::Disturb;
  const std::vector<int> workers = {0, 1};
  auto fn = [&](Tape& t) { return rl::ppo_minibatch_loss(t, net, buf, workers, cfg, mode); };
  return {"ppo+" + aux, ad::gradcheck(fn, net.params(), 1e-5), kCompositeTolerance};
}

}  // namespace dfree::checks
