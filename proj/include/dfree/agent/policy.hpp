#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "dfree/ad/params.hpp"
#include "dfree/ad/tape.hpp"
#include "dfree/rng.hpp"
#include "dfree/sim/actions.hpp"
#include "dfree/sim/observation.hpp"

namespace dfree::agent {

using ad::Matrix;
using ad::Var;

struct ArchConfig {
  int window = 7;
  int enc_hidden = 64;
  int enc_out = 64;
  int goal_embed = 32;
  int prev_action_embed = 16;
  int hidden = 64;
  int disturb_hidden = 128;
  int invdyn_hidden = 128;
  sim::ActionVariant variant = sim::ActionVariant::Large;

  int num_actions() const { return sim::ActionSpace(variant).size(); }
  int obs_dim() const { return window * window * sim::kNumChannels; }
  int gru_input() const { return enc_out + goal_embed + prev_action_embed; }
  friend bool operator==(const ArchConfig&, const ArchConfig&) = default;
};

// Polar goal, as fed to the goal embedding: (rho / 8, cos theta, sin theta,
// theta / pi, holding).
inline constexpr int kGoalFeatures = 5;

// Network inputs for n rows (time-major when n = T * B).
struct ObsBatch {
  Matrix window;                 // n x obs_dim
  Matrix goal;                   // n x kGoalFeatures
  std::vector<int> prev_action;  // n tokens in [0, |A|]; |A| = episode start

  Eigen::Index rows() const { return window.rows(); }
};

void append_observation(ObsBatch& batch, Eigen::Index row, const sim::Observation& obs, const sim::ActionSpace& space);
ObsBatch make_batch(const std::vector<sim::Observation>& obs, const sim::ActionSpace& space);

// Recurrent actor-critic with optional auxiliary heads:
//   enc    : window -> 64 -> 64 (ReLU MLP)
//   goal   : polar goal -> 32 (tanh)
//   prev   : previous-action embedding table (|A| + 1) x 16
//   gru    : [enc | goal | prev] -> belief (hidden)
//   actor  : belief -> |A| logits; critic : belief -> 1
//   disturb: belief -> 128 -> |A| sigmoid, one disturbance probability per action
//   invdyn : [belief_t | enc(o_{t+1})] -> 128 -> |A| logits
class PolicyNet {
 public:
  PolicyNet(const ArchConfig& arch, std::uint64_t seed);

  const ArchConfig& arch() const { return arch_; }
  const sim::ActionSpace& action_space() const { return space_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  Var encode(ad::Tape& t, const Matrix& window);
  // Pre-activation GRU input projections for every row: [enc|goal|prev] W_i + b_i.
  Var gru_inputs(ad::Tape& t, const ObsBatch& obs, Var* encoded = nullptr);
  // One recurrent step for B rows; `mask` zeroes the previous belief of
  // rows that start an episode.
  Var gru_step(ad::Tape& t, Var gx, Var h_prev, const std::vector<double>& mask);

  Var actor_logits(ad::Tape& t, Var belief);
  Var value(ad::Tape& t, Var belief);
  Var disturb_probs(ad::Tape& t, Var belief);
  Var invdyn_logits(ad::Tape& t, Var belief, Var next_encoding);

  struct Unrolled {
    Var beliefs;    // (T * B) x hidden, time-major
    Var encodings;  // (T * B) x enc_out
  };
  // Unrolls T steps for B sequences from initial beliefs h0 (B x hidden).
  // masks[t * B + b] = 0 marks an episode start.
  Unrolled unroll(ad::Tape& t, const ObsBatch& obs, const Matrix& h0, const std::vector<double>& masks, int steps,
                  int batch);

 private:
  ArchConfig arch_;
  sim::ActionSpace space_;
  ad::ParamStore params_;
};

// ---- single-agent inference -------------------------------------------------

struct Belief {
  Eigen::RowVectorXd h;
  // True until the first update of an episode; masks the stale h.
  bool episode_start = true;
};

Belief initial_belief(const PolicyNet& net);

// b_t = GRU(mask * b_{t-1}, [enc(window) | goal | prev action]).
Belief belief_update(PolicyNet& net, const Belief& belief, const sim::Observation& obs);

enum class ActMode { Sample, Greedy };

struct ActResult {
  int action = 0;
  double log_prob = 0.0;
  double value = 0.0;
  std::vector<double> probs;
};

// Greedy returns the lowest index among tied maxima. `rng` is only drawn
// from in Sample mode.
ActResult act(PolicyNet& net, const Belief& belief, ActMode mode, Rng* rng = nullptr);
// Categorical draw by inverse CDF with one uniform variate.
int sample_categorical(const std::vector<double>& probs, Rng& rng);
int argmax_first(const std::vector<double>& values);

std::vector<double> predict_disturbance(PolicyNet& net, const Belief& belief);
std::vector<double> encode_observation(PolicyNet& net, const sim::Observation& obs);
std::vector<double> predict_inverse_dynamics(PolicyNet& net, const Belief& belief,
                                             const std::vector<double>& next_obs_encoding);

}  // namespace dfree::agent
