#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfree/agent/policy.hpp"
#include "dfree/scenes/dataset.hpp"
#include "dfree/sim/environment.hpp"

namespace dfree::rl {

using ad::Matrix;
using ad::Var;

struct EpisodeSummary {
  std::string episode_id;
  double return_base = 0.0;
  // Return under the environment's configured lambda_disturb.
  double return_shaped = 0.0;
  double d_final = 0.0;
  // Sum of per-step costs d_t - d_{t-1}, plain and gamma-discounted.
  double cost_total = 0.0;
  double cost_discounted = 0.0;
  bool success = false;
  bool pickup = false;
  int length = 0;
};

// W environments stepping in lockstep over the episodes of one split.
// Each worker walks its own shuffled copy of the episode list and owns two
// RNG streams (episode order, action sampling) derived from the seed, so
// results do not depend on how workers are scheduled.
class EnvPool {
 public:
  EnvPool(const scenes::Dataset& dataset, sim::Split split, const sim::SimConfig& cfg, int workers, int hidden,
          std::uint64_t seed, double gamma);

  int size() const { return static_cast<int>(workers_.size()); }
  const sim::SimConfig& config() const { return cfg_; }
  // Changes the reward config of every environment (stage switches).
  void set_lambda_disturb(double lambda);

  const sim::Observation& observation(int w) const { return workers_[static_cast<std::size_t>(w)].obs; }
  const sim::Environment& env(int w) const { return workers_[static_cast<std::size_t>(w)].env; }
  bool episode_start(int w) const { return workers_[static_cast<std::size_t>(w)].start; }
  Rng& action_rng(int w) { return workers_[static_cast<std::size_t>(w)].act_rng; }

  // Beliefs carried across rollouts (W x hidden).
  Matrix& beliefs() { return beliefs_; }
  const Matrix& beliefs() const { return beliefs_; }

  // Steps worker w; when the episode ends the worker moves on to its next
  // episode and the finished episode's summary is returned.
  sim::StepOutcome step(int w, int action, std::optional<EpisodeSummary>* finished);

  nlohmann::json state_json() const;
  void load_state_json(const nlohmann::json& j);

 private:
  struct Worker {
    sim::Environment env;
    Rng order_rng;
    Rng act_rng;
    std::vector<int> order;
    std::size_t cursor = 0;
    int episode = 0;
    bool start = true;
    sim::Observation obs;
    EpisodeSummary acc;
    double discount = 1.0;
  };

  void next_episode(Worker& wk);
  void load_episode(Worker& wk, int episode);

  const scenes::Dataset* dataset_;
  std::vector<sim::EpisodeSpec> episodes_;
  sim::SimConfig cfg_;
  double gamma_;
  std::vector<Worker> workers_;
  Matrix beliefs_;
};

// Time-major storage: row t * workers + w.
struct RolloutBuffer {
  int steps = 0;
  int workers = 0;
  agent::ObsBatch obs;
  std::vector<int> actions;
  std::vector<double> log_probs;
  std::vector<double> values;
  std::vector<double> base_rewards;
  std::vector<double> shaped_rewards;
  // d_t - d_{t-1} of the step.
  std::vector<double> costs;
  // c_{t+1}: the step taken at row t produced a disturbance event.
  std::vector<double> labels;
  // 0 where the row starts an episode (belief is reset before the GRU step).
  std::vector<double> masks;
  // 1 where the episode ended with this step.
  std::vector<double> dones;
  // Reward the update optimizes; filled by assign_training_rewards.
  std::vector<double> rewards;
  Matrix h0;
  std::vector<double> bootstrap_values;
  // Observation windows after the last step (inverse-dynamics targets).
  Matrix final_windows;
  std::vector<double> advantages;
  std::vector<double> returns;
  std::vector<EpisodeSummary> finished;

  std::size_t index(int t, int w) const { return static_cast<std::size_t>(t) * workers + w; }
  std::size_t rows() const { return actions.size(); }
};

// Runs `steps` lockstep steps of every worker with actions sampled from
// `net`. Beliefs continue from the pool; episodes auto-reset.
RolloutBuffer collect_rollouts(EnvPool& pool, agent::PolicyNet& net, int steps);

// rewards = base - lambda * cost (lambda = 0 gives the original reward,
// lambda_disturb gives r').
void assign_training_rewards(RolloutBuffer& buf, double lambda);

// GAE over masked sequences with bootstrap values at the rollout end.
void compute_gae(RolloutBuffer& buf, double gamma, double gae_lambda, bool normalize);

}  // namespace dfree::rl
