#include "dfree/eval/evaluate.hpp"

#include "dfree/agent/checkpoint.hpp"
#include "dfree/errors.hpp"
#include "dfree/sim/environment.hpp"

namespace dfree::eval {

std::vector<EpisodeRecord> evaluate_policy(agent::PolicyNet& net, const scenes::Dataset& dataset, sim::Split split,
                                           const sim::SimConfig& cfg, int max_episodes) {
  if (cfg.action_variant != net.arch().variant || cfg.window != net.arch().window)
    throw CheckpointMismatch("network does not match the simulator's action space or window");
  const auto episodes = dataset.episodes_in(split);
  std::vector<EpisodeRecord> out;
  for (const auto& spec : episodes) {
    if (max_episodes > 0 && static_cast<int>(out.size()) >= max_episodes) break;
    sim::Environment env(dataset.scene(spec.scene_id), cfg);
    env.reset(spec);
    agent::Belief belief = agent::initial_belief(net);
    EpisodeRecord rec;
    rec.episode_id = spec.episode_id;
    for (;;) {
      belief = agent::belief_update(net, belief, env.observe());
      const agent::ActResult a = agent::act(net, belief, agent::ActMode::Greedy);
      const sim::StepOutcome o = env.step(a.action);
      rec.actions.push_back(a.action);
      rec.events.push_back(o.disturbance_event ? 1 : 0);
      if (o.pickup_event) {
        rec.pickup = true;
        rec.pickup_step = env.state().step;
      }
      if (o.episode_done) {
        rec.success = o.success_event;
        rec.ended_by = o.success_event ? "success" : (o.timeout ? "timeout" : "done");
        break;
      }
    }
    const auto& st = env.state();
    const double cell = env.scene().cell_size_m();
    rec.d_final = sim::disturbance_distance(st, cell);
    rec.num_disturbed = sim::displaced_object_count(st, cell, cfg.srwod_threshold_m);
    rec.length = st.step;
    rec.termination_step = st.step;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<EpisodeRecord> evaluate(const std::filesystem::path& checkpoint, const agent::ArchConfig& arch,
                                    const scenes::Dataset& dataset, sim::Split split, const sim::SimConfig& cfg,
                                    int max_episodes) {
  agent::PolicyNet net = agent::load_policy(checkpoint, arch);
  return evaluate_policy(net, dataset, split, cfg, max_episodes);
}

std::vector<std::vector<EpisodeRecord>> evaluate_seeds(const std::vector<std::filesystem::path>& checkpoints,
                                                       const agent::ArchConfig& arch, const scenes::Dataset& dataset,
                                                       sim::Split split, const sim::SimConfig& cfg) {
  std::vector<std::vector<EpisodeRecord>> out;
  for (const auto& c : checkpoints) out.push_back(evaluate(c, arch, dataset, split, cfg));
  return out;
}

}  // namespace dfree::eval
