#include "dfree/agent/checkpoint.hpp"

#include <fstream>

#include "dfree/errors.hpp"

namespace dfree::agent {

using nlohmann::json;

json arch_to_json(const ArchConfig& a) {
  return {{"window", a.window},
          {"enc_hidden", a.enc_hidden},
          {"enc_out", a.enc_out},
          {"goal_embed", a.goal_embed},
          {"prev_action_embed", a.prev_action_embed},
          {"hidden", a.hidden},
          {"disturb_hidden", a.disturb_hidden},
          {"invdyn_hidden", a.invdyn_hidden},
          {"action_space", std::string(sim::variant_name(a.variant))}};
}

ArchConfig arch_from_json(const json& j) {
  ArchConfig a;
  a.window = j.at("window").get<int>();
  a.enc_hidden = j.at("enc_hidden").get<int>();
  a.enc_out = j.at("enc_out").get<int>();
  a.goal_embed = j.at("goal_embed").get<int>();
  a.prev_action_embed = j.at("prev_action_embed").get<int>();
  a.hidden = j.at("hidden").get<int>();
  a.disturb_hidden = j.at("disturb_hidden").get<int>();
  a.invdyn_hidden = j.at("invdyn_hidden").get<int>();
  a.variant = sim::parse_variant(j.at("action_space").get<std::string>());
  return a;
}

void save_policy(const PolicyNet& net, const std::filesystem::path& path) {
  json j = net.params().to_json(false);
  j["arch"] = arch_to_json(net.arch());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream os(tmp);
    if (!os) throw IOFailure("cannot write " + path.string());
    os << j.dump() << '\n';
    if (!os) throw IOFailure("write failed for " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

namespace {

json read_json(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IOFailure("cannot read " + path.string());
  try {
    return json::parse(is);
  } catch (const json::exception& e) {
    throw IOFailure("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace

PolicyNet load_policy(const std::filesystem::path& path) {
  const json j = read_json(path);
  if (!j.contains("arch")) throw CheckpointMismatch(path.string() + " carries no architecture record");
  PolicyNet net(arch_from_json(j.at("arch")), 0);
  net.params().load_json(j);
  return net;
}

PolicyNet load_policy(const std::filesystem::path& path, const ArchConfig& expected) {
  const json j = read_json(path);
  if (j.contains("arch") && !(arch_from_json(j.at("arch")) == expected))
    throw CheckpointMismatch(path.string() + " was written for a different architecture");
  PolicyNet net(expected, 0);
  net.params().load_json(j);
  return net;
}

}  // namespace dfree::agent
