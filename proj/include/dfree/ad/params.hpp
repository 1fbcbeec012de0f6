#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "dfree/ad/tape.hpp"
#include "dfree/rng.hpp"

namespace dfree::ad {

struct Param {
  Matrix value;
  Matrix grad;
  // Adam first and second moments.
  Matrix m;
  Matrix v;
};

// Named parameters with their gradient slots and optimizer moments.
class ParamStore {
 public:
  // Registers a parameter; throws std::invalid_argument on a duplicate name.
  Param& add(const std::string& name, Matrix init);
  Param& at(const std::string& name);
  const Param& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }

  std::vector<std::string> names() const;
  std::size_t num_values() const;
  std::int64_t step() const { return step_; }
  void set_step(std::int64_t s) { step_ = s; }

  auto begin() { return params_.begin(); }
  auto end() { return params_.end(); }
  auto begin() const { return params_.begin(); }
  auto end() const { return params_.end(); }

  void zero_grad();
  void reset_moments();
  double grad_norm() const;
  bool grads_finite() const;
  // Rescales gradients so their global L2 norm is at most max_norm; returns
  // the norm before clipping.
  double clip_grad_norm(double max_norm);

  // True when both stores hold the same names with the same shapes.
  bool same_layout(const ParamStore& other) const;

  // {"format": "dfree-params", "version": 1, "step": n,
  //  "params": {name: {"shape": [r, c], "values": [...row-major...]}}}
  // Moments are included under "m" and "v" when requested.
  nlohmann::json to_json(bool include_moments) const;
  // Replaces values (and moments, when present) of an existing layout.
  // Throws CheckpointMismatch when names or shapes differ.
  void load_json(const nlohmann::json& j);

  void save(const std::filesystem::path& path, bool include_moments = false) const;
  void load(const std::filesystem::path& path);

 private:
  std::map<std::string, Param> params_;
  std::int64_t step_ = 0;
};

// Initializers. All draw from the provided stream so layouts are seeded.
Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double gain = 1.0);
Matrix zeros(Eigen::Index rows, Eigen::Index cols);

}  // namespace dfree::ad
