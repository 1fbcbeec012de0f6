#include "dfree/ad/params.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "dfree/errors.hpp"

namespace dfree::ad {

using nlohmann::json;

Param& ParamStore::add(const std::string& name, Matrix init) {
  if (params_.count(name)) throw std::invalid_argument("duplicate parameter " + name);
  Param p;
  p.grad = Matrix::Zero(init.rows(), init.cols());
  p.m = Matrix::Zero(init.rows(), init.cols());
  p.v = Matrix::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  return params_.emplace(name, std::move(p)).first->second;
}

Param& ParamStore::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

const Param& ParamStore::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw std::out_of_range("unknown parameter " + name);
  return it->second;
}

std::vector<std::string> ParamStore::names() const {
  std::vector<std::string> out;
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamStore::num_values() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

void ParamStore::reset_moments() {
  for (auto& [_, p] : params_) {
    p.m.setZero(p.value.rows(), p.value.cols());
    p.v.setZero(p.value.rows(), p.value.cols());
  }
  step_ = 0;
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& [_, p] : params_) sq += p.grad.squaredNorm();
  return std::sqrt(sq);
}

bool ParamStore::grads_finite() const {
  for (const auto& [_, p] : params_)
    if (!p.grad.allFinite()) return false;
  return true;
}

double ParamStore::clip_grad_norm(double max_norm) {
  const double norm = grad_norm();
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& [_, p] : params_) p.grad *= s;
  }
  return norm;
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (params_.size() != other.params_.size()) return false;
  for (const auto& [name, p] : params_) {
    auto it = other.params_.find(name);
    if (it == other.params_.end()) return false;
    if (it->second.value.rows() != p.value.rows() || it->second.value.cols() != p.value.cols()) return false;
  }
  return true;
}

namespace {

json flat(const Matrix& m) { return std::vector<double>(m.data(), m.data() + m.size()); }

void unflat(const json& j, Matrix& m, const std::string& what) {
  const auto values = j.get<std::vector<double>>();
  if (static_cast<Eigen::Index>(values.size()) != m.size())
    throw CheckpointMismatch(what + ": expected " + std::to_string(m.size()) + " values, found " +
                             std::to_string(values.size()));
  std::copy(values.begin(), values.end(), m.data());
}

}  // namespace

json ParamStore::to_json(bool include_moments) const {
  json params = json::object();
  for (const auto& [name, p] : params_) {
    json entry = {{"shape", {p.value.rows(), p.value.cols()}}, {"values", flat(p.value)}};
    if (include_moments) {
      entry["m"] = flat(p.m);
      entry["v"] = flat(p.v);
    }
    params[name] = std::move(entry);
  }
  return {{"format", "dfree-params"}, {"version", 1}, {"step", step_}, {"params", std::move(params)}};
}

void ParamStore::load_json(const json& j) {
  if (j.value("format", std::string{}) != "dfree-params") throw CheckpointMismatch("not a parameter file");
  if (j.value("version", 0) != 1) throw FormatVersionMismatch("unsupported parameter file version");
  const json& params = j.at("params");
  if (params.size() != params_.size())
    throw CheckpointMismatch("checkpoint holds " + std::to_string(params.size()) + " parameters, model has " +
                             std::to_string(params_.size()));
  for (auto& [name, p] : params_) {
    if (!params.contains(name)) throw CheckpointMismatch("checkpoint lacks parameter " + name);
    const json& e = params.at(name);
    const auto shape = e.at("shape").get<std::vector<Eigen::Index>>();
    if (shape.size() != 2 || shape[0] != p.value.rows() || shape[1] != p.value.cols())
      throw CheckpointMismatch("shape mismatch for parameter " + name);
  }
  for (auto& [name, p] : params_) {
    const json& e = params.at(name);
    unflat(e.at("values"), p.value, name);
    if (e.contains("m")) unflat(e.at("m"), p.m, name + ".m");
    if (e.contains("v")) unflat(e.at("v"), p.v, name + ".v");
  }
  step_ = j.value("step", std::int64_t{0});
}

void ParamStore::save(const std::filesystem::path& path, bool include_moments) const {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IOFailure("cannot write " + path.string());
  os << to_json(include_moments).dump() << '\n';
  if (!os) throw IOFailure("write failed for " + path.string());
}

void ParamStore::load(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IOFailure("cannot open " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw IOFailure(path.string() + ": " + e.what());
  }
  load_json(j);
}

Matrix glorot_uniform(Eigen::Index rows, Eigen::Index cols, Rng& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / static_cast<double>(rows + cols));
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform01(rng) - 1.0) * limit;
  return m;
}

Matrix zeros(Eigen::Index rows, Eigen::Index cols) { return Matrix::Zero(rows, cols); }

}  // namespace dfree::ad
