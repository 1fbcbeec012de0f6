#include "dfree/sim/grid.hpp"

#include <queue>
#include <stdexcept>

#include "dfree/errors.hpp"

namespace dfree::sim {

std::string_view heading_name(Heading h) {
  switch (h) {
    case Heading::N: return "N";
    case Heading::E: return "E";
    case Heading::S: return "S";
    case Heading::W: return "W";
  }
  return "?";
}

Heading parse_heading(std::string_view s) {
  if (s == "N") return Heading::N;
  if (s == "E") return Heading::E;
  if (s == "S") return Heading::S;
  if (s == "W") return Heading::W;
  throw std::invalid_argument("unknown heading: " + std::string(s));
}

GridScene::GridScene(int width, int height, const std::vector<Cell>& walls, double cell_size_m,
                     bool add_boundary)
    : width_(width), height_(height), cell_size_m_(cell_size_m) {
  if (width < 5 || height < 5) throw InvalidEpisode("scene must be at least 5x5");
  if (!(cell_size_m > 0.0)) throw InvalidEpisode("cell size must be positive");
  walls_.assign(static_cast<std::size_t>(width) * height, 0);
  for (Cell c : walls) {
    if (!in_bounds(c)) throw InvalidEpisode("wall cell outside the scene");
    walls_[index(c)] = 1;
  }
  for (int x = 0; x < width; ++x) {
    for (int y : {0, height - 1}) {
      if (add_boundary) walls_[index({x, y})] = 1;
      if (!walls_[index({x, y})]) throw InvalidEpisode("boundary cell is not a wall");
    }
  }
  for (int y = 0; y < height; ++y) {
    for (int x : {0, width - 1}) {
      if (add_boundary) walls_[index({x, y})] = 1;
      if (!walls_[index({x, y})]) throw InvalidEpisode("boundary cell is not a wall");
    }
  }
}

std::vector<Cell> GridScene::wall_cells() const {
  std::vector<Cell> out;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (walls_[index({x, y})]) out.push_back({x, y});
  return out;
}

std::vector<Cell> GridScene::free_cells() const {
  std::vector<Cell> out;
  for (int y = 0; y < height_; ++y)
    for (int x = 0; x < width_; ++x)
      if (!walls_[index({x, y})]) out.push_back({x, y});
  return out;
}

bool GridScene::free_space_connected() const {
  const auto free = free_cells();
  if (free.empty()) return false;
  std::vector<std::uint8_t> seen(walls_.size(), 0);
  std::queue<Cell> q;
  q.push(free.front());
  seen[index(free.front())] = 1;
  std::size_t reached = 1;
  while (!q.empty()) {
    const Cell c = q.front();
    q.pop();
    for (Heading h : {Heading::N, Heading::E, Heading::S, Heading::W}) {
      const Cell n = c + forward_of(h);
      if (is_wall(n) || seen[index(n)]) continue;
      seen[index(n)] = 1;
      ++reached;
      q.push(n);
    }
  }
  return reached == free.size();
}

}  // namespace dfree::sim
