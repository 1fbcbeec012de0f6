#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace dfree::sim {

// Integer cell coordinate. x grows east, y grows south.
struct Cell {
  int x = 0;
  int y = 0;

  friend constexpr Cell operator+(Cell a, Cell b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Cell operator-(Cell a, Cell b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Cell operator*(int k, Cell a) { return {k * a.x, k * a.y}; }
  friend constexpr auto operator<=>(const Cell&, const Cell&) = default;
};

enum class Heading : std::uint8_t { N = 0, E = 1, S = 2, W = 3 };

constexpr Cell forward_of(Heading h) {
  switch (h) {
    case Heading::N: return {0, -1};
    case Heading::E: return {1, 0};
    case Heading::S: return {0, 1};
    case Heading::W: return {-1, 0};
  }
  return {0, 0};
}

// Unit vector pointing to the agent's right.
constexpr Cell right_of(Heading h) { return forward_of(static_cast<Heading>((static_cast<int>(h) + 1) % 4)); }

constexpr Heading turn_right(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 1) % 4); }
constexpr Heading turn_left(Heading h) { return static_cast<Heading>((static_cast<int>(h) + 3) % 4); }

std::string_view heading_name(Heading h);
Heading parse_heading(std::string_view s);

// Static room layout. Walls are fixed at construction; the boundary ring is
// always wall.
class GridScene {
 public:
  GridScene() = default;
  // Throws InvalidEpisode when the size is below 5x5 or a boundary cell is
  // open. `walls` lists interior and boundary wall cells; the boundary ring
  // is added automatically when `add_boundary` is set.
  GridScene(int width, int height, const std::vector<Cell>& walls, double cell_size_m = 0.25,
            bool add_boundary = true);

  int width() const { return width_; }
  int height() const { return height_; }
  double cell_size_m() const { return cell_size_m_; }

  bool in_bounds(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < width_ && c.y < height_; }
  // Out-of-bounds cells count as walls.
  bool is_wall(Cell c) const { return !in_bounds(c) || walls_[index(c)] != 0; }
  bool is_free(Cell c) const { return !is_wall(c); }

  std::vector<Cell> wall_cells() const;
  std::vector<Cell> free_cells() const;
  // True when every free cell is reachable from every other by 4-moves.
  bool free_space_connected() const;

  friend bool operator==(const GridScene&, const GridScene&) = default;

 private:
  std::size_t index(Cell c) const { return static_cast<std::size_t>(c.y) * width_ + c.x; }

  int width_ = 0;
  int height_ = 0;
  double cell_size_m_ = 0.25;
  std::vector<std::uint8_t> walls_;
};

}  // namespace dfree::sim
