#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "xgft/rng.hpp"
#include "xgft/tensor.hpp"

namespace xgft {

struct Vec2i {
  int x = 0, y = 0;
  bool operator==(const Vec2i& o) const { return x == o.x && y == o.y; }
  bool operator!=(const Vec2i& o) const { return !(*this == o); }
};

enum class Heading : int { N = 0, E = 1, S = 2, W = 3 };

// Grid axes: x grows east, y grows south; north is -y.
inline Vec2i heading_vec(Heading h) {
  static constexpr int dx[4] = {0, 1, 0, -1};
  static constexpr int dy[4] = {-1, 0, 1, 0};
  return {dx[static_cast<int>(h)], dy[static_cast<int>(h)]};
}
inline Heading turn_right_of(Heading h) {
  return static_cast<Heading>((static_cast<int>(h) + 1) % 4);
}
inline Heading turn_left_of(Heading h) {
  return static_cast<Heading>((static_cast<int>(h) + 3) % 4);
}

enum class Action : int {
  MoveForward = 0,
  MoveBackward = 1,
  MoveLeft = 2,
  MoveRight = 3,
  TurnLeft = 4,
  TurnRight = 5,
};
constexpr int kActionCount = 6;
const char* action_name(Action a);
Action action_from_name(const std::string& name);

struct MapConfig {
  int x = 8, y = 8;
  int n_objects = 4;
  int n_obstacles = 16;
  int level = 6;
};

enum class CellKind : std::uint8_t { Free = 0, Obstacle = 1, Object = 2 };

struct Cell {
  CellKind kind = CellKind::Free;
  int cls = -1;       // object class id
  double yaw = 0.0;   // degrees
  double scale = 1.0; // within [0.5, 1.0]
};

struct EnvironmentState {
  int x_size = 0, y_size = 0;
  std::vector<Cell> cells;  // row-major [y][x]
  Vec2i agent{-1, -1};
  Heading heading = Heading::N;
  int t = 0;
  int horizon = 0;

  bool in_bounds(Vec2i p) const {
    return p.x >= 0 && p.x < x_size && p.y >= 0 && p.y < y_size;
  }
  Cell& cell(Vec2i p) { return cells[static_cast<std::size_t>(p.y * x_size + p.x)]; }
  const Cell& cell(Vec2i p) const {
    return cells[static_cast<std::size_t>(p.y * x_size + p.x)];
  }
  bool is_free(Vec2i p) const {
    return in_bounds(p) && cell(p).kind == CellKind::Free;
  }
  bool terminated_by_time() const { return t >= horizon; }
};

enum class StepEventKind : std::uint8_t {
  None = 0,
  ReachedObject = 1,
  Blocked = 2,
  Timeout = 3,
};

struct StepEvent {
  StepEventKind kind = StepEventKind::None;
  int object_class = -1;
  Vec2i object_cell{-1, -1};
  Vec2i agent_cell{-1, -1};  // post-step agent position
};

constexpr int kViewCells = 5;          // 5x5 window
constexpr int kTilePixels = 16;        // 16x16 per cell
constexpr int kImageSize = kViewCells * kTilePixels;  // 80

struct Observation {
  std::array<std::uint8_t, kImageSize * kImageSize * 3> image{};
  std::array<bool, kViewCells * kViewCells> mask{};  // row-major, row 0 farthest
};

// Obstacle layout from a randomized-Prim spanning tree over the coarse
// even-coordinate room lattice: walls the tree does not open are obstacle
// candidates, from which exactly cfg.n_obstacles are sampled, followed by a
// BFS connectivity check with rejection-resampling. Entities are unplaced.
EnvironmentState generate_map(const MapConfig& cfg, Rng& rng);

// Object placement constraints. Indices refer to `classes`. All class ids are
// distinct so every command referent is unique on the map.
struct PlacementSpec {
  std::vector<int> classes;
  int adjacent_a = -1, adjacent_b = -1;  // 4-adjacent object pair
  int between_a = -1, between_b = -1;    // collinear pair, one free cell apart
  int dir_anchor = -1, dir_target = -1;  // target at `dir` of anchor
  int dir = -1;                          // heading index (N/E/S/W)
  std::vector<Vec2i> exclude_agent;      // agent may not start on these cells
};

struct PlacementFailure : Error {
  PlacementFailure() : Error("placement: constraints unsatisfiable on this map") {}
};

// Places objects and the agent on distinct free cells honoring the spec, with
// random yaw in [0,360) and scale in [0.5,1.0]. `accept` may veto a candidate
// scene (e.g. goal reachability); after the retry budget the map should be
// regenerated (PlacementFailure).
void place_entities(EnvironmentState& state, const PlacementSpec& spec, Rng& rng,
                    const std::function<bool(const EnvironmentState&)>& accept = {});

// Advances the session clock. Turns rotate 90 degrees; moves translate one
// cell relative to the heading. Moving into an obstacle or off-grid blocks;
// moving onto an object reports contact and leaves the agent in place.
StepEvent step(EnvironmentState& state, Action a);

// Window visibility: agent bottom-center, four rows ahead, two columns to
// each side, in the heading frame. A cell is visible iff the center-to-center
// segment crosses no interior obstacle cell; corner grazes do not occlude.
std::array<bool, 25> visible_mask(const EnvironmentState& state);

Observation render(const EnvironmentState& state);

// Exact integer test: does the open segment between cell centers a and b pass
// through the open interior of cell c?
bool segment_crosses_cell(Vec2i a, Vec2i b, Vec2i c);

// BFS over free cells (obstacles and objects block) from the agent cell.
std::vector<bool> reachable_free_cells(const EnvironmentState& state);
// True when some free cell 4-adjacent to `target` is reachable (or is the
// agent cell itself).
bool contact_reachable(const EnvironmentState& state,
                       const std::vector<bool>& reach, Vec2i target);

std::uint64_t state_hash(const EnvironmentState& state);

// Single-line ASCII row rendering for replay output ('#' obstacle, '.' free,
// letters for objects, '@' agent).
std::string ascii_map(const EnvironmentState& state);

// --- sprites ----------------------------------------------------------------

struct Tile {
  std::array<std::uint8_t, kTilePixels * kTilePixels * 4> rgba{};
};

// Procedural class sprite: distinct base hue plus a patterned 12x12 core with
// an orientation marker, rotated by yaw (nearest neighbor) and scaled.
Tile sprite_for_class(int cls, double yaw_deg, double scale);
Tile obstacle_tile();
Tile floor_tile();

}  // namespace xgft
