#include "xgft/environment.hpp"

#include <algorithm>
#include <queue>

namespace xgft {

const char* action_name(Action a) {
  switch (a) {
    case Action::MoveForward: return "move_forward";
    case Action::MoveBackward: return "move_backward";
    case Action::MoveLeft: return "move_left";
    case Action::MoveRight: return "move_right";
    case Action::TurnLeft: return "turn_left";
    case Action::TurnRight: return "turn_right";
  }
  return "?";
}

Action action_from_name(const std::string& name) {
  for (int i = 0; i < kActionCount; ++i)
    if (name == action_name(static_cast<Action>(i))) return static_cast<Action>(i);
  throw Error("unknown action '" + name + "'");
}

namespace {

constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {-1, 0, 1, 0};

bool free_cells_connected(const EnvironmentState& s) {
  int start = -1;
  int free_count = 0;
  for (int i = 0; i < s.x_size * s.y_size; ++i)
    if (s.cells[static_cast<std::size_t>(i)].kind == CellKind::Free) {
      ++free_count;
      if (start < 0) start = i;
    }
  if (free_count == 0) return false;
  std::vector<bool> seen(static_cast<std::size_t>(s.x_size * s.y_size), false);
  std::queue<int> q;
  q.push(start);
  seen[static_cast<std::size_t>(start)] = true;
  int visited = 0;
  while (!q.empty()) {
    const int cur = q.front();
    q.pop();
    ++visited;
    const Vec2i p{cur % s.x_size, cur / s.x_size};
    for (int d = 0; d < 4; ++d) {
      const Vec2i npos{p.x + kDx[d], p.y + kDy[d]};
      if (!s.in_bounds(npos)) continue;
      const int ni = npos.y * s.x_size + npos.x;
      if (!seen[static_cast<std::size_t>(ni)] &&
          s.cell(npos).kind == CellKind::Free) {
        seen[static_cast<std::size_t>(ni)] = true;
        q.push(ni);
      }
    }
  }
  return visited == free_count;
}

// Randomized Prim over the even-coordinate room lattice. Returns the set of
// wall cells the spanning tree opens (kept free).
std::vector<int> prim_opened_walls(int xs, int ys, Rng& rng) {
  std::vector<Vec2i> rooms;
  for (int y = 0; y < ys; y += 2)
    for (int x = 0; x < xs; x += 2) rooms.push_back({x, y});
  auto room_index = [&](Vec2i p) {
    return (p.y / 2) * ((xs + 1) / 2) + (p.x / 2);
  };
  std::vector<bool> in_tree(rooms.size(), false);
  std::vector<std::pair<Vec2i, Vec2i>> frontier;  // (tree room, candidate room)
  std::vector<int> opened;

  const Vec2i start = rooms[static_cast<std::size_t>(rng.below(static_cast<int>(rooms.size())))];
  in_tree[static_cast<std::size_t>(room_index(start))] = true;
  auto push_edges = [&](Vec2i r) {
    for (int d = 0; d < 4; ++d) {
      const Vec2i nb{r.x + 2 * kDx[d], r.y + 2 * kDy[d]};
      if (nb.x < 0 || nb.x >= xs || nb.y < 0 || nb.y >= ys) continue;
      if (!in_tree[static_cast<std::size_t>(room_index(nb))])
        frontier.push_back({r, nb});
    }
  };
  push_edges(start);
  while (!frontier.empty()) {
    const int pick = rng.below(static_cast<int>(frontier.size()));
    const auto edge = frontier[static_cast<std::size_t>(pick)];
    frontier[static_cast<std::size_t>(pick)] = frontier.back();
    frontier.pop_back();
    const int ni = room_index(edge.second);
    if (in_tree[static_cast<std::size_t>(ni)]) continue;
    in_tree[static_cast<std::size_t>(ni)] = true;
    const Vec2i wall{(edge.first.x + edge.second.x) / 2,
                     (edge.first.y + edge.second.y) / 2};
    opened.push_back(wall.y * xs + wall.x);
    push_edges(edge.second);
  }
  return opened;
}

}  // namespace

EnvironmentState generate_map(const MapConfig& cfg, Rng& rng) {
  check(cfg.x >= 1 && cfg.y >= 1, "generate_map: bad grid size");
  check(cfg.n_objects + cfg.n_obstacles + 1 <= cfg.x * cfg.y,
        "generate_map: entities exceed grid capacity");

  EnvironmentState s;
  s.x_size = cfg.x;
  s.y_size = cfg.y;
  s.horizon = 3 * cfg.x * cfg.y;
  s.cells.assign(static_cast<std::size_t>(cfg.x * cfg.y), Cell{});
  if (cfg.n_obstacles == 0) return s;

  const int max_trees = 40;
  const int max_subsets = 50;
  for (int tree = 0; tree < max_trees; ++tree) {
    const std::vector<int> opened = prim_opened_walls(cfg.x, cfg.y, rng);
    std::vector<bool> keep_free(static_cast<std::size_t>(cfg.x * cfg.y), false);
    for (int y = 0; y < cfg.y; y += 2)
      for (int x = 0; x < cfg.x; x += 2)
        keep_free[static_cast<std::size_t>(y * cfg.x + x)] = true;
    for (int i : opened) keep_free[static_cast<std::size_t>(i)] = true;
    std::vector<int> candidates;
    for (int i = 0; i < cfg.x * cfg.y; ++i)
      if (!keep_free[static_cast<std::size_t>(i)]) candidates.push_back(i);
    check(static_cast<int>(candidates.size()) >= cfg.n_obstacles,
          "generate_map: no maze layout provides " +
              std::to_string(cfg.n_obstacles) + " obstacle cells on a " +
              std::to_string(cfg.x) + "x" + std::to_string(cfg.y) + " grid");

    for (int attempt = 0; attempt < max_subsets; ++attempt) {
      rng.shuffle(candidates);
      for (auto& c : s.cells) c = Cell{};
      for (int k = 0; k < cfg.n_obstacles; ++k)
        s.cells[static_cast<std::size_t>(candidates[static_cast<std::size_t>(k)])]
            .kind = CellKind::Obstacle;
      if (free_cells_connected(s)) return s;
    }
  }
  throw Error("generate_map: failed to produce a connected layout");
}

void place_entities(EnvironmentState& state, const PlacementSpec& spec, Rng& rng,
                    const std::function<bool(const EnvironmentState&)>& accept) {
  const int n = static_cast<int>(spec.classes.size());
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      check(spec.classes[static_cast<std::size_t>(i)] !=
                spec.classes[static_cast<std::size_t>(j)],
            "place_entities: duplicate object class");

  const int max_attempts = 80;
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    EnvironmentState cand = state;
    std::vector<Vec2i> free;
    for (int y = 0; y < cand.y_size; ++y)
      for (int x = 0; x < cand.x_size; ++x)
        if (cand.cell({x, y}).kind == CellKind::Free) free.push_back({x, y});
    if (static_cast<int>(free.size()) < n + 1) throw PlacementFailure();

    std::vector<Vec2i> slots(static_cast<std::size_t>(n), Vec2i{-1, -1});
    std::vector<Vec2i> blocked_for_agent = spec.exclude_agent;
    auto taken = [&](Vec2i p) {
      for (const auto& s : slots)
        if (s == p) return true;
      return false;
    };

    bool ok = true;
    if (spec.between_a >= 0) {
      // middle cell must remain free, so scan middles with both ends free
      std::vector<std::pair<Vec2i, int>> middles;
      for (const auto& m : free)
        for (int axis = 0; axis < 2; ++axis) {
          const Vec2i d = axis == 0 ? Vec2i{1, 0} : Vec2i{0, 1};
          const Vec2i a{m.x - d.x, m.y - d.y}, b{m.x + d.x, m.y + d.y};
          if (cand.is_free(a) && cand.is_free(b)) middles.push_back({m, axis});
        }
      if (middles.empty()) {
        ok = false;
      } else {
        rng.shuffle(middles);
        const auto [m, axis] = middles.front();
        const Vec2i d = axis == 0 ? Vec2i{1, 0} : Vec2i{0, 1};
        slots[static_cast<std::size_t>(spec.between_a)] = {m.x - d.x, m.y - d.y};
        slots[static_cast<std::size_t>(spec.between_b)] = {m.x + d.x, m.y + d.y};
        blocked_for_agent.push_back(m);
        // keep the middle free of later random placements
        free.erase(std::find(free.begin(), free.end(), m));
      }
    }
    if (ok && spec.adjacent_a >= 0) {
      std::vector<std::pair<Vec2i, Vec2i>> pairs;
      for (const auto& a : free) {
        if (taken(a)) continue;
        for (int d = 0; d < 4; ++d) {
          const Vec2i b{a.x + kDx[d], a.y + kDy[d]};
          if (cand.is_free(b) && !taken(b) &&
              std::find(free.begin(), free.end(), b) != free.end())
            pairs.push_back({a, b});
        }
      }
      if (pairs.empty()) {
        ok = false;
      } else {
        const auto pr = pairs[static_cast<std::size_t>(
            rng.below(static_cast<int>(pairs.size())))];
        slots[static_cast<std::size_t>(spec.adjacent_a)] = pr.first;
        slots[static_cast<std::size_t>(spec.adjacent_b)] = pr.second;
      }
    }
    if (ok && spec.dir_anchor >= 0) {
      const Vec2i d{kDx[spec.dir], kDy[spec.dir]};
      std::vector<std::pair<Vec2i, Vec2i>> pairs;
      for (const auto& a : free) {
        if (taken(a)) continue;
        const Vec2i b{a.x + d.x, a.y + d.y};
        if (cand.is_free(b) && !taken(b) &&
            std::find(free.begin(), free.end(), b) != free.end())
          pairs.push_back({a, b});
      }
      if (pairs.empty()) {
        ok = false;
      } else {
        const auto pr = pairs[static_cast<std::size_t>(
            rng.below(static_cast<int>(pairs.size())))];
        slots[static_cast<std::size_t>(spec.dir_anchor)] = pr.first;
        slots[static_cast<std::size_t>(spec.dir_target)] = pr.second;
      }
    }
    if (!ok) continue;

    std::vector<Vec2i> open;
    for (const auto& p : free)
      if (!taken(p)) open.push_back(p);
    rng.shuffle(open);
    std::size_t next = 0;
    for (int i = 0; i < n && ok; ++i) {
      if (slots[static_cast<std::size_t>(i)].x >= 0) continue;
      if (next >= open.size()) {
        ok = false;
        break;
      }
      slots[static_cast<std::size_t>(i)] = open[next++];
    }
    if (!ok) continue;

    Vec2i agent{-1, -1};
    for (; next < open.size(); ++next) {
      const Vec2i p = open[next];
      bool banned = false;
      for (const auto& b : blocked_for_agent)
        if (b == p) banned = true;
      if (!banned) {
        agent = p;
        break;
      }
    }
    if (agent.x < 0) continue;

    for (int i = 0; i < n; ++i) {
      Cell& c = cand.cell(slots[static_cast<std::size_t>(i)]);
      c.kind = CellKind::Object;
      c.cls = spec.classes[static_cast<std::size_t>(i)];
      c.yaw = rng.uniform(0.0, 360.0);
      c.scale = rng.uniform(0.5, 1.0);
    }
    cand.agent = agent;
    cand.heading = static_cast<Heading>(rng.below(4));

    if (!accept || accept(cand)) {
      state = std::move(cand);
      return;
    }
  }
  throw PlacementFailure();
}

StepEvent step(EnvironmentState& state, Action a) {
  check(state.t < state.horizon, "step: session already ended");
  StepEvent ev;
  switch (a) {
    case Action::TurnLeft:
      state.heading = turn_left_of(state.heading);
      break;
    case Action::TurnRight:
      state.heading = turn_right_of(state.heading);
      break;
    default: {
      const Vec2i f = heading_vec(state.heading);
      const Vec2i r = heading_vec(turn_right_of(state.heading));
      Vec2i d;
      switch (a) {
        case Action::MoveForward: d = f; break;
        case Action::MoveBackward: d = {-f.x, -f.y}; break;
        case Action::MoveLeft: d = {-r.x, -r.y}; break;
        default: d = r; break;  // MoveRight
      }
      const Vec2i target{state.agent.x + d.x, state.agent.y + d.y};
      if (!state.in_bounds(target) ||
          state.cell(target).kind == CellKind::Obstacle) {
        ev.kind = StepEventKind::Blocked;
      } else if (state.cell(target).kind == CellKind::Object) {
        ev.kind = StepEventKind::ReachedObject;
        ev.object_class = state.cell(target).cls;
        ev.object_cell = target;
      } else {
        state.agent = target;
      }
      break;
    }
  }
  state.t += 1;
  if (ev.kind != StepEventKind::ReachedObject && state.t >= state.horizon)
    ev.kind = StepEventKind::Timeout;
  ev.agent_cell = state.agent;
  return ev;
}

bool segment_crosses_cell(Vec2i a, Vec2i b, Vec2i c) {
  // Doubled coordinates: centers at even integers, cell faces at odd ones.
  const long x0 = 2L * a.x, y0 = 2L * a.y;
  const long dx = 2L * (b.x - a.x), dy = 2L * (b.y - a.y);
  // open parameter interval as fractions lo/loden < t < hi/hiden, dens > 0
  long lo_n = 0, lo_d = 1, hi_n = 1, hi_d = 1;
  auto tighten = [&](long delta, long origin, long face_lo, long face_hi) {
    if (delta == 0) return face_lo < origin && origin < face_hi;
    long n1 = face_lo - origin, n2 = face_hi - origin, d = delta;
    if (d < 0) {
      n1 = -n1;
      n2 = -n2;
      d = -d;
      std::swap(n1, n2);
    }
    // now the interval is (n1/d, n2/d)
    if (n1 * lo_d > lo_n * d) {
      lo_n = n1;
      lo_d = d;
    }
    if (n2 * hi_d < hi_n * d) {
      hi_n = n2;
      hi_d = d;
    }
    return true;
  };
  if (!tighten(dx, x0, 2L * c.x - 1, 2L * c.x + 1)) return false;
  if (!tighten(dy, y0, 2L * c.y - 1, 2L * c.y + 1)) return false;
  return lo_n * hi_d < hi_n * lo_d;  // strictly non-degenerate interval
}

std::array<bool, 25> visible_mask(const EnvironmentState& state) {
  std::array<bool, 25> mask{};
  const Vec2i fwd = heading_vec(state.heading);
  const Vec2i right = heading_vec(turn_right_of(state.heading));
  for (int row = 0; row < kViewCells; ++row)
    for (int col = 0; col < kViewCells; ++col) {
      const int f = kViewCells - 1 - row;  // rows ahead of the agent
      const int l = col - 2;               // lateral offset
      const Vec2i w{state.agent.x + f * fwd.x + l * right.x,
                    state.agent.y + f * fwd.y + l * right.y};
      bool vis = state.in_bounds(w);
      if (vis && !(w == state.agent)) {
        const int min_x = std::min(state.agent.x, w.x);
        const int max_x = std::max(state.agent.x, w.x);
        const int min_y = std::min(state.agent.y, w.y);
        const int max_y = std::max(state.agent.y, w.y);
        for (int cy = min_y; cy <= max_y && vis; ++cy)
          for (int cx = min_x; cx <= max_x && vis; ++cx) {
            const Vec2i c{cx, cy};
            if (c == state.agent || c == w) continue;
            if (state.cell(c).kind != CellKind::Obstacle) continue;
            if (segment_crosses_cell(state.agent, w, c)) vis = false;
          }
      }
      mask[static_cast<std::size_t>(row * kViewCells + col)] = vis;
    }
  return mask;
}

namespace {

void blit_tile(Observation& obs, int row, int col, const Tile& tile) {
  for (int py = 0; py < kTilePixels; ++py)
    for (int px = 0; px < kTilePixels; ++px) {
      const std::size_t src = static_cast<std::size_t>(py * kTilePixels + px) * 4;
      if (tile.rgba[src + 3] == 0) continue;
      const std::size_t dst =
          (static_cast<std::size_t>(row * kTilePixels + py) * kImageSize +
           static_cast<std::size_t>(col * kTilePixels + px)) *
          3;
      obs.image[dst + 0] = tile.rgba[src + 0];
      obs.image[dst + 1] = tile.rgba[src + 1];
      obs.image[dst + 2] = tile.rgba[src + 2];
    }
}

}  // namespace

Observation render(const EnvironmentState& state) {
  Observation obs;  // zero-initialized: invisible cells stay pure black
  obs.mask = visible_mask(state);
  const Vec2i fwd = heading_vec(state.heading);
  const Vec2i right = heading_vec(turn_right_of(state.heading));
  for (int row = 0; row < kViewCells; ++row)
    for (int col = 0; col < kViewCells; ++col) {
      if (!obs.mask[static_cast<std::size_t>(row * kViewCells + col)]) continue;
      const int f = kViewCells - 1 - row;
      const int l = col - 2;
      const Vec2i w{state.agent.x + f * fwd.x + l * right.x,
                    state.agent.y + f * fwd.y + l * right.y};
      const Cell& c = state.cell(w);
      switch (c.kind) {
        case CellKind::Free:
          blit_tile(obs, row, col, floor_tile());
          break;
        case CellKind::Obstacle:
          blit_tile(obs, row, col, obstacle_tile());
          break;
        case CellKind::Object:
          blit_tile(obs, row, col, floor_tile());
          blit_tile(obs, row, col, sprite_for_class(c.cls, c.yaw, c.scale));
          break;
      }
    }
  return obs;
}

std::vector<bool> reachable_free_cells(const EnvironmentState& state) {
  std::vector<bool> reach(static_cast<std::size_t>(state.x_size * state.y_size),
                          false);
  if (!state.in_bounds(state.agent)) return reach;
  std::queue<Vec2i> q;
  q.push(state.agent);
  reach[static_cast<std::size_t>(state.agent.y * state.x_size + state.agent.x)] =
      true;
  while (!q.empty()) {
    const Vec2i p = q.front();
    q.pop();
    for (int d = 0; d < 4; ++d) {
      const Vec2i npos{p.x + kDx[d], p.y + kDy[d]};
      if (!state.is_free(npos)) continue;
      const std::size_t ni =
          static_cast<std::size_t>(npos.y * state.x_size + npos.x);
      if (!reach[ni]) {
        reach[ni] = true;
        q.push(npos);
      }
    }
  }
  return reach;
}

bool contact_reachable(const EnvironmentState& state,
                       const std::vector<bool>& reach, Vec2i target) {
  for (int d = 0; d < 4; ++d) {
    const Vec2i n{target.x + kDx[d], target.y + kDy[d]};
    if (!state.in_bounds(n)) continue;
    if (reach[static_cast<std::size_t>(n.y * state.x_size + n.x)]) return true;
  }
  return false;
}

std::uint64_t state_hash(const EnvironmentState& state) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, std::size_t n) { h = fnv1a64(p, n, h); };
  mix(&state.x_size, sizeof(int));
  mix(&state.y_size, sizeof(int));
  for (const Cell& c : state.cells) {
    mix(&c.kind, sizeof(c.kind));
    mix(&c.cls, sizeof(c.cls));
    mix(&c.yaw, sizeof(c.yaw));
    mix(&c.scale, sizeof(c.scale));
  }
  mix(&state.agent, sizeof(state.agent));
  mix(&state.heading, sizeof(state.heading));
  mix(&state.t, sizeof(state.t));
  mix(&state.horizon, sizeof(state.horizon));
  return h;
}

std::string ascii_map(const EnvironmentState& state) {
  std::string out;
  for (int y = 0; y < state.y_size; ++y) {
    for (int x = 0; x < state.x_size; ++x) {
      const Vec2i p{x, y};
      char ch = '.';
      const Cell& c = state.cell(p);
      if (c.kind == CellKind::Obstacle) ch = '#';
      if (c.kind == CellKind::Object) ch = static_cast<char>('A' + c.cls % 26);
      if (p == state.agent) {
        static constexpr char arrows[4] = {'^', '>', 'v', '<'};
        ch = arrows[static_cast<int>(state.heading)];
      }
      out += ch;
    }
    out += '\n';
  }
  return out;
}

}  // namespace xgft
