#include "xgft/teacher.hpp"

#include <algorithm>

namespace xgft {

const char* task_name(TaskType t) {
  switch (t) {
    case TaskType::Nav: return "nav";
    case TaskType::NavNear: return "nav_nr";
    case TaskType::NavBetween: return "nav_bw";
    case TaskType::NavAvoid: return "nav_avoid";
    case TaskType::NavDir: return "nav_dir";
  }
  return "?";
}

TaskType task_from_name(const std::string& name) {
  for (int i = 0; i < kTaskCount; ++i)
    if (name == task_name(static_cast<TaskType>(i)))
      return static_cast<TaskType>(i);
  throw Error("unknown task '" + name + "'");
}

std::vector<MapConfig> default_curriculum() {
  return {
      {3, 3, 2, 0, 1},  {4, 4, 2, 3, 2},  {5, 5, 2, 6, 3},
      {6, 6, 4, 9, 4},  {7, 7, 4, 12, 5}, {8, 8, 4, 16, 6},
  };
}

void curriculum_update(CurriculumState& cs, TaskType task, bool success,
                       int max_level) {
  cs.window.push_back({task, success});
  while (static_cast<int>(cs.window.size()) > kCurriculumWindow)
    cs.window.pop_front();
  if (cs.level >= max_level) return;

  int counts[kTaskCount] = {0};
  int wins[kTaskCount] = {0};
  for (const auto& [t, s] : cs.window) {
    counts[static_cast<int>(t)] += 1;
    wins[static_cast<int>(t)] += s ? 1 : 0;
  }
  for (int i = 0; i < kTaskCount; ++i) {
    if (counts[i] < kCurriculumMinPerType) return;
    if (static_cast<double>(wins[i]) <=
        kCurriculumThreshold * static_cast<double>(counts[i]))
      return;
  }
  cs.level += 1;
  cs.window.clear();
}

Teacher::Teacher(const Vocabulary& vocab, const Grammar& grammar)
    : vocab_(&vocab), grammar_(&grammar) {
  for (int i = 0; i < kTaskCount; ++i) {
    const std::string name = task_name(static_cast<TaskType>(i));
    check(grammar.has_symbol(name), "teacher: grammar lacks templates for '" +
                                        name + "'");
    const int want = static_cast<TaskType>(i) == TaskType::NavBetween ? 2 : 1;
    check(grammar.min_slots(name) == want && grammar.max_slots(name) == want,
          "teacher: '" + name + "' templates must carry exactly " +
              std::to_string(want) + " object slot(s)");
  }
  check(vocab.object_count() >= 2, "teacher: vocabulary needs >= 2 object words");
  check(static_cast<int>(grammar.direction_words().size()) == 4,
        "teacher: vocabulary lacks the four direction words");
}

TaskType Teacher::sample_task(Rng& rng) const {
  return static_cast<TaskType>(rng.below(kTaskCount));
}

TaskType Teacher::sample_task(Rng& rng,
                              const std::vector<TaskType>& filter) const {
  if (filter.empty()) return sample_task(rng);
  return filter[static_cast<std::size_t>(
      rng.below(static_cast<int>(filter.size())))];
}

int Teacher::direction_of_word(int word_id) const {
  // front = north, right = east, behind = south, left = west (allocentric)
  if (word_id == vocab_->id("front")) return 0;
  if (word_id == vocab_->id("right")) return 1;
  if (word_id == vocab_->id("behind")) return 2;
  if (word_id == vocab_->id("left")) return 3;
  throw Error("teacher: not a direction word");
}

int Teacher::word_of_direction(int heading_index) const {
  switch (heading_index) {
    case 0: return vocab_->id("front");
    case 1: return vocab_->id("right");
    case 2: return vocab_->id("behind");
    case 3: return vocab_->id("left");
  }
  throw Error("teacher: bad heading index");
}

PlacementSpec Teacher::scene_spec(TaskType k, const MapConfig& cfg,
                                  Rng& rng) const {
  const int need = k == TaskType::Nav ? 1 : 2;
  check(cfg.n_objects >= need, std::string("teacher: task '") + task_name(k) +
                                   "' needs at least " + std::to_string(need) +
                                   " objects per map");
  check(cfg.n_objects <= vocab_->object_count(),
        "teacher: more objects per map than object classes");

  PlacementSpec spec;
  std::vector<int> pool(static_cast<std::size_t>(vocab_->object_count()));
  for (int i = 0; i < vocab_->object_count(); ++i)
    pool[static_cast<std::size_t>(i)] = i;
  rng.shuffle(pool);
  spec.classes.assign(pool.begin(), pool.begin() + cfg.n_objects);

  switch (k) {
    case TaskType::Nav:
    case TaskType::NavAvoid:
      break;
    case TaskType::NavNear:
      spec.adjacent_a = 0;  // anchor
      spec.adjacent_b = 1;  // its neighbor
      break;
    case TaskType::NavBetween:
      spec.between_a = 0;
      spec.between_b = 1;
      break;
    case TaskType::NavDir:
      spec.dir_anchor = 0;
      spec.dir_target = 1;
      spec.dir = rng.below(4);
      break;
  }
  return spec;
}

Command Teacher::generate_command(const EnvironmentState& s1, TaskType k,
                                  const PlacementSpec& spec, Rng& rng) const {
  (void)s1;  // referents come from the placement roles on this scene
  Command cmd;
  cmd.task = k;
  std::vector<int> obj_words;
  switch (k) {
    case TaskType::Nav:
    case TaskType::NavAvoid:
    case TaskType::NavNear:
    case TaskType::NavDir:
      cmd.referents = {spec.classes[0]};
      obj_words = {vocab_->object_word(spec.classes[0])};
      break;
    case TaskType::NavBetween:
      cmd.referents = {spec.classes[0], spec.classes[1]};
      obj_words = {vocab_->object_word(spec.classes[0]),
                   vocab_->object_word(spec.classes[1])};
      break;
  }
  int dir_word = -1;
  if (k == TaskType::NavDir) {
    cmd.direction = spec.dir;
    dir_word = word_of_direction(spec.dir);
  }
  cmd.tokens = grammar_->sample(task_name(k), obj_words, dir_word, rng);
  return cmd;
}

Command Teacher::parse_command(const std::vector<int>& tokens) const {
  std::vector<std::string> starts;
  for (int i = 0; i < kTaskCount; ++i)
    starts.push_back(task_name(static_cast<TaskType>(i)));
  const auto parsed = grammar_->parse(tokens, starts);
  check(parsed.has_value(), "teacher: sentence does not parse as any task");
  Command cmd;
  cmd.task = task_from_name(parsed->start);
  cmd.tokens = tokens;
  for (int w : parsed->obj_words) cmd.referents.push_back(vocab_->class_of_word(w));
  if (parsed->dir_word >= 0) cmd.direction = direction_of_word(parsed->dir_word);
  check((cmd.task == TaskType::NavDir) == (cmd.direction >= 0),
        "teacher: direction word / task mismatch");
  return cmd;
}

namespace {

Vec2i find_class_cell(const EnvironmentState& s, int cls) {
  for (int y = 0; y < s.y_size; ++y)
    for (int x = 0; x < s.x_size; ++x) {
      const Cell& c = s.cell({x, y});
      if (c.kind == CellKind::Object && c.cls == cls) return {x, y};
    }
  throw Error("teacher: referent class missing from the scene");
}

std::vector<std::pair<Vec2i, int>> all_objects(const EnvironmentState& s) {
  std::vector<std::pair<Vec2i, int>> out;
  for (int y = 0; y < s.y_size; ++y)
    for (int x = 0; x < s.x_size; ++x) {
      const Cell& c = s.cell({x, y});
      if (c.kind == CellKind::Object) out.push_back({{x, y}, c.cls});
    }
  return out;
}

constexpr int kDx[4] = {0, 1, 0, -1};
constexpr int kDy[4] = {-1, 0, 1, 0};

}  // namespace

TargetSpec Teacher::target_spec_core(const EnvironmentState& s, TaskType k,
                                     const std::vector<int>& referents,
                                     int direction) const {
  TargetSpec spec;
  const auto objects = all_objects(s);
  switch (k) {
    case TaskType::Nav:
      spec.success_cells = {find_class_cell(s, referents.at(0))};
      break;
    case TaskType::NavNear: {
      const Vec2i anchor = find_class_cell(s, referents.at(0));
      for (const auto& [cell, cls] : objects) {
        (void)cls;
        const int manhattan =
            std::abs(cell.x - anchor.x) + std::abs(cell.y - anchor.y);
        if (manhattan == 1) spec.success_cells.push_back(cell);
      }
      break;
    }
    case TaskType::NavBetween: {
      const Vec2i a = find_class_cell(s, referents.at(0));
      const Vec2i b = find_class_cell(s, referents.at(1));
      const bool aligned = (a.x == b.x && std::abs(a.y - b.y) == 2) ||
                           (a.y == b.y && std::abs(a.x - b.x) == 2);
      check(aligned, "teacher: anchors are not two cells apart in line");
      const Vec2i mid{(a.x + b.x) / 2, (a.y + b.y) / 2};
      check(s.cell(mid).kind == CellKind::Free,
            "teacher: the middle cell is not free");
      spec.success_cells = {mid};
      spec.occupancy = true;
      break;
    }
    case TaskType::NavAvoid:
      for (const auto& [cell, cls] : objects)
        if (cls != referents.at(0)) spec.success_cells.push_back(cell);
      break;
    case TaskType::NavDir: {
      check(direction >= 0 && direction < 4, "teacher: missing direction");
      const Vec2i anchor = find_class_cell(s, referents.at(0));
      const Vec2i target{anchor.x + kDx[direction], anchor.y + kDy[direction]};
      check(s.in_bounds(target) && s.cell(target).kind == CellKind::Object,
            "teacher: no object in the stated direction of the anchor");
      spec.success_cells = {target};
      break;
    }
  }
  check(!spec.success_cells.empty(), "teacher: empty success set");

  for (const auto& [cell, cls] : objects) {
    const bool on_success = spec.is_success_cell(cell);
    if (!on_success) spec.failure_classes.push_back(cls);
  }
  std::sort(spec.failure_classes.begin(), spec.failure_classes.end());
  return spec;
}

TargetSpec Teacher::target_spec(const EnvironmentState& s1,
                                const Command& cmd) const {
  return target_spec_core(s1, cmd.task, cmd.referents, cmd.direction);
}

JudgeResult Teacher::judge(const StepEvent& ev, const TargetSpec& spec) const {
  JudgeResult r;
  r.reward = kTimePenalty;
  if (ev.kind == StepEventKind::ReachedObject) {
    if (spec.is_success_cell(ev.object_cell)) {
      r.reward += kSuccessReward;
      r.terminal = Terminal::Success;
    } else {
      r.reward += kFailureReward;
      r.terminal = Terminal::Failure;
    }
    return r;
  }
  if (spec.occupancy && spec.is_success_cell(ev.agent_cell)) {
    r.reward += kSuccessReward;
    r.terminal = Terminal::Success;
    return r;
  }
  if (ev.kind == StepEventKind::Timeout) r.terminal = Terminal::Timeout;
  return r;
}

Session Teacher::start_session(const MapConfig& cfg, TaskType k,
                               Rng& rng) const {
  const int max_maps = 50;
  for (int attempt = 0; attempt < max_maps; ++attempt) {
    EnvironmentState state = generate_map(cfg, rng);
    const PlacementSpec spec = scene_spec(k, cfg, rng);
    // referents the command will name, in role order
    std::vector<int> referents{spec.classes[0]};
    if (k == TaskType::NavBetween) referents.push_back(spec.classes[1]);

    auto accept = [&](const EnvironmentState& cand) {
      TargetSpec ts;
      try {
        ts = target_spec_core(cand, k, referents, spec.dir);
      } catch (const Error&) {
        return false;
      }
      const auto reach = reachable_free_cells(cand);
      if (ts.occupancy) {
        const Vec2i mid = ts.success_cells.front();
        if (cand.agent == mid) return false;
        return reach[static_cast<std::size_t>(mid.y * cand.x_size + mid.x)];
      }
      for (const auto& cell : ts.success_cells)
        if (contact_reachable(cand, reach, cell)) return true;
      return false;
    };

    try {
      place_entities(state, spec, rng, accept);
    } catch (const PlacementFailure&) {
      continue;  // regenerate the map
    }
    Session session;
    session.env = std::move(state);
    session.command = generate_command(session.env, k, spec, rng);
    session.target = target_spec(session.env, session.command);
    return session;
  }
  throw Error(std::string("teacher: could not stage task '") + task_name(k) +
              "' on this map configuration");
}

Session Teacher::start_session(const MapConfig& cfg, Rng& rng) const {
  return start_session(cfg, sample_task(rng), rng);
}

Action oracle_policy_action(const EnvironmentState& state,
                            const TargetSpec& target) {
  // contact goals: bump immediately when standing next to a success object
  if (!target.occupancy) {
    for (int d = 0; d < 4; ++d) {
      const Vec2i n{state.agent.x + kDx[d], state.agent.y + kDy[d]};
      if (state.in_bounds(n) && target.is_success_cell(n)) {
        const Vec2i f = heading_vec(state.heading);
        const Vec2i r = heading_vec(turn_right_of(state.heading));
        const Vec2i delta{n.x - state.agent.x, n.y - state.agent.y};
        if (delta == f) return Action::MoveForward;
        if (delta == Vec2i{-f.x, -f.y}) return Action::MoveBackward;
        if (delta == r) return Action::MoveRight;
        return Action::MoveLeft;
      }
    }
  }
  // BFS over free cells toward the nearest goal cell
  std::vector<Vec2i> goals;
  if (target.occupancy) {
    goals = target.success_cells;
  } else {
    for (const auto& s : target.success_cells)
      for (int d = 0; d < 4; ++d) {
        const Vec2i n{s.x + kDx[d], s.y + kDy[d]};
        if (state.is_free(n)) goals.push_back(n);
      }
  }
  const int total = state.x_size * state.y_size;
  std::vector<int> parent(static_cast<std::size_t>(total), -2);
  std::vector<int> queue;
  const int start = state.agent.y * state.x_size + state.agent.x;
  parent[static_cast<std::size_t>(start)] = -1;
  queue.push_back(start);
  int goal_idx = -1;
  for (std::size_t qi = 0; qi < queue.size() && goal_idx < 0; ++qi) {
    const int cur = queue[qi];
    const Vec2i p{cur % state.x_size, cur / state.x_size};
    for (const auto& gcell : goals)
      if (gcell == p) goal_idx = cur;
    if (goal_idx >= 0) break;
    for (int d = 0; d < 4; ++d) {
      const Vec2i n{p.x + kDx[d], p.y + kDy[d]};
      if (!state.is_free(n)) continue;
      const int ni = n.y * state.x_size + n.x;
      if (parent[static_cast<std::size_t>(ni)] == -2) {
        parent[static_cast<std::size_t>(ni)] = cur;
        queue.push_back(ni);
      }
    }
  }
  check(goal_idx >= 0, "oracle policy: goal unreachable");
  int cur = goal_idx;
  while (parent[static_cast<std::size_t>(cur)] != start &&
         parent[static_cast<std::size_t>(cur)] != -1)
    cur = parent[static_cast<std::size_t>(cur)];
  check(cur != start, "oracle policy: already at the goal cell");
  const Vec2i next{cur % state.x_size, cur / state.x_size};
  const Vec2i f = heading_vec(state.heading);
  const Vec2i r = heading_vec(turn_right_of(state.heading));
  const Vec2i delta{next.x - state.agent.x, next.y - state.agent.y};
  if (delta == f) return Action::MoveForward;
  if (delta == Vec2i{-f.x, -f.y}) return Action::MoveBackward;
  if (delta == r) return Action::MoveRight;
  return Action::MoveLeft;
}

Command Teacher::sample_reference_command(Rng& rng) const {
  const TaskType k = sample_task(rng);
  std::vector<int> pool(static_cast<std::size_t>(vocab_->object_count()));
  for (int i = 0; i < vocab_->object_count(); ++i)
    pool[static_cast<std::size_t>(i)] = i;
  rng.shuffle(pool);
  Command cmd;
  cmd.task = k;
  std::vector<int> obj_words;
  const int n_ref = k == TaskType::NavBetween ? 2 : 1;
  for (int i = 0; i < n_ref; ++i) {
    cmd.referents.push_back(pool[static_cast<std::size_t>(i)]);
    obj_words.push_back(vocab_->object_word(pool[static_cast<std::size_t>(i)]));
  }
  int dir_word = -1;
  if (k == TaskType::NavDir) {
    cmd.direction = rng.below(4);
    dir_word = word_of_direction(cmd.direction);
  }
  cmd.tokens = grammar_->sample(task_name(k), obj_words, dir_word, rng);
  return cmd;
}

}  // namespace xgft
