#pragma once

#include <deque>
#include <string>
#include <vector>

#include "xgft/environment.hpp"
#include "xgft/grammar.hpp"
#include "xgft/rng.hpp"

namespace xgft {

enum class TaskType : int {
  Nav = 0,
  NavNear = 1,
  NavBetween = 2,
  NavAvoid = 3,
  NavDir = 4,
};
constexpr int kTaskCount = 5;
const char* task_name(TaskType t);
TaskType task_from_name(const std::string& name);

struct Command {
  TaskType task = TaskType::Nav;
  std::vector<int> tokens;      // vocabulary word ids
  std::vector<int> referents;   // object class ids in sentence order
  int direction = -1;           // heading index for directional commands
};

struct TargetSpec {
  std::vector<Vec2i> success_cells;
  std::vector<int> failure_classes;
  bool occupancy = false;  // success by standing on the cell, not by contact

  bool is_success_cell(Vec2i p) const {
    for (const auto& c : success_cells)
      if (c == p) return true;
    return false;
  }
};

enum class Terminal : int { None = 0, Success = 1, Failure = 2, Timeout = 3 };

struct JudgeResult {
  double reward = 0.0;
  Terminal terminal = Terminal::None;
};

struct Session {
  EnvironmentState env;
  Command command;
  TargetSpec target;
};

// Appendix-style level table: map size, goal count, obstacle count per level.
std::vector<MapConfig> default_curriculum();

// Sliding window of recent session outcomes; the level advances one step when
// each task type has enough evidence and every per-type rate clears the
// threshold, after which the window resets.
struct CurriculumState {
  int level = 1;
  std::deque<std::pair<TaskType, bool>> window;
};

constexpr double kCurriculumThreshold = 0.7;
constexpr int kCurriculumWindow = 200;
constexpr int kCurriculumMinPerType = 20;

void curriculum_update(CurriculumState& cs, TaskType task, bool success,
                       int max_level);

// Programmatic task source: samples tasks, derives placement constraints,
// produces grammar commands, defines target/failure sets and rewards.
class Teacher {
 public:
  Teacher(const Vocabulary& vocab, const Grammar& grammar);

  TaskType sample_task(Rng& rng) const;
  TaskType sample_task(Rng& rng, const std::vector<TaskType>& filter) const;

  // Picks distinct object classes and geometric roles for the task.
  // Convention: classes[0] is the named referent (target/anchor/avoided);
  // classes[1] is the partner (neighbor, second anchor, or directional
  // target) for tasks that need one.
  PlacementSpec scene_spec(TaskType k, const MapConfig& cfg, Rng& rng) const;

  Command generate_command(const EnvironmentState& s1, TaskType k,
                           const PlacementSpec& spec, Rng& rng) const;

  TargetSpec target_spec(const EnvironmentState& s1, const Command& cmd) const;

  JudgeResult judge(const StepEvent& ev, const TargetSpec& spec) const;

  // Generates map + scene + command with bounded retries (regenerating the
  // map when placement fails).
  Session start_session(const MapConfig& cfg, TaskType k, Rng& rng) const;
  Session start_session(const MapConfig& cfg, Rng& rng) const;

  // Scene-free command with random referents, for reference-statistics use.
  Command sample_reference_command(Rng& rng) const;

  // Re-parse a token sequence back to (task, referents, direction).
  Command parse_command(const std::vector<int>& tokens) const;

  const Vocabulary& vocab() const { return *vocab_; }
  const Grammar& grammar() const { return *grammar_; }

  int direction_of_word(int word_id) const;  // heading index
  int word_of_direction(int heading_index) const;

 private:
  TargetSpec target_spec_core(const EnvironmentState& s, TaskType k,
                              const std::vector<int>& referents,
                              int direction) const;

  const Vocabulary* vocab_;
  const Grammar* grammar_;
};

constexpr double kTimePenalty = -0.01;
constexpr double kSuccessReward = 1.0;
constexpr double kFailureReward = -1.0;

// Shortest-path ground-truth policy: walks the BFS path toward the nearest
// goal (the middle cell itself for occupancy targets, a bump otherwise).
// Translation-only, so it needs no turns.
Action oracle_policy_action(const EnvironmentState& state,
                            const TargetSpec& target);

}  // namespace xgft
