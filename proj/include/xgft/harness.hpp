#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "xgft/checkpoint.hpp"
#include "xgft/trainer.hpp"

namespace xgft {

// Experiment description, read from JSON. Unknown keys are errors. Relative
// paths resolve against the working directory; a relative out_dir resolves
// under $XGFT_OUT_ROOT when that variable is set.
struct ExperimentConfig {
  std::uint64_t seed = 1;
  std::string out_dir = "runs/out";
  std::string vocab_path = "data/vocab.txt";
  std::string grammar_path = "data/grammar.txt";
  AgentConfig agent = AgentConfig::desk();
  TrainerConfig trainer;
  std::vector<MapConfig> curriculum = default_curriculum();
  std::vector<TaskType> task_filter;  // empty = all five tasks
  long eval_sessions = 1000;
  long checkpoint_every = 5000;  // one pass

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);

  std::string resolved_out_dir() const;
};

struct TaskStats {
  long sessions = 0;
  long successes = 0;
  double percent() const {
    return sessions == 0 ? 0.0 : 100.0 * static_cast<double>(successes) /
                                     static_cast<double>(sessions);
  }
};

struct EvalRun {
  std::string checkpoint;
  std::array<TaskStats, kTaskCount> per_task;
};

struct EvalReport {
  MapConfig map;
  long sessions_per_run = 0;
  bool greedy = true;
  std::vector<EvalRun> runs;

  double mean_percent(TaskType t) const;
  double stddev_percent(TaskType t) const;
  std::string table() const;   // one-decimal percentages
  std::string to_json() const;
};

struct SessionResult {
  TaskType task;
  Terminal terminal = Terminal::Timeout;
  int steps = 0;
  double total_reward = 0.0;
};

class Harness {
 public:
  explicit Harness(ExperimentConfig cfg);

  const ExperimentConfig& config() const { return cfg_; }
  const Teacher& teacher() const { return *teacher_; }
  const Vocabulary& vocab() const { return vocab_; }

  std::unique_ptr<Trainer> make_trainer() const;

  // Trains for cfg.trainer.minibatches (or the override), streaming metrics
  // to <out>/metrics.jsonl and checkpoints to <out>/ckpt_NNNNNN.xgft.
  void train(long minibatches_override = -1);

  // Greedy evaluation of saved models over fresh sessions at the given map
  // (defaults to the last curriculum level). The model parameters are never
  // written to.
  EvalReport evaluate(const std::vector<std::string>& checkpoints,
                      long sessions, std::optional<MapConfig> map = {},
                      const std::string& trace_dir = {}) const;

  std::vector<EvalReport> generalize(const std::vector<std::string>& checkpoints,
                                     const std::vector<MapConfig>& maps,
                                     long sessions) const;

  // Uniform-random policy success rate per task on a map configuration; the
  // desk-scale learning criterion is measured against this.
  std::array<TaskStats, kTaskCount> random_baseline(const MapConfig& map,
                                                    long sessions,
                                                    std::uint64_t seed) const;

  // Transform-matrix fingerprints for command pairs (guided fusions only):
  // subtract the mean over `refs` sampled commands, smooth 7x7, export CSV
  // and grayscale PPM per step.
  void analyze(const std::string& checkpoint, const std::string& pairs_file,
               int refs, const std::string& out_dir) const;

  // Re-simulates a recorded trace, verifying state hashes, and dumps one PPM
  // frame per state plus an ASCII rendering.
  static void replay(const std::string& trace_file, const std::string& out_dir);

  // One full session under the given net; greedy or sampled actions.
  SessionResult run_session(const AgentNet& net, Session session, bool greedy,
                            Rng& rng, const std::string& trace_path = {}) const;

  static MapConfig generalization_map(int size);

 private:
  ExperimentConfig cfg_;
  Vocabulary vocab_;
  Grammar grammar_;
  std::unique_ptr<Teacher> teacher_;
};

// Expands a path pattern where the filename component may hold '*' wildcards;
// plain paths pass through. Results are sorted.
std::vector<std::string> expand_checkpoint_glob(const std::string& pattern);

std::string metrics_to_json(const MetricsRecord& m);

}  // namespace xgft
