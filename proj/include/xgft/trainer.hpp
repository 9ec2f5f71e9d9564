#pragma once

#include <array>
#include <functional>
#include <memory>
#include <vector>

#include "xgft/agent.hpp"
#include "xgft/teacher.hpp"

namespace xgft {

struct TrainerConfig {
  double gamma = 0.99;
  double entropy_weight = 0.05;  // exploration bonus weight
  double value_weight = 1.0;     // value regression weight
  double learning_rate = 1e-5;
  double rms_eps = 0.01;
  double rms_decay = 0.95;
  double momentum = 0.9;
  int n_agent = 32;
  int n_batch = 128;
  long minibatches = 0;
  int threads = 1;
  bool verify_snapshots = false;  // checksum the barrier isolation (tests)

  int segment_len() const {
    check(n_agent >= 1 && n_batch % n_agent == 0,
          "trainer: n_batch must be a multiple of n_agent");
    return n_batch / n_agent;
  }
  void validate() const {
    (void)segment_len();
    check(gamma >= 0.0 && gamma <= 1.0, "trainer: gamma outside [0,1]");
  }
};

struct AdvantageResult {
  std::vector<double> advantage;
  std::vector<double> value_target;
};

// Forward n-step returns truncated at terminals: R_t = r_t for a terminal
// step, otherwise r_t + gamma * R_{t+1}, bootstrapped with `bootstrap` past
// the segment end. The advantage is R_t - v_t and the value target is R_t.
AdvantageResult compute_advantages(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   const std::vector<bool>& terminals,
                                   double bootstrap, double gamma);

struct OptimizerState {
  std::vector<Tensor> sq_avg;    // gradient second-moment moving average
  std::vector<Tensor> velocity;  // momentum buffer

  void init(const ParameterSet& ps);
};

// s <- rho*s + (1-rho)*g^2 ; u <- momentum*u + lr*g/sqrt(s+eps) ; theta -= u.
// Returns false (and changes nothing) when any gradient entry is non-finite.
bool rmsprop_update(ParameterSet& ps, OptimizerState& opt,
                    const TrainerConfig& cfg);

struct StepRecord {
  int action = 0;
  double reward = 0.0;
  double value = 0.0;
  bool terminal = false;
  int v_node = -1;
  int logp_node = -1;   // log pi(action), scalar
  int pi_node = -1;     // full distribution
  int logpi_node = -1;  // full log-distribution
};

// One synchronized agent: owns its environment sessions, curriculum, rng and
// tape. Collects a fixed-length segment per minibatch (shorter when the
// episode ends) and backpropagates its own rollout into a private gradient
// buffer, merged by the trainer at the barrier.
class Worker {
 public:
  Worker(int index, const AgentNet& net, const Teacher& teacher,
         std::vector<MapConfig> curriculum_table,
         std::vector<TaskType> task_filter, std::uint64_t seed);

  void run_segment(const TrainerConfig& cfg);
  void abandon_session() { session_active_ = false; }

  int record_count() const { return static_cast<int>(records_.size()); }
  const std::vector<Tensor>& grads() const { return grad_sink_; }
  const std::vector<std::pair<TaskType, bool>>& outcomes() const {
    return outcomes_;
  }
  double policy_loss_sum() const { return policy_sum_; }
  double value_loss_sum() const { return value_sum_; }
  double entropy_sum() const { return entropy_sum_; }

  int level() const { return curriculum_.level; }
  CurriculumState& curriculum() { return curriculum_; }
  Rng& rng() { return rng_; }
  int index() const { return index_; }

  // test hooks
  void script_actions(std::vector<int> actions) {
    scripted_ = std::move(actions);
    script_pos_ = 0;
  }
  EnvironmentState* session_env() {
    return session_active_ ? &session_.env : nullptr;
  }
  void prime_session();  // start a session eagerly (tests)
  const std::vector<StepRecord>& last_records() const { return records_; }

 private:
  void start_session();
  const MapConfig& level_config() const;

  int index_;
  const AgentNet* net_;
  const Teacher* teacher_;
  std::vector<MapConfig> table_;
  std::vector<TaskType> filter_;
  Rng rng_;
  CurriculumState curriculum_;
  Session session_;
  History history_;
  bool session_active_ = false;
  Graph graph_;
  std::vector<StepRecord> records_;
  std::vector<Tensor> grad_sink_;
  std::vector<std::pair<TaskType, bool>> outcomes_;
  double policy_sum_ = 0, value_sum_ = 0, entropy_sum_ = 0;
  std::vector<int> scripted_;
  std::size_t script_pos_ = 0;
};

struct MetricsRecord {
  long batch = 0;
  long env_steps = 0;
  int records = 0;
  double loss = 0, policy_loss = 0, value_loss = 0, entropy = 0;
  std::array<double, kTaskCount> trailing{};  // NaN while a window is empty
  std::array<int, kTaskCount> trailing_counts{};
  std::vector<int> worker_levels;
  bool skipped = false;
};

// Synchronous advantage actor-critic: all workers advance under one parameter
// snapshot, block at the barrier, then a single writer applies the update.
class Trainer {
 public:
  Trainer(const AgentConfig& agent_cfg, TrainerConfig cfg, const Teacher& teacher,
          std::vector<MapConfig> curriculum_table,
          std::vector<TaskType> task_filter, std::uint64_t seed);

  using MetricsFn = std::function<void(const MetricsRecord&)>;
  using CheckpointFn = std::function<void(Trainer&, long)>;

  // Runs `minibatches` update steps. `save` fires every `checkpoint_every`
  // batches (and resets worker sessions; see write-path notes in the
  // checkpoint module).
  void run(long minibatches, const MetricsFn& metrics = {},
           long checkpoint_every = 0, const CheckpointFn& save = {});

  MetricsRecord step_minibatch();

  ParameterSet& params() { return ps_; }
  const ParameterSet& params() const { return ps_; }
  AgentNet& net() { return *net_; }
  OptimizerState& optimizer() { return opt_; }
  Worker& worker(int i) { return *workers_[static_cast<std::size_t>(i)]; }
  int worker_count() const { return static_cast<int>(workers_.size()); }
  const TrainerConfig& config() const { return cfg_; }

  long batch_index() const { return batch_idx_; }
  long env_steps() const { return env_steps_; }
  long sessions() const { return sessions_; }
  void restore_counters(long batch, long steps, long sessions) {
    batch_idx_ = batch;
    env_steps_ = steps;
    sessions_ = sessions;
  }

  std::deque<bool>& trailing_window(int task) {
    return windows_[static_cast<std::size_t>(task)];
  }
  double trailing_rate(TaskType t) const;

  void reset_all_sessions();

 private:
  ParameterSet ps_;
  std::unique_ptr<AgentNet> net_;
  TrainerConfig cfg_;
  OptimizerState opt_;
  std::vector<std::unique_ptr<Worker>> workers_;
  std::array<std::deque<bool>, kTaskCount> windows_;
  long batch_idx_ = 0;
  long env_steps_ = 0;
  long sessions_ = 0;
};

}  // namespace xgft
