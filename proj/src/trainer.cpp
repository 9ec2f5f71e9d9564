#include "xgft/trainer.hpp"

#include <cmath>
#include <thread>

namespace xgft {

AdvantageResult compute_advantages(const std::vector<double>& rewards,
                                   const std::vector<double>& values,
                                   const std::vector<bool>& terminals,
                                   double bootstrap, double gamma) {
  const std::size_t n = rewards.size();
  check(values.size() == n && terminals.size() == n,
        "advantages: mismatched record arrays");
  AdvantageResult out;
  out.advantage.assign(n, 0.0);
  out.value_target.assign(n, 0.0);
  double ret = bootstrap;
  for (std::size_t i = n; i-- > 0;) {
    ret = terminals[i] ? rewards[i] : rewards[i] + gamma * ret;
    out.value_target[i] = ret;
    out.advantage[i] = ret - values[i];
  }
  return out;
}

void OptimizerState::init(const ParameterSet& ps) {
  sq_avg.clear();
  velocity.clear();
  for (int i = 0; i < ps.size(); ++i) {
    sq_avg.push_back(Tensor::zeros(ps.at(i).value.shape));
    velocity.push_back(Tensor::zeros(ps.at(i).value.shape));
  }
}

bool rmsprop_update(ParameterSet& ps, OptimizerState& opt,
                    const TrainerConfig& cfg) {
  for (int i = 0; i < ps.size(); ++i)
    if (!ps.at(i).grad.all_finite()) return false;
  for (int i = 0; i < ps.size(); ++i) {
    ParamEntry& p = ps.at(i);
    Tensor& s = opt.sq_avg[static_cast<std::size_t>(i)];
    Tensor& u = opt.velocity[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < p.value.data.size(); ++k) {
      const double g = p.grad.data[k];
      s.data[k] = cfg.rms_decay * s.data[k] + (1.0 - cfg.rms_decay) * g * g;
      u.data[k] = cfg.momentum * u.data[k] +
                  cfg.learning_rate * g / std::sqrt(s.data[k] + cfg.rms_eps);
      p.value.data[k] -= u.data[k];
    }
  }
  return true;
}

Worker::Worker(int index, const AgentNet& net, const Teacher& teacher,
               std::vector<MapConfig> curriculum_table,
               std::vector<TaskType> task_filter, std::uint64_t seed)
    : index_(index),
      net_(&net),
      teacher_(&teacher),
      table_(std::move(curriculum_table)),
      filter_(std::move(task_filter)),
      rng_(seed),
      graph_(&net.params()) {
  check(!table_.empty(), "worker: empty curriculum table");
}

const MapConfig& Worker::level_config() const {
  const int lvl = std::min(curriculum_.level, static_cast<int>(table_.size()));
  return table_[static_cast<std::size_t>(lvl - 1)];
}

void Worker::start_session() {
  const TaskType k = teacher_->sample_task(rng_, filter_);
  session_ = teacher_->start_session(level_config(), k, rng_);
  history_ = net_->reset_history();
  session_active_ = true;
}

void Worker::prime_session() {
  if (!session_active_) start_session();
}

void Worker::run_segment(const TrainerConfig& cfg) {
  graph_.clear();
  records_.clear();
  outcomes_.clear();
  policy_sum_ = value_sum_ = entropy_sum_ = 0.0;
  grad_sink_.assign(static_cast<std::size_t>(net_->params().size()), Tensor());

  if (!session_active_) start_session();
  HistoryNodes hn = net_->history_nodes(graph_, history_);
  bool ended_terminal = false;

  const int seg = cfg.segment_len();
  for (int i = 0; i < seg; ++i) {
    const Observation obs = render(session_.env);
    const int fused = net_->perceive(graph_, obs, session_.command.tokens);
    auto [pol, next] = net_->act_value(graph_, fused, hn);
    int action;
    if (script_pos_ < scripted_.size()) {
      action = scripted_[script_pos_++];
    } else {
      action = AgentNet::sample_action(graph_.value(pol.pi), rng_);
    }
    next.prev_action = action;

    const StepEvent ev = step(session_.env, static_cast<Action>(action));
    const JudgeResult jr = teacher_->judge(ev, session_.target);

    StepRecord rec;
    rec.action = action;
    rec.reward = jr.reward;
    rec.value = graph_.scalar_value(pol.v);
    rec.terminal = jr.terminal != Terminal::None;
    rec.v_node = pol.v;
    rec.pi_node = pol.pi;
    rec.logpi_node = pol.logpi;
    rec.logp_node = graph_.pick(pol.logpi, action);
    records_.push_back(rec);
    hn = next;

    if (rec.terminal) {
      const bool success = jr.terminal == Terminal::Success;
      outcomes_.push_back({session_.command.task, success});
      curriculum_update(curriculum_, session_.command.task, success,
                        static_cast<int>(table_.size()));
      session_active_ = false;
      ended_terminal = true;
      break;
    }
  }

  double bootstrap = 0.0;
  if (!ended_terminal) {
    history_ = net_->detach(graph_, hn);
    // value-only lookahead for the n-step return; its recurrent outputs are
    // discarded, the next segment recomputes them under updated parameters
    const Observation obs = render(session_.env);
    const int fused = net_->perceive(graph_, obs, session_.command.tokens);
    auto [pol, next] = net_->act_value(graph_, fused, hn);
    (void)next;
    bootstrap = graph_.scalar_value(pol.v);
  }

  std::vector<double> rewards, values;
  std::vector<bool> terminals;
  for (const auto& r : records_) {
    rewards.push_back(r.reward);
    values.push_back(r.value);
    terminals.push_back(r.terminal);
  }
  const AdvantageResult adv =
      compute_advantages(rewards, values, terminals, bootstrap, cfg.gamma);

  int loss = -1;
  for (std::size_t t = 0; t < records_.size(); ++t) {
    const StepRecord& r = records_[t];
    const double a = adv.advantage[t];
    const double ret = adv.value_target[t];
    // -log pi(a) * A  (A constant)  +  eta/2 (R - v)^2  -  kappa * H(pi)
    const int pol_term = graph_.scale(r.logp_node, -a);
    const int verr = graph_.add_const(r.v_node, -ret);
    const int val_term =
        graph_.scale(graph_.mul(verr, verr), 0.5 * cfg.value_weight);
    const int ent =
        graph_.scale(graph_.sum(graph_.mul(r.pi_node, r.logpi_node)), -1.0);
    const int ent_term = graph_.scale(ent, -cfg.entropy_weight);
    const int term = graph_.add(graph_.add(pol_term, val_term), ent_term);
    loss = loss < 0 ? term : graph_.add(loss, term);

    policy_sum_ += graph_.scalar_value(pol_term);
    value_sum_ += graph_.scalar_value(val_term);
    entropy_sum_ += graph_.scalar_value(ent);
  }
  if (loss >= 0) graph_.backward(loss, grad_sink_, 1.0);
}

Trainer::Trainer(const AgentConfig& agent_cfg, TrainerConfig cfg,
                 const Teacher& teacher, std::vector<MapConfig> curriculum_table,
                 std::vector<TaskType> task_filter, std::uint64_t seed)
    : ps_(seed), cfg_(std::move(cfg)) {
  cfg_.validate();
  net_ = std::make_unique<AgentNet>(ps_, agent_cfg, teacher.vocab().size());
  opt_.init(ps_);
  for (int i = 0; i < cfg_.n_agent; ++i) {
    const std::uint64_t wseed =
        fnv1a64(&i, sizeof(int), seed ^ 0x517cc1b727220a95ull);
    workers_.push_back(std::make_unique<Worker>(
        i, *net_, teacher, curriculum_table, task_filter, wseed));
  }
}

double Trainer::trailing_rate(TaskType t) const {
  const auto& w = windows_[static_cast<std::size_t>(static_cast<int>(t))];
  if (w.empty()) return std::nan("");
  double s = 0;
  for (bool b : w) s += b ? 1.0 : 0.0;
  return s / static_cast<double>(w.size());
}

void Trainer::reset_all_sessions() {
  for (auto& w : workers_) w->abandon_session();
}

MetricsRecord Trainer::step_minibatch() {
  std::uint64_t before = 0;
  if (cfg_.verify_snapshots) before = ps_.value_checksum();

  const int n_workers = static_cast<int>(workers_.size());
  const int threads = std::max(1, std::min(cfg_.threads, n_workers));
  if (threads == 1) {
    for (auto& w : workers_) w->run_segment(cfg_);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
      pool.emplace_back([&, t]() {
        for (int i = t; i < n_workers; i += threads)
          workers_[static_cast<std::size_t>(i)]->run_segment(cfg_);
      });
    for (auto& th : pool) th.join();
  }

  if (cfg_.verify_snapshots)
    check(ps_.value_checksum() == before,
          "trainer: parameters changed during collection");

  MetricsRecord m;
  m.batch = batch_idx_;
  int total = 0;
  for (const auto& w : workers_) total += w->record_count();
  m.records = total;
  check(total >= 1 && total <= cfg_.n_batch, "trainer: batch size out of range");

  ps_.zero_grads();
  const double scale = 1.0 / static_cast<double>(total);
  for (const auto& w : workers_) {
    const auto& sink = w->grads();
    for (std::size_t p = 0; p < sink.size(); ++p) {
      if (sink[p].empty()) continue;
      Tensor& dst = ps_.at(static_cast<int>(p)).grad;
      for (std::size_t k = 0; k < dst.data.size(); ++k)
        dst.data[k] += sink[p].data[k] * scale;
    }
    m.policy_loss += w->policy_loss_sum() * scale;
    m.value_loss += w->value_loss_sum() * scale;
    m.entropy += w->entropy_sum() * scale;
  }
  m.loss = m.policy_loss + m.value_loss - cfg_.entropy_weight * m.entropy;

  m.skipped = !rmsprop_update(ps_, opt_, cfg_);

  env_steps_ += total;
  for (const auto& w : workers_)
    for (const auto& [task, success] : w->outcomes()) {
      auto& win = windows_[static_cast<std::size_t>(static_cast<int>(task))];
      win.push_back(success);
      while (static_cast<int>(win.size()) > kCurriculumWindow) win.pop_front();
      sessions_ += 1;
    }
  m.env_steps = env_steps_;
  for (int t = 0; t < kTaskCount; ++t) {
    m.trailing[static_cast<std::size_t>(t)] =
        trailing_rate(static_cast<TaskType>(t));
    m.trailing_counts[static_cast<std::size_t>(t)] =
        static_cast<int>(windows_[static_cast<std::size_t>(t)].size());
  }
  for (const auto& w : workers_) m.worker_levels.push_back(w->level());

  batch_idx_ += 1;
  return m;
}

void Trainer::run(long minibatches, const MetricsFn& metrics,
                  long checkpoint_every, const CheckpointFn& save) {
  for (long i = 0; i < minibatches; ++i) {
    const MetricsRecord m = step_minibatch();
    if (metrics) metrics(m);
    if (save && checkpoint_every > 0 && batch_idx_ % checkpoint_every == 0)
      save(*this, batch_idx_);
  }
}

}  // namespace xgft
