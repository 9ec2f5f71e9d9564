#include "xgft/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <json.hpp>

#include "xgft/image.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace xgft {

namespace {

void reject_unknown_keys(const json& j, const std::vector<std::string>& allowed,
                         const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw Error("config: unknown key '" + key + "' in " + where);
  }
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

const char* event_name(StepEventKind k) {
  switch (k) {
    case StepEventKind::None: return "none";
    case StepEventKind::ReachedObject: return "reached_object";
    case StepEventKind::Blocked: return "blocked";
    case StepEventKind::Timeout: return "timeout";
  }
  return "?";
}

json state_to_json(const EnvironmentState& s) {
  json cells = json::array();
  for (const Cell& c : s.cells)
    cells.push_back({static_cast<int>(c.kind), c.cls, c.yaw, c.scale});
  return json{{"x", s.x_size},
              {"y", s.y_size},
              {"horizon", s.horizon},
              {"t", s.t},
              {"agent", {s.agent.x, s.agent.y}},
              {"heading", static_cast<int>(s.heading)},
              {"cells", cells},
              {"hash", hash_hex(state_hash(s))}};
}

EnvironmentState state_from_json(const json& j) {
  EnvironmentState s;
  s.x_size = j.at("x").get<int>();
  s.y_size = j.at("y").get<int>();
  s.horizon = j.at("horizon").get<int>();
  s.t = j.at("t").get<int>();
  s.agent = {j.at("agent")[0].get<int>(), j.at("agent")[1].get<int>()};
  s.heading = static_cast<Heading>(j.at("heading").get<int>());
  for (const auto& cj : j.at("cells")) {
    Cell c;
    c.kind = static_cast<CellKind>(cj[0].get<int>());
    c.cls = cj[1].get<int>();
    c.yaw = cj[2].get<double>();
    c.scale = cj[3].get<double>();
    s.cells.push_back(c);
  }
  check(static_cast<int>(s.cells.size()) == s.x_size * s.y_size,
        "trace: cell count mismatch");
  return s;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "config: cannot open '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)),
                   std::istreambuf_iterator<char>());
  return from_json_text(text);
}

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(std::string("config: invalid JSON: ") + e.what());
  }
  reject_unknown_keys(j,
                      {"seed", "out_dir", "vocab", "grammar", "agent", "trainer",
                       "curriculum", "task_filter", "eval_sessions",
                       "checkpoint_every"},
                      "the top level");
  ExperimentConfig cfg;
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("out_dir")) cfg.out_dir = j["out_dir"].get<std::string>();
  if (j.contains("vocab")) cfg.vocab_path = j["vocab"].get<std::string>();
  if (j.contains("grammar")) cfg.grammar_path = j["grammar"].get<std::string>();
  if (j.contains("eval_sessions"))
    cfg.eval_sessions = j["eval_sessions"].get<long>();
  if (j.contains("checkpoint_every"))
    cfg.checkpoint_every = j["checkpoint_every"].get<long>();

  if (j.contains("agent")) {
    const json& a = j["agent"];
    reject_unknown_keys(
        a,
        {"profile", "fusion", "channels", "embed_width", "gen_hidden",
         "action_embed", "h_a_width", "h_m_width", "f_width",
         "preprocess_width", "policy_hidden", "value_hidden", "proj_width",
         "cnn"},
        "agent");
    if (a.contains("profile")) {
      const std::string p = a["profile"].get<std::string>();
      if (p == "desk")
        cfg.agent = AgentConfig::desk();
      else if (p == "paper")
        cfg.agent = AgentConfig{};
      else
        throw Error("config: unknown agent profile '" + p + "'");
    }
    auto geti = [&](const char* key, int& dst) {
      if (a.contains(key)) dst = a[key].get<int>();
    };
    if (a.contains("fusion")) cfg.agent.fusion = a["fusion"].get<std::string>();
    geti("channels", cfg.agent.channels);
    geti("embed_width", cfg.agent.embed_width);
    geti("gen_hidden", cfg.agent.gen_hidden);
    geti("action_embed", cfg.agent.action_embed);
    geti("h_a_width", cfg.agent.h_a_width);
    geti("h_m_width", cfg.agent.h_m_width);
    geti("f_width", cfg.agent.f_width);
    geti("preprocess_width", cfg.agent.preprocess_width);
    geti("policy_hidden", cfg.agent.policy_hidden);
    geti("value_hidden", cfg.agent.value_hidden);
    geti("proj_width", cfg.agent.proj_width);
    if (a.contains("cnn")) {
      cfg.agent.cnn.clear();
      for (const auto& row : a["cnn"])
        cfg.agent.cnn.push_back(
            {row[0].get<int>(), row[1].get<int>(), row[2].get<int>()});
    }
  }

  if (j.contains("trainer")) {
    const json& t = j["trainer"];
    reject_unknown_keys(t,
                        {"gamma", "entropy_weight", "value_weight",
                         "learning_rate", "rms_eps", "rms_decay", "momentum",
                         "workers", "batch", "minibatches", "threads"},
                        "trainer");
    auto getd = [&](const char* key, double& dst) {
      if (t.contains(key)) dst = t[key].get<double>();
    };
    getd("gamma", cfg.trainer.gamma);
    getd("entropy_weight", cfg.trainer.entropy_weight);
    getd("value_weight", cfg.trainer.value_weight);
    getd("learning_rate", cfg.trainer.learning_rate);
    getd("rms_eps", cfg.trainer.rms_eps);
    getd("rms_decay", cfg.trainer.rms_decay);
    getd("momentum", cfg.trainer.momentum);
    if (t.contains("workers")) cfg.trainer.n_agent = t["workers"].get<int>();
    if (t.contains("batch")) cfg.trainer.n_batch = t["batch"].get<int>();
    if (t.contains("minibatches"))
      cfg.trainer.minibatches = t["minibatches"].get<long>();
    if (t.contains("threads")) cfg.trainer.threads = t["threads"].get<int>();
  }

  if (j.contains("curriculum")) {
    cfg.curriculum.clear();
    int level = 1;
    for (const auto& row : j["curriculum"]) {
      check(row.is_array() && row.size() == 3,
            "config: curriculum rows are [size, goals, obstacles]");
      cfg.curriculum.push_back({row[0].get<int>(), row[0].get<int>(),
                                row[1].get<int>(), row[2].get<int>(), level});
      ++level;
    }
    check(!cfg.curriculum.empty(), "config: empty curriculum");
  }

  if (j.contains("task_filter")) {
    for (const auto& name : j["task_filter"])
      cfg.task_filter.push_back(task_from_name(name.get<std::string>()));
  }

  cfg.agent.validate();
  cfg.trainer.validate();
  return cfg;
}

std::string ExperimentConfig::resolved_out_dir() const {
  fs::path out(out_dir);
  if (out.is_relative()) {
    if (const char* root = std::getenv("XGFT_OUT_ROOT")) out = fs::path(root) / out;
  }
  return out.string();
}

Harness::Harness(ExperimentConfig cfg)
    : cfg_(std::move(cfg)),
      vocab_(Vocabulary::load(cfg_.vocab_path)),
      grammar_(Grammar::load(cfg_.grammar_path, vocab_)) {
  teacher_ = std::make_unique<Teacher>(vocab_, grammar_);
  check(cfg_.agent.channels <= 0 ||
            vocab_.object_count() >= cfg_.curriculum.back().n_objects,
        "config: vocabulary has fewer object words than objects per map");
}

std::unique_ptr<Trainer> Harness::make_trainer() const {
  return std::make_unique<Trainer>(cfg_.agent, cfg_.trainer, *teacher_,
                                   cfg_.curriculum, cfg_.task_filter, cfg_.seed);
}

std::string metrics_to_json(const MetricsRecord& m) {
  json j;
  j["batch"] = m.batch;
  j["env_steps"] = m.env_steps;
  j["records"] = m.records;
  j["loss"] = m.loss;
  j["policy_loss"] = m.policy_loss;
  j["value_loss"] = m.value_loss;
  j["entropy"] = m.entropy;
  json succ, counts;
  for (int t = 0; t < kTaskCount; ++t) {
    const char* name = task_name(static_cast<TaskType>(t));
    const double rate = m.trailing[static_cast<std::size_t>(t)];
    if (std::isnan(rate))
      succ[name] = nullptr;
    else
      succ[name] = rate;
    counts[name] = m.trailing_counts[static_cast<std::size_t>(t)];
  }
  j["success"] = succ;
  j["window"] = counts;
  json levels;
  for (int lvl : m.worker_levels) {
    const std::string key = std::to_string(lvl);
    levels[key] = (levels.contains(key) ? levels[key].get<int>() : 0) + 1;
  }
  j["levels"] = levels;
  j["skipped"] = m.skipped;
  return j.dump();
}

void Harness::train(long minibatches_override) {
  const std::string out = cfg_.resolved_out_dir();
  fs::create_directories(out);
  std::ofstream metrics(out + "/metrics.jsonl", std::ios::trunc);
  check(metrics.good(), "train: cannot write metrics under '" + out + "'");

  auto trainer = make_trainer();
  const long n = minibatches_override >= 0 ? minibatches_override
                                           : cfg_.trainer.minibatches;
  auto save = [&out](Trainer& t, long batch) {
    char name[64];
    std::snprintf(name, sizeof name, "/ckpt_%06ld.xgft", batch);
    save_checkpoint(out + name, t);
  };
  trainer->run(
      n,
      [&metrics](const MetricsRecord& m) {
        metrics << metrics_to_json(m) << "\n";
      },
      cfg_.checkpoint_every, save);
  save(*trainer, trainer->batch_index());
}

SessionResult Harness::run_session(const AgentNet& net, Session session,
                                   bool greedy, Rng& rng,
                                   const std::string& trace_path) const {
  SessionResult res;
  res.task = session.command.task;
  std::ofstream trace;
  if (!trace_path.empty()) {
    trace.open(trace_path, std::ios::trunc);
    check(trace.good(), "trace: cannot write '" + trace_path + "'");
    json header = state_to_json(session.env);
    header["type"] = "header";
    header["command"] = vocab_.detokenize(session.command.tokens);
    trace << header.dump() << "\n";
  }

  History hist = net.reset_history();
  Graph g(&net.params());
  while (true) {
    g.clear();
    const Observation obs = render(session.env);
    const int fused = net.perceive(g, obs, session.command.tokens);
    auto [pol, next] = net.act_value(g, fused, net.history_nodes(g, hist));
    const int action = greedy ? AgentNet::greedy_action(g.value(pol.pi))
                              : AgentNet::sample_action(g.value(pol.pi), rng);
    next.prev_action = action;
    const StepEvent ev = step(session.env, static_cast<Action>(action));
    const JudgeResult jr = teacher_->judge(ev, session.target);
    hist = net.detach(g, next);
    res.steps += 1;
    res.total_reward += jr.reward;
    if (trace.is_open()) {
      trace << json{{"type", "step"},
                    {"t", session.env.t},
                    {"hash", hash_hex(state_hash(session.env))},
                    {"action", action_name(static_cast<Action>(action))},
                    {"event", event_name(ev.kind)},
                    {"reward", jr.reward}}
                   .dump()
            << "\n";
    }
    if (jr.terminal != Terminal::None) {
      res.terminal = jr.terminal;
      break;
    }
  }
  return res;
}

EvalReport Harness::evaluate(const std::vector<std::string>& checkpoints,
                             long sessions, std::optional<MapConfig> map,
                             const std::string& trace_dir) const {
  check(!checkpoints.empty(), "eval: no checkpoints given");
  EvalReport report;
  report.map = map.value_or(cfg_.curriculum.back());
  report.sessions_per_run = sessions;
  report.greedy = true;
  if (!trace_dir.empty()) fs::create_directories(trace_dir);

  for (std::size_t ci = 0; ci < checkpoints.size(); ++ci) {
    ParameterSet ps(cfg_.seed);
    AgentNet net(ps, cfg_.agent, vocab_.size());
    load_params(checkpoints[ci], ps);

    EvalRun run;
    run.checkpoint = checkpoints[ci];
    Rng rng(fnv1a64(checkpoints[ci]) ^ cfg_.seed ^ 0xea107a7e5eedull);
    for (long s = 0; s < sessions; ++s) {
      const TaskType k = teacher_->sample_task(rng, cfg_.task_filter);
      Session session = teacher_->start_session(report.map, k, rng);
      std::string trace_path;
      if (!trace_dir.empty() && ci == 0 && s < 16) {
        char name[64];
        std::snprintf(name, sizeof name, "/session_%04ld.trace.jsonl", s);
        trace_path = trace_dir + name;
      }
      const SessionResult r =
          run_session(net, std::move(session), true, rng, trace_path);
      TaskStats& st = run.per_task[static_cast<std::size_t>(static_cast<int>(k))];
      st.sessions += 1;
      if (r.terminal == Terminal::Success) st.successes += 1;
    }
    report.runs.push_back(std::move(run));
  }
  return report;
}

std::vector<EvalReport> Harness::generalize(
    const std::vector<std::string>& checkpoints,
    const std::vector<MapConfig>& maps, long sessions) const {
  std::vector<EvalReport> out;
  for (const auto& m : maps) out.push_back(evaluate(checkpoints, sessions, m));
  return out;
}

MapConfig Harness::generalization_map(int size) {
  switch (size) {
    case 9: return {9, 9, 6, 20, 0};
    case 10: return {10, 10, 6, 24, 0};
    case 11: return {11, 11, 8, 28, 0};
  }
  throw Error("generalize: supported map sizes are 9, 10 and 11");
}

std::array<TaskStats, kTaskCount> Harness::random_baseline(
    const MapConfig& map, long sessions, std::uint64_t seed) const {
  std::array<TaskStats, kTaskCount> stats{};
  Rng rng(seed);
  for (long s = 0; s < sessions; ++s) {
    const TaskType k = teacher_->sample_task(rng, cfg_.task_filter);
    Session session = teacher_->start_session(map, k, rng);
    Terminal term = Terminal::None;
    while (term == Terminal::None) {
      const StepEvent ev =
          step(session.env, static_cast<Action>(rng.below(kActionCount)));
      term = teacher_->judge(ev, session.target).terminal;
    }
    TaskStats& st = stats[static_cast<std::size_t>(static_cast<int>(k))];
    st.sessions += 1;
    if (term == Terminal::Success) st.successes += 1;
  }
  return stats;
}

void Harness::analyze(const std::string& checkpoint,
                      const std::string& pairs_file, int refs,
                      const std::string& out_dir) const {
  check(cfg_.agent.gft_steps() > 0,
        "analyze: the configured fusion has no transform matrices");
  check(refs >= 1, "analyze: need at least one reference command");
  ParameterSet ps(cfg_.seed);
  AgentNet net(ps, cfg_.agent, vocab_.size());
  load_params(checkpoint, ps);

  // reference mean per step over sampled commands
  Rng rng(cfg_.seed ^ 0xf16e49417700ull);
  std::vector<Tensor> mean;
  for (int r = 0; r < refs; ++r) {
    const Command cmd = teacher_->sample_reference_command(rng);
    const auto ts = net.gft_transform_values(cmd.tokens);
    if (mean.empty())
      for (const auto& t : ts) mean.push_back(Tensor::zeros(t.shape));
    for (std::size_t j = 0; j < ts.size(); ++j)
      for (std::size_t i = 0; i < ts[j].data.size(); ++i)
        mean[j].data[i] += ts[j].data[i] / refs;
  }

  std::ifstream pf(pairs_file);
  check(pf.good(), "analyze: cannot open '" + pairs_file + "'");
  json pairs = json::parse(pf);
  check(pairs.is_array(), "analyze: the pairs file must be a JSON array");
  fs::create_directories(out_dir);

  int pair_idx = 0;
  for (const auto& pair : pairs) {
    check(pair.is_array() && pair.size() == 2,
          "analyze: each entry must hold two commands");
    for (int side = 0; side < 2; ++side) {
      const std::string sentence = pair[static_cast<std::size_t>(side)].get<std::string>();
      const auto tokens = vocab_.tokenize(sentence);
      const auto ts = net.gft_transform_values(tokens);
      const auto fp = transform_fingerprint(ts, mean);
      for (std::size_t j = 0; j < fp.size(); ++j) {
        char base[96];
        std::snprintf(base, sizeof base, "/pair%02d_cmd%d_t%zu", pair_idx, side, j);
        std::ofstream csv(out_dir + base + ".csv", std::ios::trunc);
        for (int r = 0; r < fp[j].rows(); ++r) {
          for (int c = 0; c < fp[j].cols(); ++c) {
            char num[32];
            std::snprintf(num, sizeof num, "%.17g", fp[j].at(r, c));
            csv << (c ? "," : "") << num;
          }
          csv << "\n";
        }
        write_gray_ppm(out_dir + base + ".ppm", fp[j]);
      }
    }
    ++pair_idx;
  }
}

void Harness::replay(const std::string& trace_file, const std::string& out_dir) {
  std::ifstream in(trace_file);
  check(in.good(), "replay: cannot open '" + trace_file + "'");
  fs::create_directories(out_dir);

  std::string line;
  check(static_cast<bool>(std::getline(in, line)), "replay: empty trace");
  json header = json::parse(line);
  check(header.value("type", "") == "header", "replay: missing header record");
  EnvironmentState state = state_from_json(header);
  check(hash_hex(state_hash(state)) == header.at("hash").get<std::string>(),
        "replay: header hash mismatch (environment drift?)");

  std::ofstream text(out_dir + "/replay.txt", std::ios::trunc);
  int frame = 0;
  auto dump = [&](const EnvironmentState& s) {
    const Observation obs = render(s);
    char name[32];
    std::snprintf(name, sizeof name, "/frame_%04d.ppm", frame);
    write_ppm(out_dir + name, kImageSize, kImageSize, obs.image.data());
    text << "t=" << s.t << "\n" << ascii_map(s) << "\n";
    ++frame;
  };
  dump(state);

  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json rec = json::parse(line);
    check(rec.value("type", "") == "step", "replay: unexpected record type");
    step(state, action_from_name(rec.at("action").get<std::string>()));
    check(hash_hex(state_hash(state)) == rec.at("hash").get<std::string>(),
          "replay: state hash mismatch at t=" + std::to_string(state.t));
    dump(state);
  }
}

double EvalReport::mean_percent(TaskType t) const {
  if (runs.empty()) return 0.0;
  double s = 0;
  for (const auto& r : runs)
    s += r.per_task[static_cast<std::size_t>(static_cast<int>(t))].percent();
  return s / static_cast<double>(runs.size());
}

double EvalReport::stddev_percent(TaskType t) const {
  if (runs.size() < 2) return 0.0;
  const double mean = mean_percent(t);
  double acc = 0;
  for (const auto& r : runs) {
    const double d =
        r.per_task[static_cast<std::size_t>(static_cast<int>(t))].percent() - mean;
    acc += d * d;
  }
  return std::sqrt(acc / static_cast<double>(runs.size()));
}

std::string EvalReport::table() const {
  std::string out = "task       sessions  success%  stddev\n";
  for (int t = 0; t < kTaskCount; ++t) {
    long sess = 0;
    for (const auto& r : runs)
      sess += r.per_task[static_cast<std::size_t>(t)].sessions;
    char line[128];
    std::snprintf(line, sizeof line, "%-10s %8ld  %7.1f  %6.1f\n",
                  task_name(static_cast<TaskType>(t)), sess,
                  mean_percent(static_cast<TaskType>(t)),
                  stddev_percent(static_cast<TaskType>(t)));
    out += line;
  }
  return out;
}

std::string EvalReport::to_json() const {
  json j;
  j["map"] = {{"size", map.x}, {"objects", map.n_objects},
              {"obstacles", map.n_obstacles}};
  j["sessions_per_run"] = sessions_per_run;
  j["greedy"] = greedy;
  json runs_j = json::array();
  for (const auto& r : runs) {
    json rj;
    rj["checkpoint"] = r.checkpoint;
    for (int t = 0; t < kTaskCount; ++t) {
      const auto& st = r.per_task[static_cast<std::size_t>(t)];
      rj[task_name(static_cast<TaskType>(t))] = {{"sessions", st.sessions},
                                                 {"successes", st.successes}};
    }
    runs_j.push_back(rj);
  }
  j["runs"] = runs_j;
  json agg;
  for (int t = 0; t < kTaskCount; ++t) {
    agg[task_name(static_cast<TaskType>(t))] = {
        {"mean", mean_percent(static_cast<TaskType>(t))},
        {"stddev", stddev_percent(static_cast<TaskType>(t))}};
  }
  j["aggregate"] = agg;
  return j.dump(2);
}

std::vector<std::string> expand_checkpoint_glob(const std::string& pattern) {
  const fs::path p(pattern);
  const std::string filename = p.filename().string();
  if (filename.find('*') == std::string::npos) return {pattern};
  const fs::path dir = p.parent_path().empty() ? "." : p.parent_path();
  check(fs::is_directory(dir),
        "glob: directory '" + dir.string() + "' does not exist");

  // '*' matches any run of characters within the filename
  std::function<bool(const char*, const char*)> match = [&](const char* pat,
                                                            const char* s) {
    for (; *pat; ++pat, ++s) {
      if (*pat == '*') {
        while (*pat == '*') ++pat;
        if (!*pat) return true;
        for (; *s; ++s)
          if (match(pat, s)) return true;
        return false;
      }
      if (*s != *pat) return false;
    }
    return *s == '\0';
  };

  std::vector<std::string> out;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string name = entry.path().filename().string();
    if (match(filename.c_str(), name.c_str()))
      out.push_back(entry.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace xgft
