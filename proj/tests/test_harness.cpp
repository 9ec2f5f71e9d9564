#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "xgft/harness.hpp"
#include "xgft/image.hpp"

using namespace xgft;
namespace fs = std::filesystem;

namespace {

std::string data_path(const char* name) {
  return std::string(XGFT_SOURCE_DIR) + "/data/" + name;
}

std::string tmp_dir() {
  static int counter = 0;
  const std::string d =
      (fs::temp_directory_path() / ("xgft_test_" + std::to_string(counter++)))
          .string();
  fs::create_directories(d);
  return d;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

ExperimentConfig toy_config() {
  ExperimentConfig cfg;
  cfg.vocab_path = data_path("vocab.txt");
  cfg.grammar_path = data_path("grammar.txt");
  cfg.agent = AgentConfig::desk();
  cfg.agent.fusion = "gft1";
  cfg.agent.channels = 4;
  cfg.agent.embed_width = 6;
  cfg.agent.gen_hidden = 5;
  cfg.agent.action_embed = 4;
  cfg.agent.h_a_width = 4;
  cfg.agent.h_m_width = 8;
  cfg.agent.f_width = 8;
  cfg.agent.preprocess_width = 6;
  cfg.agent.policy_hidden = 6;
  cfg.agent.value_hidden = 6;
  cfg.agent.proj_width = 6;
  cfg.agent.cnn = {{8, 4, 4}, {4, 2, 4}, {3, 1, 4}};
  cfg.trainer.n_agent = 2;
  cfg.trainer.n_batch = 4;
  cfg.trainer.learning_rate = 1e-3;
  cfg.trainer.verify_snapshots = true;
  cfg.curriculum = {{3, 3, 2, 0, 1}};
  cfg.seed = 9;
  return cfg;
}

}  // namespace

TEST_CASE("config: parsing, defaults, unknown-key rejection") {
  const std::string text = R"({
    "seed": 5,
    "out_dir": "runs/x",
    "vocab": "v.txt",
    "grammar": "g.txt",
    "agent": {"profile": "desk", "fusion": "gft2", "channels": 8,
              "cnn": [[8,4,4],[4,2,8],[3,1,8]]},
    "trainer": {"workers": 4, "batch": 16, "learning_rate": 0.001,
                "minibatches": 100},
    "curriculum": [[3,2,0],[4,2,3]],
    "task_filter": ["nav", "nav_avoid"],
    "eval_sessions": 50,
    "checkpoint_every": 10
  })";
  const ExperimentConfig cfg = ExperimentConfig::from_json_text(text);
  CHECK(cfg.seed == 5);
  CHECK(cfg.agent.fusion == "gft2");
  CHECK(cfg.agent.channels == 8);
  CHECK(cfg.agent.embed_width == 32);  // desk profile default
  CHECK(cfg.trainer.n_agent == 4);
  CHECK(cfg.trainer.minibatches == 100);
  CHECK(cfg.curriculum.size() == 2);
  CHECK(cfg.curriculum[1].x == 4);
  CHECK(cfg.curriculum[1].n_obstacles == 3);
  CHECK(cfg.task_filter ==
        std::vector<TaskType>{TaskType::Nav, TaskType::NavAvoid});

  CHECK_THROWS_AS(ExperimentConfig::from_json_text(R"({"sede": 1})"), Error);
  CHECK_THROWS_AS(
      ExperimentConfig::from_json_text(R"({"agent": {"channles": 4}})"), Error);
  CHECK_THROWS_AS(ExperimentConfig::from_json_text("not json"), Error);
}

TEST_CASE("checkpoint: save/load/save is byte-identical; bad files rejected") {
  const ExperimentConfig cfg = toy_config();
  Harness h(cfg);
  auto t1 = h.make_trainer();
  for (int i = 0; i < 3; ++i) t1->step_minibatch();

  const std::string dir = tmp_dir();
  const std::string p1 = dir + "/a.xgft";
  const std::string p2 = dir + "/b.xgft";
  save_checkpoint(p1, *t1);

  auto t2 = h.make_trainer();
  load_checkpoint(p1, *t2);
  save_checkpoint(p2, *t2);
  CHECK(read_file(p1) == read_file(p2));
  CHECK(t2->batch_index() == 3);

  // tampered magic rejected
  std::string bytes = read_file(p1);
  bytes[0] = 'Y';
  std::ofstream(dir + "/bad.xgft", std::ios::binary) << bytes;
  auto t3 = h.make_trainer();
  CHECK_THROWS_AS(load_checkpoint(dir + "/bad.xgft", *t3), Error);

  // registry mismatch rejected
  ExperimentConfig other = cfg;
  other.agent.channels = 8;
  other.agent.cnn = {{8, 4, 4}, {4, 2, 4}, {3, 1, 8}};
  Harness h2(other);
  auto t4 = h2.make_trainer();
  CHECK_THROWS_AS(load_checkpoint(p1, *t4), Error);
}

TEST_CASE("determinism and resume equivalence at toy scale") {
  const ExperimentConfig cfg = toy_config();
  Harness h(cfg);
  const std::string dir = tmp_dir();

  auto run_full = [&](const std::string& tag) {
    auto t = h.make_trainer();
    std::vector<std::string> lines;
    t->run(
        10,
        [&](const MetricsRecord& m) { lines.push_back(metrics_to_json(m)); }, 5,
        [&](Trainer& tr, long batch) {
          save_checkpoint(dir + "/" + tag + "_" + std::to_string(batch) + ".xgft",
                          tr);
        });
    return lines;
  };

  const auto run_a = run_full("a");
  const auto run_b = run_full("b");
  CHECK(run_a == run_b);
  CHECK(read_file(dir + "/a_5.xgft") == read_file(dir + "/b_5.xgft"));
  CHECK(read_file(dir + "/a_10.xgft") == read_file(dir + "/b_10.xgft"));

  // resume from the mid-run checkpoint and reproduce the tail exactly
  auto resumed = h.make_trainer();
  load_checkpoint(dir + "/a_5.xgft", *resumed);
  std::vector<std::string> tail;
  resumed->run(5, [&](const MetricsRecord& m) {
    tail.push_back(metrics_to_json(m));
  });
  const std::vector<std::string> expect(run_a.begin() + 5, run_a.end());
  CHECK(tail == expect);
  save_checkpoint(dir + "/resumed_10.xgft", *resumed);
  CHECK(read_file(dir + "/resumed_10.xgft") == read_file(dir + "/a_10.xgft"));
}

TEST_CASE("oracle policy reaches level-1 goals; a spinner only times out") {
  const ExperimentConfig cfg = toy_config();
  Harness h(cfg);
  Rng rng(31);
  const MapConfig level1{3, 3, 2, 0, 1};
  for (int rep = 0; rep < 50; ++rep) {
    Session s = h.teacher().start_session(level1, TaskType::Nav, rng);
    Terminal term = Terminal::None;
    int steps = 0;
    while (term == Terminal::None) {
      const Action a = oracle_policy_action(s.env, s.target);
      term = h.teacher().judge(step(s.env, a), s.target).terminal;
      ++steps;
      REQUIRE(steps <= s.env.horizon);
    }
    CHECK(term == Terminal::Success);
  }
  for (int rep = 0; rep < 10; ++rep) {
    Session s = h.teacher().start_session(level1, TaskType::Nav, rng);
    Terminal term = Terminal::None;
    while (term == Terminal::None)
      term = h.teacher().judge(step(s.env, Action::TurnLeft), s.target).terminal;
    CHECK(term == Terminal::Timeout);
  }
}

TEST_CASE("evaluate: counts sum to the request and reports are deterministic") {
  const ExperimentConfig cfg = toy_config();
  Harness h(cfg);
  const std::string dir = tmp_dir();
  auto t = h.make_trainer();
  save_checkpoint(dir + "/ckpt_000000.xgft", *t);

  const MapConfig level1{3, 3, 2, 0, 1};
  const EvalReport r1 =
      h.evaluate({dir + "/ckpt_000000.xgft"}, 30, level1);
  long total = 0;
  for (const auto& st : r1.runs[0].per_task) total += st.sessions;
  CHECK(total == 30);
  const EvalReport r2 = h.evaluate({dir + "/ckpt_000000.xgft"}, 30, level1);
  CHECK(r1.to_json() == r2.to_json());
  CHECK(r1.table().find('.') != std::string::npos);

  // glob expansion picks the file up
  const auto found = expand_checkpoint_glob(dir + "/ckpt_*.xgft");
  REQUIRE(found.size() == 1);
  CHECK(found[0] == dir + "/ckpt_000000.xgft");

  CHECK_THROWS_AS(h.evaluate({dir + "/missing.xgft"}, 5, level1), Error);
}

TEST_CASE("traces replay to identical frames and reject tampering") {
  const ExperimentConfig cfg = toy_config();
  Harness h(cfg);
  const std::string dir = tmp_dir();
  auto t = h.make_trainer();
  save_checkpoint(dir + "/m.xgft", *t);

  ParameterSet ps(cfg.seed);
  AgentNet net(ps, cfg.agent, h.vocab().size());
  load_params(dir + "/m.xgft", ps);
  Rng rng(5);
  Session session = h.teacher().start_session({3, 3, 2, 0, 1}, rng);
  const std::string trace = dir + "/session.trace.jsonl";
  const SessionResult res = h.run_session(net, session, true, rng, trace);

  const std::string out = dir + "/frames";
  Harness::replay(trace, out);
  int frames = 0;
  for (const auto& e : fs::directory_iterator(out))
    if (e.path().extension() == ".ppm") ++frames;
  CHECK(frames == res.steps + 1);

  // corrupt one recorded action: the hash chain must catch it
  std::ifstream in(trace);
  std::string line, all;
  int line_no = 0;
  while (std::getline(in, line)) {
    if (line_no == 1) {
      const auto pos = line.find("\"action\":\"");
      REQUIRE(pos != std::string::npos);
      line.replace(pos, 20, "\"action\":\"turn_left");
    }
    all += line + "\n";
    ++line_no;
  }
  std::ofstream(dir + "/tampered.jsonl") << all;
  CHECK_THROWS_AS(Harness::replay(dir + "/tampered.jsonl", dir + "/frames2"),
                  Error);
}

TEST_CASE("random baseline is deterministic and bounded") {
  const ExperimentConfig cfg = toy_config();
  Harness h(cfg);
  const MapConfig level1{3, 3, 2, 0, 1};
  const auto a = h.random_baseline(level1, 100, 7);
  const auto b = h.random_baseline(level1, 100, 7);
  long total = 0;
  for (int t = 0; t < kTaskCount; ++t) {
    CHECK(a[static_cast<std::size_t>(t)].sessions ==
          b[static_cast<std::size_t>(t)].sessions);
    CHECK(a[static_cast<std::size_t>(t)].successes ==
          b[static_cast<std::size_t>(t)].successes);
    total += a[static_cast<std::size_t>(t)].sessions;
    CHECK(a[static_cast<std::size_t>(t)].percent() >= 0.0);
    CHECK(a[static_cast<std::size_t>(t)].percent() <= 100.0);
  }
  CHECK(total == 100);
}

TEST_CASE("fingerprint export: identical and bag-equivalent commands match") {
  ExperimentConfig cfg = toy_config();
  Harness h(cfg);
  const std::string dir = tmp_dir();
  auto t = h.make_trainer();
  save_checkpoint(dir + "/m.xgft", *t);

  std::ofstream(dir + "/pairs.json")
      << R"([["go to the apple .", "go to the apple ."],
             ["the apple is your destination .", "your apple is the destination ."]])";
  h.analyze(dir + "/m.xgft", dir + "/pairs.json", 16, dir + "/fp");

  CHECK(read_file(dir + "/fp/pair00_cmd0_t0.csv") ==
        read_file(dir + "/fp/pair00_cmd1_t0.csv"));
  // same token multiset => same fingerprints
  CHECK(read_file(dir + "/fp/pair01_cmd0_t0.csv") ==
        read_file(dir + "/fp/pair01_cmd1_t0.csv"));
  CHECK(fs::exists(dir + "/fp/pair00_cmd0_t0.ppm"));

  // non-transform fusions are rejected
  ExperimentConfig plain = toy_config();
  plain.agent.fusion = "film";
  Harness h2(plain);
  auto t2 = h2.make_trainer();
  save_checkpoint(dir + "/film.xgft", *t2);
  CHECK_THROWS_AS(h2.analyze(dir + "/film.xgft", dir + "/pairs.json", 4,
                             dir + "/fp2"),
                  Error);
}

TEST_CASE("generalization maps carry the pinned goal/obstacle counts") {
  const MapConfig m9 = Harness::generalization_map(9);
  CHECK(m9.n_objects == 6);
  CHECK(m9.n_obstacles == 20);
  const MapConfig m10 = Harness::generalization_map(10);
  CHECK(m10.n_objects == 6);
  CHECK(m10.n_obstacles == 24);
  const MapConfig m11 = Harness::generalization_map(11);
  CHECK(m11.n_objects == 8);
  CHECK(m11.n_obstacles == 28);
  CHECK_THROWS_AS(Harness::generalization_map(12), Error);

  // maze soundness holds at the generalization sizes
  Rng rng(3);
  for (int size : {9, 10, 11}) {
    const MapConfig cfg = Harness::generalization_map(size);
    for (int rep = 0; rep < 25; ++rep) {
      const EnvironmentState s = generate_map(cfg, rng);
      int obstacles = 0;
      for (const auto& c : s.cells)
        if (c.kind == CellKind::Obstacle) ++obstacles;
      CHECK(obstacles == cfg.n_obstacles);
    }
  }
}
