#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "xgft/harness.hpp"

using namespace xgft;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> expand_all(const std::vector<std::string>& patterns) {
  std::vector<std::string> out;
  for (const auto& p : patterns)
    for (auto& f : expand_checkpoint_glob(p)) out.push_back(std::move(f));
  check(!out.empty(), "no checkpoints matched");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xgft: language-directed gridworld navigation stack"};
  app.require_subcommand(1);

  std::string config_path, checkpoint, pairs_file, trace_file, trace_dir;
  std::string out_override;
  std::vector<std::string> checkpoint_patterns;
  std::vector<int> sizes{9, 10, 11};
  long sessions = -1;
  long minibatches = -1;
  int refs = 128;
  std::string grammar_path, vocab_path;

  auto* train = app.add_subcommand("train", "run the training loop");
  train->add_option("config", config_path, "experiment config (JSON)")
      ->required();
  train->add_option("--minibatches", minibatches,
                    "override the configured minibatch count");

  auto* eval = app.add_subcommand("eval", "evaluate saved checkpoints");
  eval->add_option("config", config_path)->required();
  eval->add_option("--checkpoints", checkpoint_patterns,
                   "checkpoint files ('*' wildcards allowed)")
      ->required();
  eval->add_option("--sessions", sessions, "sessions per checkpoint");
  eval->add_option("--trace-dir", trace_dir,
                   "record traces for the first sessions of the first run");

  auto* gen = app.add_subcommand("generalize",
                                 "evaluate on larger maps without retraining");
  gen->add_option("config", config_path)->required();
  gen->add_option("--checkpoints", checkpoint_patterns)->required();
  gen->add_option("--sizes", sizes, "map sizes (9, 10 and/or 11)");
  gen->add_option("--sessions", sessions);

  auto* analyze = app.add_subcommand(
      "analyze", "export transform-matrix fingerprints for command pairs");
  analyze->add_option("config", config_path)->required();
  analyze->add_option("--checkpoint", checkpoint)->required();
  analyze->add_option("--pairs", pairs_file, "JSON array of command pairs")
      ->required();
  analyze->add_option("--refs", refs, "reference sample size for the mean");
  analyze->add_option("--out", out_override, "output directory");

  auto* replay = app.add_subcommand("replay", "re-render a recorded episode");
  replay->add_option("trace", trace_file)->required();
  replay->add_option("--out", out_override, "output directory");

  auto* gstats = app.add_subcommand("grammar-stats",
                                    "count the distinct command language");
  gstats->add_option("grammar", grammar_path)->required();
  gstats->add_option("--vocab", vocab_path)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*train) {
      Harness h(ExperimentConfig::from_file(config_path));
      h.train(minibatches);
      std::cout << "metrics and checkpoints under "
                << h.config().resolved_out_dir() << "\n";
    } else if (*eval) {
      Harness h(ExperimentConfig::from_file(config_path));
      const long n = sessions > 0 ? sessions : h.config().eval_sessions;
      const EvalReport report =
          h.evaluate(expand_all(checkpoint_patterns), n, {}, trace_dir);
      std::cout << report.table();
      const std::string out = h.config().resolved_out_dir();
      fs::create_directories(out);
      std::ofstream(out + "/eval_report.json") << report.to_json() << "\n";
      std::cout << "report: " << out << "/eval_report.json\n";
    } else if (*gen) {
      Harness h(ExperimentConfig::from_file(config_path));
      const long n = sessions > 0 ? sessions : h.config().eval_sessions;
      std::vector<MapConfig> maps;
      for (int s : sizes) maps.push_back(Harness::generalization_map(s));
      const auto reports =
          h.generalize(expand_all(checkpoint_patterns), maps, n);
      const std::string out = h.config().resolved_out_dir();
      fs::create_directories(out);
      for (std::size_t i = 0; i < reports.size(); ++i) {
        std::cout << "== " << maps[i].x << "x" << maps[i].y << " ("
                  << maps[i].n_objects << " goals, " << maps[i].n_obstacles
                  << " obstacles) ==\n"
                  << reports[i].table();
        char name[64];
        std::snprintf(name, sizeof name, "/generalize_%d.json", maps[i].x);
        std::ofstream(out + name) << reports[i].to_json() << "\n";
      }
    } else if (*analyze) {
      Harness h(ExperimentConfig::from_file(config_path));
      const std::string out = out_override.empty()
                                  ? h.config().resolved_out_dir() + "/fingerprints"
                                  : out_override;
      h.analyze(checkpoint, pairs_file, refs, out);
      std::cout << "fingerprints under " << out << "\n";
    } else if (*replay) {
      const std::string out = out_override.empty() ? "replay_out" : out_override;
      Harness::replay(trace_file, out);
      std::cout << "frames under " << out << "\n";
    } else if (*gstats) {
      const Vocabulary vocab = Vocabulary::load(vocab_path);
      const Grammar grammar = Grammar::load(grammar_path, vocab);
      long total = 0;
      std::vector<std::string> starts;
      for (int t = 0; t < kTaskCount; ++t) {
        const std::string name = task_name(static_cast<TaskType>(t));
        if (!grammar.has_symbol(name)) continue;
        starts.push_back(name);
        const long n = grammar.count_distinct({name});
        total += n;
        std::printf("%-10s %8ld sentences, length %d..%d\n", name.c_str(), n,
                    grammar.min_length(name), grammar.max_length(name));
      }
      std::printf("distinct over all tasks: %ld\n",
                  grammar.count_distinct(starts));
      (void)total;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
