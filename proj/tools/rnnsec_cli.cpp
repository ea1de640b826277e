// rnnsec: generate data, train, evaluate, cross-validate, search and
// benchmark from the command line.

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rnnsec/pipeline.hpp"

namespace {

struct Flags {
  std::string config;
  std::optional<std::string> task;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  std::optional<std::size_t> jobs;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::string> data;
  std::optional<std::string> model;
  std::optional<std::string> stage;
  std::optional<std::size_t> epochs;
  bool print_config = false;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON run configuration (a generate manifest works too)");
  cmd->add_option("--task", f.task, "task1, task2, task3 or custom");
  cmd->add_option("--seed", f.seed, "base seed");
  cmd->add_option("--scale", f.scale, "multiplier for sample counts and epoch budgets");
  cmd->add_option("--jobs", f.jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--format", f.format, "report format: csv, text or both");
  cmd->add_option("--data", f.data, "directory holding train.csv and test.csv");
  cmd->add_option("--epochs", f.epochs, "training epochs before scaling");
  cmd->add_flag("--print-config", f.print_config, "print the resolved configuration and exit");
}

// Flags override the file, the file overrides the defaults.
rnnsec::RunConfig resolve(const Flags& f) {
  using namespace rnnsec;
  RunConfig c = f.config.empty() ? default_run_config(Task::task2) : load_run_config(f.config);
  if (f.task) {
    const Task t = parse_task(*f.task);
    if (t != c.task) apply_json(c, Json{{"task", *f.task}});
  }
  if (f.seed) c.seed = *f.seed;
  if (f.scale) c.scale = *f.scale;
  if (f.jobs) c.jobs = *f.jobs;
  if (f.out) c.out = *f.out;
  if (f.format) c.format = parse_report_format(*f.format);
  if (f.data) {
    c.data.dir = *f.data;
    c.data.train_csv.clear();
    c.data.test_csv.clear();
    c.data.generator.reset();
  }
  if (f.model) c.model = *f.model;
  if (f.stage) c.stage = parse_stage(*f.stage);
  if (f.epochs) c.training.epochs = *f.epochs;
  validate(c);
  return c;
}

void print(const std::string& text) { std::cout << text << std::flush; }

}  // namespace

int main(int argc, char** argv) {
  using namespace rnnsec;
  CLI::App app{"Recurrent network experiments on synthetic security datasets"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("generate", "write train.csv, test.csv and manifest.json");
  auto* tr = app.add_subcommand("train", "train on the train split, write model.bin and history.csv");
  auto* ev = app.add_subcommand("evaluate", "score a saved model on the test split");
  auto* cv = app.add_subcommand("crossval", "k-fold cross-validation on the train split");
  auto* se = app.add_subcommand("search", "run one hyper-parameter search stage");
  auto* be = app.add_subcommand("benchmark", "SVM and RNN on the test split");
  for (auto* cmd : {gen, tr, ev, cv, se, be}) add_common(cmd, f);
  ev->add_option("--model", f.model, "model file (default <out>/model.bin)");
  se->add_option("--stage", f.stage, "units, lr or depth");

  CLI11_PARSE(app, argc, argv);

  try {
    const RunConfig c = resolve(f);
    if (f.print_config) {
      validate(c);
      print(to_json(c).dump(2) + "\n");
      return 0;
    }
    if (gen->parsed()) {
      for (const auto& file : cmd_generate(c).files)
        print(file.name + "  " + std::to_string(file.rows) + " rows  sha256 " + file.sha256 + "\n");
    } else if (tr->parsed()) {
      TrainOutcome out = cmd_train(c);
      if (!out.history.empty()) {
        const EpochStats& last = out.history.back();
        print("epochs " + std::to_string(out.history.size()) + "  loss " +
              format_double(last.loss) + "  accuracy " + format_metric(last.accuracy) + "\n");
      }
    } else if (ev->parsed()) {
      MetricsReport m = cmd_evaluate(c);
      print("accuracy " + format_metric(m.accuracy) + "  precision " + format_metric(m.precision) +
            "  recall " + format_metric(m.recall) + "  f-score " + format_metric(m.f_score) + "\n");
    } else if (cv->parsed()) {
      print(crossval_text(cmd_crossval(c)));
    } else if (se->parsed()) {
      print(search_text(cmd_search(c, c.stage)));
    } else if (be->parsed()) {
      print(benchmark_text(cmd_benchmark(c)));
    }
  } catch (const ConfigError& e) {
    std::cerr << "rnnsec: config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "rnnsec: usage error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "rnnsec: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "rnnsec: unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
