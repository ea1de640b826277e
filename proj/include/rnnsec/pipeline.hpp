#pragma once

// Run configuration and the batch commands behind the CLI: generate, train,
// evaluate, crossval, search and benchmark. Needs nlohmann/json and
// OpenSSL's libcrypto in addition to the core headers.

#include <openssl/evp.h>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rnnsec/dataset.hpp"
#include "rnnsec/error.hpp"
#include "rnnsec/evaluation.hpp"
#include "rnnsec/model.hpp"
#include "rnnsec/report.hpp"
#include "rnnsec/search.hpp"
#include "rnnsec/svm.hpp"

namespace rnnsec {

using Json = nlohmann::ordered_json;

enum class ReportFormat { csv, text, both };

inline std::string to_string(ReportFormat f) {
  switch (f) {
    case ReportFormat::csv: return "csv";
    case ReportFormat::text: return "text";
    case ReportFormat::both: return "both";
  }
  return "both";
}

inline ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "text") return ReportFormat::text;
  if (s == "both") return ReportFormat::both;
  throw ConfigError("unknown format '" + std::string(s) + "' (expected csv, text or both)");
}

// Dataset source. Exactly one of: a directory holding train.csv/test.csv, an
// explicit pair of CSV paths, or the synthetic generator (the default).
struct DataConfig {
  std::string dir;
  std::string train_csv;
  std::string test_csv;
  std::size_t samples = 0;        // generator sample count before --scale; 0: schema total
  double train_fraction = 0.0;    // 0: schema train/total, or 0.7 when undeclared
  bool stratified = true;
  std::size_t n_features = 0;     // custom CSV schema
  std::size_t n_classes = 0;
  std::optional<HcrudSpec> generator;  // overrides the built-in rules
  double density = 0.02;          // task1 generator
};

struct RunConfig {
  Task task = Task::task2;
  std::uint64_t seed = 0;
  double scale = 1.0;
  std::size_t jobs = 1;
  std::string out = ".";
  ReportFormat format = ReportFormat::both;
  DataConfig data;
  TopologyConfig topology;
  TrainConfig training;
  SvmConfig svm;
  SearchSpace search;
  Stage stage = Stage::depth;
  std::size_t folds = 10;
  std::string model;  // model file for evaluate; default <out>/model.bin
};

// Recurrent depth of the shipped task profiles.
inline std::size_t profile_depth(Task t) { return t == Task::task1 ? 6 : 3; }

inline RunConfig default_run_config(Task task) {
  RunConfig c;
  c.task = task;
  c.topology.num_recurrent_layers = profile_depth(task);
  return c;
}

// ---------------------------------------------------------------------------
// JSON binding

namespace detail {

template <class T>
T json_get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

template <class T>
void json_read(const Json& j, const char* key, T& out, const std::string& where) {
  if (j.contains(key) && !j.at(key).is_null()) out = json_get<T>(j, key, where);
}

inline void check_keys(const Json& j, std::initializer_list<const char*> keys,
                       const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : keys) known = known || item.key() == k;
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

inline Json rules_to_json(const std::vector<Rule>& rules) {
  Json out = Json::array();
  for (const Rule& r : rules) {
    Json when = Json::array();
    for (const Predicate& p : r.when)
      when.push_back({{"feature", p.feature}, {"op", to_string(p.op)}, {"threshold", p.threshold}});
    out.push_back({{"when", when}, {"label", r.label}});
  }
  return out;
}

inline std::vector<Rule> rules_from_json(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of rules");
  std::vector<Rule> rules;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    check_keys(j[i], {"when", "label"}, at);
    Rule r;
    json_read(j[i], "label", r.label, at);
    if (j[i].contains("when")) {
      const Json& when = j[i]["when"];
      if (!when.is_array()) throw ConfigError(at + ".when: expected an array");
      for (std::size_t k = 0; k < when.size(); ++k) {
        const std::string pat = at + ".when[" + std::to_string(k) + "]";
        check_keys(when[k], {"feature", "op", "threshold"}, pat);
        Predicate p;
        json_read(when[k], "feature", p.feature, pat);
        std::string op = to_string(p.op);
        json_read(when[k], "op", op, pat);
        p.op = parse_comparison(op);
        json_read(when[k], "threshold", p.threshold, pat);
        r.when.push_back(p);
      }
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

inline Json generator_to_json(const HcrudSpec& g) {
  return {{"n_features", g.n_features},
          {"n_classes", g.n_classes},
          {"correlation", g.correlation},
          {"correlated_group", g.correlated_group},
          {"label_noise", g.label_noise},
          {"rules", rules_to_json(g.rules)}};
}

inline HcrudSpec generator_from_json(const Json& j, Task task) {
  const std::string where = "data.generator";
  check_keys(j, {"n_features", "n_classes", "correlation", "correlated_group", "label_noise",
                 "rules"},
             where);
  HcrudSpec g = task == Task::task2 || task == Task::task3 ? default_hcrud_spec(task) : HcrudSpec{};
  g.task = task;
  json_read(j, "n_features", g.n_features, where);
  json_read(j, "n_classes", g.n_classes, where);
  json_read(j, "correlation", g.correlation, where);
  json_read(j, "correlated_group", g.correlated_group, where);
  json_read(j, "label_noise", g.label_noise, where);
  if (j.contains("rules")) g.rules = rules_from_json(j["rules"], where + ".rules");
  return g;
}

}  // namespace detail

inline Json to_json(const RunConfig& c) {
  Json data = Json::object();
  if (!c.data.dir.empty()) data["dir"] = c.data.dir;
  if (!c.data.train_csv.empty()) data["train_csv"] = c.data.train_csv;
  if (!c.data.test_csv.empty()) data["test_csv"] = c.data.test_csv;
  data["samples"] = c.data.samples;
  data["train_fraction"] = c.data.train_fraction;
  data["stratified"] = c.data.stratified;
  if (c.data.n_features) data["n_features"] = c.data.n_features;
  if (c.data.n_classes) data["n_classes"] = c.data.n_classes;
  if (c.data.generator) data["generator"] = detail::generator_to_json(*c.data.generator);
  data["density"] = c.data.density;
  const SearchSpace& s = c.search;
  Json out = {
      {"task", to_string(c.task)},
      {"seed", c.seed},
      {"scale", c.scale},
      {"jobs", c.jobs},
      {"out", c.out},
      {"format", to_string(c.format)},
      {"data", data},
      {"topology",
       {{"layers", c.topology.num_recurrent_layers},
        {"hidden_units", c.topology.hidden_units},
        {"dropout", c.topology.dropout_rate},
        {"batchnorm", c.topology.use_batchnorm},
        {"sequence_mode", to_string(c.topology.sequence_mode)},
        {"head", to_string(c.topology.head)}}},
      {"training",
       {{"learning_rate", c.training.learning_rate},
        {"momentum", c.training.momentum},
        {"epochs", c.training.epochs},
        {"batch_size", c.training.batch_size},
        {"shuffle", c.training.shuffle}}},
      {"svm", {{"lambda", c.svm.lambda}, {"epochs", c.svm.epochs}}},
      {"search",
       {{"stage", to_string(c.stage)},
        {"units", s.units},
        {"learning_rates", s.learning_rates},
        {"depths", s.depths},
        {"trials", s.trials},
        {"units_epochs", s.units_epochs},
        {"lr_epochs", s.lr_epochs},
        {"depth_epochs", s.depth_epochs},
        {"folds", s.folds}}},
      {"crossval", {{"folds", c.folds}}},
  };
  if (!c.model.empty()) out["model"] = c.model;
  return out;
}

// Fields absent from `j` keep their values in `c`. A manifest written by
// `generate` is accepted as a config; its bookkeeping keys are ignored.
inline void apply_json(RunConfig& c, const Json& j) {
  using detail::check_keys;
  using detail::json_read;
  check_keys(j, {"task", "seed", "scale", "jobs", "out", "format", "data", "topology", "training",
                 "svm", "search", "crossval", "model", "files", "rows"},
             "config");
  if (j.contains("task")) {
    const Task task = parse_task(detail::json_get<std::string>(j, "task", "config"));
    if (task != c.task) {
      // A task switch also switches the profile defaults.
      RunConfig fresh = default_run_config(task);
      fresh.seed = c.seed;
      fresh.scale = c.scale;
      fresh.jobs = c.jobs;
      fresh.out = c.out;
      fresh.format = c.format;
      c = fresh;
    }
  }
  json_read(j, "seed", c.seed, "config");
  json_read(j, "scale", c.scale, "config");
  json_read(j, "jobs", c.jobs, "config");
  json_read(j, "out", c.out, "config");
  json_read(j, "model", c.model, "config");
  if (j.contains("format"))
    c.format = parse_report_format(detail::json_get<std::string>(j, "format", "config"));

  if (j.contains("data")) {
    const Json& d = j["data"];
    check_keys(d, {"dir", "train_csv", "test_csv", "samples", "train_fraction", "stratified",
                   "n_features", "n_classes", "generator", "density"},
               "data");
    json_read(d, "dir", c.data.dir, "data");
    json_read(d, "train_csv", c.data.train_csv, "data");
    json_read(d, "test_csv", c.data.test_csv, "data");
    json_read(d, "samples", c.data.samples, "data");
    json_read(d, "train_fraction", c.data.train_fraction, "data");
    json_read(d, "stratified", c.data.stratified, "data");
    json_read(d, "n_features", c.data.n_features, "data");
    json_read(d, "n_classes", c.data.n_classes, "data");
    json_read(d, "density", c.data.density, "data");
    if (d.contains("generator")) c.data.generator = detail::generator_from_json(d["generator"], c.task);
  }
  if (j.contains("topology")) {
    const Json& t = j["topology"];
    check_keys(t, {"layers", "hidden_units", "dropout", "batchnorm", "sequence_mode", "head"},
               "topology");
    json_read(t, "layers", c.topology.num_recurrent_layers, "topology");
    json_read(t, "hidden_units", c.topology.hidden_units, "topology");
    json_read(t, "dropout", c.topology.dropout_rate, "topology");
    json_read(t, "batchnorm", c.topology.use_batchnorm, "topology");
    if (t.contains("sequence_mode"))
      c.topology.sequence_mode =
          parse_sequence_mode(detail::json_get<std::string>(t, "sequence_mode", "topology"));
    if (t.contains("head"))
      c.topology.head = parse_head_choice(detail::json_get<std::string>(t, "head", "topology"));
  }
  if (j.contains("training")) {
    const Json& t = j["training"];
    check_keys(t, {"learning_rate", "momentum", "epochs", "batch_size", "shuffle"}, "training");
    json_read(t, "learning_rate", c.training.learning_rate, "training");
    json_read(t, "momentum", c.training.momentum, "training");
    json_read(t, "epochs", c.training.epochs, "training");
    json_read(t, "batch_size", c.training.batch_size, "training");
    json_read(t, "shuffle", c.training.shuffle, "training");
  }
  if (j.contains("svm")) {
    const Json& s = j["svm"];
    check_keys(s, {"lambda", "epochs"}, "svm");
    json_read(s, "lambda", c.svm.lambda, "svm");
    json_read(s, "epochs", c.svm.epochs, "svm");
  }
  if (j.contains("search")) {
    const Json& s = j["search"];
    check_keys(s, {"stage", "units", "learning_rates", "depths", "trials", "units_epochs",
                   "lr_epochs", "depth_epochs", "folds"},
               "search");
    if (s.contains("stage")) c.stage = parse_stage(detail::json_get<std::string>(s, "stage", "search"));
    json_read(s, "units", c.search.units, "search");
    json_read(s, "learning_rates", c.search.learning_rates, "search");
    json_read(s, "depths", c.search.depths, "search");
    json_read(s, "trials", c.search.trials, "search");
    json_read(s, "units_epochs", c.search.units_epochs, "search");
    json_read(s, "lr_epochs", c.search.lr_epochs, "search");
    json_read(s, "depth_epochs", c.search.depth_epochs, "search");
    json_read(s, "folds", c.search.folds, "search");
  }
  if (j.contains("crossval")) {
    check_keys(j["crossval"], {"folds"}, "crossval");
    json_read(j["crossval"], "folds", c.folds, "crossval");
  }
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

// Defaults for the file's task, overlaid with the file.
inline RunConfig load_run_config(const std::string& path) {
  const Json j = read_json_file(path);
  RunConfig c = default_run_config(
      j.contains("task") ? parse_task(detail::json_get<std::string>(j, "task", "config"))
                         : Task::task2);
  apply_json(c, j);
  return c;
}

// ---------------------------------------------------------------------------
// Resolution and validation

// Epoch budgets scale with --scale but never drop below one epoch.
inline std::size_t scaled_epochs(std::size_t epochs, double scale) {
  if (epochs == 0) return 0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(epochs * scale)));
}

inline std::size_t scaled_count(std::size_t n, double scale) {
  return static_cast<std::size_t>(std::llround(static_cast<double>(n) * scale));
}

inline void validate(const RunConfig& c) {
  if (!(c.scale > 0.0) || !std::isfinite(c.scale)) throw ConfigError("scale must be positive");
  if (c.jobs < 1) throw ConfigError("jobs must be at least 1");
  const DataConfig& d = c.data;
  const bool has_dir = !d.dir.empty();
  const bool has_csv = !d.train_csv.empty() || !d.test_csv.empty();
  if (has_dir && has_csv) throw ConfigError("data: give either dir or train_csv/test_csv, not both");
  if ((has_dir || has_csv) && d.generator) {
    throw ConfigError("data: a generator cannot be combined with CSV input");
  }
  if (has_csv && (d.train_csv.empty() || d.test_csv.empty())) {
    throw ConfigError("data: train_csv and test_csv must be given together");
  }
  if (c.task == Task::custom && !has_dir && !has_csv && !d.generator) {
    throw ConfigError("data: the custom task needs a generator or CSV files");
  }
  if (d.train_fraction < 0.0 || d.train_fraction >= 1.0) {
    throw ConfigError("data: train_fraction must lie in (0, 1)");
  }
  validate(c.topology);
  validate(c.search);
  if (c.folds < 2) throw ConfigError("crossval: folds must be at least 2");
  TrainConfig t = c.training;
  t.epochs = scaled_epochs(t.epochs, c.scale);
  validate(t);
}

inline bool uses_csv(const RunConfig& c) {
  return !c.data.dir.empty() || !c.data.train_csv.empty();
}

inline DatasetSchema resolve_schema(const RunConfig& c) {
  DatasetSchema s = DatasetSchema::for_task(c.task);
  if (c.data.generator) {
    s.n_features = c.data.generator->n_features;
    s.n_classes = c.data.generator->n_classes;
  }
  if (c.data.n_features) s.n_features = c.data.n_features;
  if (c.data.n_classes) s.n_classes = c.data.n_classes;
  if (c.task == Task::custom && s.n_classes < 2) {
    throw ConfigError("data: custom CSV input needs n_classes");
  }
  return s;
}

inline double resolve_train_fraction(const RunConfig& c) {
  if (c.data.train_fraction > 0.0) return c.data.train_fraction;
  const DatasetSchema s = DatasetSchema::for_task(c.task);
  if (s.total > 0) return static_cast<double>(s.train) / static_cast<double>(s.total);
  return 0.7;
}

inline std::size_t resolve_samples(const RunConfig& c) {
  std::size_t n = c.data.samples;
  if (n == 0 && c.data.generator) n = c.data.generator->n_samples;
  if (n == 0) n = DatasetSchema::for_task(c.task).total;
  const std::size_t scaled = scaled_count(n, c.scale);
  if (scaled < 4) {
    throw ConfigError("data: " + std::to_string(scaled) + " samples after scaling; need at least 4");
  }
  return scaled;
}

// Seeds for the independent random streams of a run.
inline constexpr std::uint64_t kSplitTag = 0x53504C4954ULL;
inline constexpr std::uint64_t kModelTag = 0x4D4F44454CULL;
inline constexpr std::uint64_t kShuffleTag = 0x5348554646ULL;
inline constexpr std::uint64_t kSvmTag = 0x53564DULL;

inline Dataset generate_dataset(const RunConfig& c) {
  const std::size_t n = resolve_samples(c);
  if (c.task == Task::task1 && !c.data.generator) {
    Dataset ds = synth_apk_features(n, DatasetSchema::for_task(Task::task1).n_features,
                                    c.data.density, c.seed);
    ds.schema = DatasetSchema::for_task(Task::task1);
    return ds;
  }
  HcrudSpec spec = c.data.generator ? *c.data.generator : default_hcrud_spec(c.task);
  spec.task = c.task;
  spec.n_samples = n;
  spec.seed = c.seed;
  Dataset ds = hcrud_generate(spec);
  ds.schema = resolve_schema(c);
  return ds;
}

inline Split generated_split(const RunConfig& c) {
  Dataset ds = generate_dataset(c);
  return split(ds, resolve_train_fraction(c), derive_seed(c.seed, {kSplitTag}),
               c.data.stratified);
}

inline Split load_split(const RunConfig& c) {
  validate(c);
  if (!uses_csv(c)) return generated_split(c);
  const DatasetSchema schema = resolve_schema(c);
  namespace fs = std::filesystem;
  const std::string train_path =
      c.data.dir.empty() ? c.data.train_csv : (fs::path(c.data.dir) / "train.csv").string();
  const std::string test_path =
      c.data.dir.empty() ? c.data.test_csv : (fs::path(c.data.dir) / "test.csv").string();
  Split s{load_csv(train_path, schema), load_csv(test_path, schema)};
  if (s.train.x.cols() != s.test.x.cols()) {
    throw DataError("train has " + std::to_string(s.train.x.cols()) + " features but test has " +
                    std::to_string(s.test.x.cols()));
  }
  return s;
}

inline TrainConfig resolve_training(const RunConfig& c) {
  TrainConfig t = c.training;
  t.epochs = scaled_epochs(t.epochs, c.scale);
  t.seed = derive_seed(c.seed, {kShuffleTag});
  return t;
}

inline SvmConfig resolve_svm(const RunConfig& c) {
  SvmConfig s = c.svm;
  s.epochs = scaled_epochs(s.epochs, c.scale);
  s.seed = derive_seed(c.seed, {kSvmTag});
  return s;
}

inline SearchSpace resolve_search(const RunConfig& c) {
  SearchSpace s = c.search;
  s.units_epochs = scaled_epochs(s.units_epochs, c.scale);
  s.lr_epochs = scaled_epochs(s.lr_epochs, c.scale);
  s.depth_epochs = scaled_epochs(s.depth_epochs, c.scale);
  return s;
}

// ---------------------------------------------------------------------------
// Files

inline std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  std::ostringstream out;
  for (unsigned int i = 0; i < len; ++i)
    out << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return out.str();
}

inline std::string read_file_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline std::string sha256_file(const std::string& path) { return sha256_hex(read_file_bytes(path)); }

inline std::filesystem::path prepare_out_dir(const RunConfig& c) {
  std::filesystem::path dir(c.out.empty() ? "." : c.out);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw DataError("cannot create output directory '" + dir.string() + "'");
  }
  return dir;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

template <class Fn>
void write_stream_file(const std::filesystem::path& path, Fn&& fn) {
  std::ostringstream buf;
  fn(buf);
  write_text_file(path, buf.str());
}

inline bool wants_csv(ReportFormat f) { return f != ReportFormat::text; }
inline bool wants_text(ReportFormat f) { return f != ReportFormat::csv; }

// Re-throws a library error with the failing step prepended, keeping its type.
template <class Fn>
auto run_step(const std::string& step, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const TrainingError& e) {
    throw TrainingError(step + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(step + ": " + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(step + ": " + e.what());
  } catch (const ShapeError& e) {
    throw ShapeError(step + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ArgumentError(step + ": " + e.what());
  } catch (const UsageError& e) {
    throw UsageError(step + ": " + e.what());
  } catch (const Error& e) {
    throw Error(step + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Commands

struct GeneratedFile {
  std::string name;
  std::size_t rows = 0;
  std::string sha256;
};

struct GenerateResult {
  std::vector<GeneratedFile> files;  // train.csv, test.csv
};

// Writes train.csv, test.csv and manifest.json. The manifest is the config
// (minus out and jobs) plus row counts and digests and can be passed back
// with --config.
inline GenerateResult cmd_generate(const RunConfig& c) {
  validate(c);
  if (uses_csv(c)) throw ConfigError("generate: data source must be a generator, not CSV files");
  const auto dir = prepare_out_dir(c);
  Split s = run_step("generate", [&] { return generated_split(c); });
  GenerateResult result;
  Json files = Json::object();
  for (auto [name, ds] : {std::pair<const char*, const Dataset*>{"train.csv", &s.train},
                          std::pair<const char*, const Dataset*>{"test.csv", &s.test}}) {
    std::ostringstream buf;
    write_csv(buf, *ds);
    const std::string bytes = buf.str();
    write_text_file(dir / name, bytes);
    GeneratedFile f{name, ds->size(), sha256_hex(bytes)};
    files[name] = {{"rows", f.rows}, {"sha256", f.sha256}};
    result.files.push_back(std::move(f));
  }
  Json manifest = to_json(c);
  // where and how parallel the run was do not affect the data
  manifest.erase("out");
  manifest.erase("jobs");
  manifest["rows"] = {{"total", s.train.size() + s.test.size()},
                      {"train", s.train.size()},
                      {"test", s.test.size()}};
  manifest["files"] = files;
  write_text_file(dir / "manifest.json", manifest.dump(2) + "\n");
  return result;
}

struct TrainOutcome {
  Model model;
  TrainHistory history;
};

inline Model build_run_model(const RunConfig& c, const Dataset& train_set) {
  return build_model(c.topology, train_set.x.cols(), train_set.schema.n_classes,
                     derive_seed(c.seed, {kModelTag}));
}

// Trains on the train split; writes model.bin and history.csv.
inline TrainOutcome cmd_train(const RunConfig& c) {
  validate(c);
  const auto dir = prepare_out_dir(c);
  Split s = run_step("load data", [&] { return load_split(c); });
  TrainOutcome out{run_step("build model", [&] { return build_run_model(c, s.train); }), {}};
  out.history = run_step("train", [&] { return train(out.model, s.train, resolve_training(c)); });
  save_model((dir / "model.bin").string(), out.model);
  write_stream_file(dir / "history.csv", [&](std::ostream& o) { write_history_csv(o, out.history); });
  return out;
}

// Scores a saved model on the test split; writes metrics.csv / metrics.txt.
inline MetricsReport cmd_evaluate(const RunConfig& c) {
  validate(c);
  const auto dir = prepare_out_dir(c);
  const std::string path = c.model.empty() ? (dir / "model.bin").string() : c.model;
  Model model = run_step("load model", [&] { return load_model(path); });
  Split s = run_step("load data", [&] { return load_split(c); });
  if (s.test.x.cols() != model.input_dim || s.test.schema.n_classes != model.num_classes) {
    throw DataError("evaluate: model expects " + std::to_string(model.input_dim) + " features and " +
                    std::to_string(model.num_classes) + " classes, test data has " +
                    std::to_string(s.test.x.cols()) + " and " +
                    std::to_string(s.test.schema.n_classes));
  }
  MetricsReport m = run_step("evaluate", [&] { return evaluate_model(model, s.test); });
  BenchmarkReport r{{benchmark_row(depth_label(model.topology.num_recurrent_layers),
                                   task_title(c.task), m)}};
  if (wants_csv(c.format))
    write_stream_file(dir / "metrics.csv", [&](std::ostream& o) { write_benchmark_csv(o, r); });
  if (wants_text(c.format)) write_text_file(dir / "metrics.txt", benchmark_text(r));
  return m;
}

// k-fold cross-validation on the train split; writes crossval.csv/.txt.
inline CrossValidationResult cmd_crossval(const RunConfig& c) {
  validate(c);
  const auto dir = prepare_out_dir(c);
  Split s = run_step("load data", [&] { return load_split(c); });
  TrainConfig t = resolve_training(c);
  t.seed = c.seed;
  CrossValidationResult cv =
      run_step("crossval", [&] { return cross_validate(c.topology, s.train, t, c.folds, c.jobs); });
  if (wants_csv(c.format))
    write_stream_file(dir / "crossval.csv", [&](std::ostream& o) { write_crossval_csv(o, cv); });
  if (wants_text(c.format)) write_text_file(dir / "crossval.txt", crossval_text(cv));
  return cv;
}

// One search stage over the train split; writes search_<stage>.csv/.txt.
inline SearchResult cmd_search(const RunConfig& c, Stage stage, const SearchOptions& extra = {}) {
  validate(c);
  const auto dir = prepare_out_dir(c);
  Split s = run_step("load data", [&] { return load_split(c); });
  const SearchSpace space = resolve_search(c);
  TrainConfig base = c.training;
  base.seed = c.seed;
  SearchOptions opts = extra;
  opts.jobs = c.jobs;
  SearchResult r = run_step(to_string(stage) + " search", [&] {
    switch (stage) {
      case Stage::units: return search_units(space, s.train, c.topology, base, opts);
      case Stage::lr: return search_lr(space, s.train, c.topology, base, opts);
      case Stage::depth: break;
    }
    return search_depth(space, s.train, c.topology, base, opts);
  });
  const std::string stem = "search_" + to_string(stage);
  if (wants_csv(c.format))
    write_stream_file(dir / (stem + ".csv"), [&](std::ostream& o) { write_search_csv(o, r); });
  if (wants_text(c.format)) write_text_file(dir / (stem + ".txt"), search_text(r));
  return r;
}

// SVM and RNN trained on the train split and scored on the test split;
// writes benchmark.csv / benchmark.txt.
inline BenchmarkReport cmd_benchmark(const RunConfig& c) {
  validate(c);
  const auto dir = prepare_out_dir(c);
  Split s = run_step("load data", [&] { return load_split(c); });
  const std::string task = task_title(c.task);
  const std::size_t k = s.train.schema.n_classes;
  BenchmarkReport report;

  SvmParams svm = run_step("train SVM", [&] { return svm_train(s.train, resolve_svm(c), c.jobs); });
  MetricsReport svm_m = run_step("evaluate SVM", [&] {
    return metrics(confusion(svm_predict(svm, s.test.x), s.test.y, k));
  });
  report.rows.push_back(benchmark_row("SVM", task, svm_m));

  Model model = run_step("build RNN", [&] { return build_run_model(c, s.train); });
  run_step("train RNN", [&] { return train(model, s.train, resolve_training(c)); });
  MetricsReport rnn_m = run_step("evaluate RNN", [&] { return evaluate_model(model, s.test); });
  report.rows.push_back(benchmark_row(depth_label(c.topology.num_recurrent_layers), task, rnn_m));

  if (wants_csv(c.format))
    write_stream_file(dir / "benchmark.csv", [&](std::ostream& o) { write_benchmark_csv(o, report); });
  if (wants_text(c.format)) write_text_file(dir / "benchmark.txt", benchmark_text(report));
  return report;
}

}  // namespace rnnsec
