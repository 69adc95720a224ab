#include <omp.h>

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"

#include "icaclf/archive.hpp"
#include "icaclf/cli.hpp"
#include "icaclf/data.hpp"
#include "icaclf/error.hpp"
#include "icaclf/evaluation.hpp"
#include "icaclf/training.hpp"

namespace icaclf::inline ICACLF_ABI {

namespace fs = std::filesystem;

nlohmann::json default_run_config() {
  const SynthConfig synth;
  const SplitConfig split;
  nlohmann::json schemas = nlohmann::json::array();
  for (const auto& s : default_schemas()) schemas.push_back(to_json(s));
  auto synth_json = to_json(synth);
  synth_json.erase("seed");
  return {{"seed", 0},
          {"synth", synth_json},
          {"split",
           {{"n_train_subjects", split.n_train_subjects},
            {"n_val_subjects", split.n_val_subjects},
            {"n_folds", split.n_folds}}},
          {"training",
           {{"models", all_model_ids()},
            {"max_epochs", 50},
            {"jobs", std::max(1, omp_get_num_procs())},
            {"architectures", nlohmann::json::object()}}},
          {"evaluation", {{"schemas", schemas}}}};
}

void apply_override(nlohmann::json& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override must look like key=value: " + assignment);
  const std::string key = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value;
  try {
    value = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error&) {
    value = text;
  }
  nlohmann::json* node = &config;
  std::stringstream path(key);
  std::string part;
  std::vector<std::string> parts;
  while (std::getline(path, part, '.')) {
    if (part.empty()) throw ConfigError("override has an empty key segment: " + key);
    parts.push_back(part);
  }
  for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) throw ConfigError("override path " + key + " runs through a non-object");
    node = &(*node)[parts[i]];
  }
  if (!node->is_object() && !node->is_null()) throw ConfigError("override path " + key + " runs through a non-object");
  (*node)[parts.back()] = value;
}

namespace {

struct Options {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> models;
  std::optional<std::size_t> folds;
  std::vector<std::string> schema_paths;
  std::optional<std::size_t> jobs;
  std::optional<std::size_t> subjects;
  std::optional<std::size_t> components;
  std::vector<std::size_t> grid;
  std::optional<std::size_t> timepoints;
  std::optional<double> artifact_fraction;
  std::optional<double> noise;
  std::optional<std::size_t> max_epochs;
  std::vector<std::string> overrides;
  std::string data;
  std::string archives;
  std::string predictions;
  std::string results;
};

class Runner {
 public:
  Runner(Options opts, std::ostream& out) : opts_(std::move(opts)), out_(out) {}

  nlohmann::json resolve() {
    nlohmann::json config = default_run_config();
    if (!opts_.config_path.empty()) {
      nlohmann::json file;
      try {
        file = nlohmann::json::parse(read_file(opts_.config_path));
      } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config file " + opts_.config_path + " is not valid JSON: " + e.what());
      }
      config.merge_patch(file);
    }
    if (opts_.seed) config["seed"] = *opts_.seed;
    if (!opts_.models.empty()) config["training"]["models"] = opts_.models;
    if (opts_.folds) config["split"]["n_folds"] = *opts_.folds;
    if (opts_.jobs) config["training"]["jobs"] = *opts_.jobs;
    if (opts_.max_epochs) config["training"]["max_epochs"] = *opts_.max_epochs;
    if (opts_.subjects) config["synth"]["n_subjects"] = *opts_.subjects;
    if (opts_.components) config["synth"]["components_per_subject"] = *opts_.components;
    if (!opts_.grid.empty()) config["synth"]["grid"] = opts_.grid;
    if (opts_.timepoints) config["synth"]["timepoints"] = *opts_.timepoints;
    if (opts_.artifact_fraction) config["synth"]["artifact_fraction"] = *opts_.artifact_fraction;
    if (opts_.noise) config["synth"]["noise_level"] = *opts_.noise;
    if (!opts_.schema_paths.empty()) {
      nlohmann::json schemas = nlohmann::json::array();
      for (const auto& path : opts_.schema_paths) {
        nlohmann::json j;
        try {
          j = nlohmann::json::parse(read_file(path));
        } catch (const nlohmann::json::parse_error& e) {
          throw SchemaError("schema file " + path + " is not valid JSON: " + e.what());
        }
        schemas.push_back(to_json(schema_from_json(fs::path(path).stem().string(), j)));
      }
      config["evaluation"]["schemas"] = schemas;
    }
    for (const auto& o : opts_.overrides) apply_override(config, o);
    return config;
  }

  static std::uint64_t seed_of(const nlohmann::json& c) { return c.at("seed").get<std::uint64_t>(); }

  static SynthConfig synth_of(const nlohmann::json& c) {
    auto j = c.at("synth");
    if (!j.contains("seed")) j["seed"] = seed_of(c);
    return synth_config_from_json(j);
  }

  static SplitConfig split_of(const nlohmann::json& c) {
    SplitConfig s;
    const auto& j = c.at("split");
    try {
      s.n_train_subjects = j.value("n_train_subjects", s.n_train_subjects);
      s.n_val_subjects = j.value("n_val_subjects", s.n_val_subjects);
      s.n_folds = j.value("n_folds", s.n_folds);
      s.seed = j.value("seed", seed_of(c));
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed split config: ") + e.what());
    }
    return s;
  }

  static std::vector<std::string> models_of(const nlohmann::json& c) {
    auto ids = c.at("training").at("models").get<std::vector<std::string>>();
    if (ids.empty()) throw ConfigError("no models requested");
    for (const auto& id : ids) canonical_config(id);
    return ids;
  }

  static std::vector<VotingSchema> schemas_of(const nlohmann::json& c) {
    std::vector<VotingSchema> out;
    std::size_t k = 0;
    for (const auto& j : c.at("evaluation").at("schemas")) {
      out.push_back(schema_from_json("schema" + std::to_string(++k), j));
    }
    return out;
  }

  void write_resolved(const fs::path& dir, nlohmann::json config) {
    config["verb"] = verb_;
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [key, value] : {std::pair<const char*, const std::string&>{"data", opts_.data},
                                     {"archives", opts_.archives},
                                     {"predictions", opts_.predictions},
                                     {"results", opts_.results}}) {
      if (!value.empty()) inputs[key] = fs::absolute(value).lexically_normal().string();
    }
    if (!inputs.empty()) config["inputs"] = inputs;
    write_file(dir / "resolved_config.json", config.dump(2) + "\n");
  }

  fs::path require_out() {
    if (opts_.out.empty()) throw ConfigError("--out is required");
    return opts_.out;
  }

  int generate() {
    const auto config = resolve();
    const fs::path out = require_out();
    write_resolved(out, config);
    const auto synth = synth_of(config);
    const auto t0 = std::chrono::steady_clock::now();
    const Dataset dataset = generate_synthetic(synth);
    write_dataset(out / "dataset.icad", dataset);
    out_ << "generated " << dataset.records.size() << " components from " << synth.n_subjects << " subjects in "
         << seconds_since(t0) << " s -> " << (out / "dataset.icad").string() << "\n";
    return 0;
  }

  Dataset load_data(const fs::path& fallback) {
    const fs::path path = opts_.data.empty() ? fallback : fs::path(opts_.data);
    if (path.empty()) throw ConfigError("--data is required");
    return read_dataset(path);
  }

  int train(const Dataset* given = nullptr, std::optional<fs::path> out_dir = {}) {
    const auto config = resolve();
    const fs::path out = out_dir ? *out_dir : require_out();
    write_resolved(out, config);
    Dataset loaded;
    if (!given) loaded = load_data({});
    const Dataset& dataset = given ? *given : loaded;
    CvConfig cv;
    cv.split = split_of(config);
    cv.seed = seed_of(config);
    cv.max_epochs = config.at("training").at("max_epochs").get<std::size_t>();
    cv.jobs = config.at("training").at("jobs").get<std::size_t>();
    cv.architectures = config.at("training").value("architectures", nlohmann::json::object());
    cv.out_dir = out;
    const auto t0 = std::chrono::steady_clock::now();
    cv.on_result = [&](const RunResult& r) {
      out_ << "trained " << r.model_id << " fold " << r.fold_index << ": " << r.stopped_epoch << " epochs, best val acc "
           << r.best_val_accuracy << " at epoch " << r.best_epoch << " (" << seconds_since(t0) << " s)\n";
      out_.flush();
    };
    const auto models = models_of(config);
    const auto results = run_cv(dataset, models, cv);
    out_ << "wrote " << results.size() << " archives and manifest.json to " << out.string() << "\n";
    return 0;
  }

  // The split that trained the archives wins over the local config so the
  // test set cannot drift between verbs.
  SplitConfig split_for(const fs::path& archives, const nlohmann::json& config) {
    const auto manifest_path = archives / "manifest.json";
    if (!fs::exists(manifest_path)) return split_of(config);
    const auto manifest = nlohmann::json::parse(read_file(manifest_path));
    SplitConfig s;
    const auto& j = manifest.at("split");
    s.n_train_subjects = j.at("n_train_subjects").get<std::size_t>();
    s.n_val_subjects = j.at("n_val_subjects").get<std::size_t>();
    s.n_folds = j.at("n_folds").get<std::size_t>();
    s.seed = j.at("seed").get<std::uint64_t>();
    if (opts_.folds && *opts_.folds != s.n_folds) {
      throw ConfigError("archives were trained with " + std::to_string(s.n_folds) + " folds, --folds says " +
                        std::to_string(*opts_.folds));
    }
    return s;
  }

  int evaluate(const Dataset* given = nullptr, std::optional<fs::path> archives_dir = {},
               std::optional<fs::path> out_dir = {}) {
    const auto config = resolve();
    const fs::path out = out_dir ? *out_dir : require_out();
    const auto schemas = schemas_of(config);  // validate before any heavy work
    const fs::path archives = archives_dir ? *archives_dir : fs::path(opts_.archives);
    if (archives.empty()) throw ConfigError("--archives is required");
    write_resolved(out, config);
    Dataset loaded;
    if (!given) loaded = load_data({});
    const Dataset& dataset = given ? *given : loaded;
    const auto split = split_for(archives, config);
    const auto folds = split_folds(dataset, split);
    std::vector<std::string> needed = models_of(config);
    for (const auto& s : schemas)
      for (const auto& [model, w] : s.entries)
        if (std::find(needed.begin(), needed.end(), model) == needed.end()) needed.push_back(model);
    const auto predictions =
        predict_folds(dataset, folds.front().test_records, needed, split.n_folds, directory_archives(archives));
    write_predictions(out / "predictions.csv", predictions);
    const auto results = evaluate_predictions(predictions, schemas);
    write_file(out / "evaluation.json", to_json(results).dump(2) + "\n");
    out_ << "evaluated " << needed.size() << " models and " << schemas.size() << " schemas on "
         << folds.front().test_records.size() << " test components -> " << (out / "evaluation.json").string()
         << "\n";
    return 0;
  }

  int vote() {
    const auto config = resolve();
    const fs::path out = require_out();
    const auto schemas = schemas_of(config);
    if (opts_.predictions.empty()) throw ConfigError("--predictions is required");
    write_resolved(out, config);
    const auto predictions = read_predictions(opts_.predictions);
    const auto results = evaluate_predictions(predictions, schemas);
    write_file(out / "evaluation.json", to_json(results).dump(2) + "\n");
    for (const auto& row : results.schemas) out_ << format_row(row.name, row.mean) << "\n";
    return 0;
  }

  int report(std::optional<fs::path> results_path = {}, std::optional<fs::path> out_dir = {}) {
    const auto config = resolve();
    const fs::path out = out_dir ? *out_dir : require_out();
    const fs::path path = results_path ? *results_path : fs::path(opts_.results);
    if (path.empty()) throw ConfigError("--results is required");
    write_resolved(out, config);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError("results file " + path.string() + " is not valid JSON: " + e.what());
    }
    const auto results = evaluation_results_from_json(j);
    emit_report(results, out);
    out_ << render_table(results);
    return 0;
  }

  int full_run() {
    const auto config = resolve();
    const fs::path out = require_out();
    write_resolved(out, config);
    const auto t0 = std::chrono::steady_clock::now();
    const auto synth = synth_of(config);
    const Dataset dataset = generate_synthetic(synth);
    write_dataset(out / "data" / "dataset.icad", dataset);
    out_ << "generated " << dataset.records.size() << " components (" << seconds_since(t0) << " s)\n";
    train(&dataset, out / "models");
    evaluate(&dataset, out / "models", out / "evaluation");
    report(out / "evaluation" / "evaluation.json", out / "report");
    out_ << "full run finished in " << seconds_since(t0) << " s\n";
    return 0;
  }

  void set_verb(std::string verb) { verb_ = std::move(verb); }

 private:
  static double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::round(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() * 10) / 10;
  }

  Options opts_;
  std::ostream& out_;
  std::string verb_;
};

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"ICA component classifier: synthetic data, training, evaluation and voting"};
  app.name("icaclf");
  app.require_subcommand(1, 1);
  Options o;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "Output directory");
    sub->add_option("--seed", o.seed, "Master seed");
    sub->add_option("--set", o.overrides, "Override a config value, e.g. synth.noise_level=0.8");
  };
  auto add_generator = [&](CLI::App* sub) {
    sub->add_option("--subjects", o.subjects, "Number of subjects")->check(CLI::PositiveNumber);
    sub->add_option("--components", o.components, "Components per subject")->check(CLI::PositiveNumber);
    sub->add_option("--grid", o.grid, "Spatial grid D,H,W")->delimiter(',')->expected(3);
    sub->add_option("--timepoints", o.timepoints, "Timecourse length");
    sub->add_option("--artifact-fraction", o.artifact_fraction, "Probability of an artifact component");
    sub->add_option("--noise", o.noise, "Additive noise level");
  };
  auto add_training = [&](CLI::App* sub) {
    sub->add_option("--models", o.models, "Comma-separated model ids")->delimiter(',');
    sub->add_option("--folds", o.folds, "Number of folds")->check(CLI::PositiveNumber);
    sub->add_option("--jobs", o.jobs, "Parallel training runs")->check(CLI::PositiveNumber);
    sub->add_option("--max-epochs", o.max_epochs, "Epoch cap per run")->check(CLI::PositiveNumber);
  };
  auto add_schema = [&](CLI::App* sub) {
    sub->add_option("--schema", o.schema_paths, "Voting schema JSON file (repeatable)")->check(CLI::ExistingFile);
  };

  auto* generate = app.add_subcommand("generate", "Write a synthetic component dataset");
  add_common(generate);
  add_generator(generate);
  auto* train = app.add_subcommand("train", "Cross-validate models and write archives");
  add_common(train);
  add_training(train);
  train->add_option("--data", o.data, "Dataset file")->required()->check(CLI::ExistingFile);
  auto* evaluate = app.add_subcommand("evaluate", "Score trained archives on the test subjects");
  add_common(evaluate);
  add_schema(evaluate);
  evaluate->add_option("--models", o.models, "Comma-separated model ids")->delimiter(',');
  evaluate->add_option("--folds", o.folds, "Number of folds")->check(CLI::PositiveNumber);
  evaluate->add_option("--data", o.data, "Dataset file")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--archives", o.archives, "Directory written by train")->required()->check(
      CLI::ExistingDirectory);
  auto* vote = app.add_subcommand("vote", "Apply voting schemas to saved predictions");
  add_common(vote);
  add_schema(vote);
  vote->add_option("--predictions", o.predictions, "predictions.csv written by evaluate")->required()->check(
      CLI::ExistingFile);
  auto* report = app.add_subcommand("report", "Render report files from evaluation results");
  add_common(report);
  report->add_option("--results", o.results, "evaluation.json written by evaluate or vote")->required()->check(
      CLI::ExistingFile);
  auto* full = app.add_subcommand("full-run", "Generate, train, evaluate and report in one go");
  add_common(full);
  add_generator(full);
  add_training(full);
  add_schema(full);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n" << "run with --help for usage\n";
    return 2;
  }

  Runner runner(o, out);
  try {
    for (auto* sub : app.get_subcommands()) runner.set_verb(sub->get_name());
    if (generate->parsed()) return runner.generate();
    if (train->parsed()) return runner.train();
    if (evaluate->parsed()) return runner.evaluate();
    if (vote->parsed()) return runner.vote();
    if (report->parsed()) return runner.report();
    if (full->parsed()) return runner.full_run();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace icaclf
