// scoopsim command line: catalog checks, dataset generation, training,
// experiment runs and record replay.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "scoopsim/bench.hpp"
#include "scoopsim/errors.hpp"
#include "scoopsim/learning.hpp"
#include "scoopsim/primitive.hpp"
#include "scoopsim/worldmodel.hpp"

namespace fs = std::filesystem;
using namespace scoopsim;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kDataMissing = 3;
constexpr int kPhysicsFault = 4;

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::SchemaViolation:
    case ErrorKind::NonConvexPolygon:
    case ErrorKind::UnknownClass:
    case ErrorKind::UnknownItem:
    case ErrorKind::EmptyCatalog:
    case ErrorKind::InvalidAlpha:
    case ErrorKind::InvalidPhase:
      return kConfigError;
    case ErrorKind::MissingFile:
    case ErrorKind::ModelMissing:
    case ErrorKind::InvalidDataset:
    case ErrorKind::ShapeMismatch:
    case ErrorKind::NormNotFitted:
    case ErrorKind::EmptySet:
    case ErrorKind::NoBreakObserved:
    case ErrorKind::DivergedLoss:
    case ErrorKind::IncompleteRecord:
      return kDataMissing;
    case ErrorKind::PhysicsFault:
    case ErrorKind::NumericalBlowup:
    case ErrorKind::OverlapUnresolvable:
    case ErrorKind::NoFoodDetected:
      return kPhysicsFault;
  }
  return 1;
}

std::shared_ptr<const Catalog> catalog_from(const std::string& path) {
  return std::make_shared<const Catalog>(
      load_catalog(path.empty() ? default_catalog_path() : fs::path(path)));
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw ScoopError(ErrorKind::MissingFile, "cannot write " + path.string());
  os << text;
}

void print_metrics(const Metrics& m) {
  std::cout << "accuracy " << m.accuracy << " precision " << m.precision << " recall "
            << m.recall << " (tp " << m.tp << " fp " << m.fp << " tn " << m.tn << " fn " << m.fn
            << ")\n";
  for (const auto& [name, cr] : m.per_class) {
    std::cout << "  " << name << ": " << cr.first << "/" << cr.second << "\n";
  }
}

struct CatalogArgs {
  std::string path;
};

struct GenArgs {
  std::string kind;
  std::string out;
  std::uint64_t seed = 0;
  std::string catalog;
  int n_per_class = FragilityOptions{}.n_per_class;
  std::vector<std::string> holdout = FragilityOptions{}.holdout;
  int rollouts = BreakageOptions{}.n_rollouts;
  int window = BreakageOptions{}.window;
  std::string food = BreakageOptions{}.food;
  int augment = 1;
};

struct TrainArgs {
  std::string kind;
  std::string data;
  std::string out;
  std::string model_kind;
  int epochs = 0;
  double threshold = 0.0;
  std::uint64_t seed = 0;
};

struct RunArgs {
  std::string config;
  std::string out;
  bool markdown = false;
  std::string trace_dir;
  std::string svg_dir;
  std::string risk_model;
  std::string failure_model;
};

struct ReplayArgs {
  std::string record;
  std::string svg;
  std::string catalog;
};

int cmd_catalog_validate(const CatalogArgs& a) {
  const Catalog c = load_catalog(a.path);
  std::cout << "ok: " << c.classes.size() << " classes\n";
  return kOk;
}

int cmd_gen_data(const GenArgs& a) {
  auto catalog = catalog_from(a.catalog);
  LabeledSet set;
  if (a.kind == "fragility") {
    FragilityOptions o;
    o.n_per_class = a.n_per_class;
    o.seed = a.seed;
    o.holdout = a.holdout;
    set = generate_fragility_dataset(catalog, o);
  } else {
    BreakageOptions o;
    o.n_rollouts = a.rollouts;
    o.window = a.window;
    o.seed = a.seed;
    o.food = a.food;
    const BreakageDataset d = generate_breakage_dataset(catalog, o);
    std::cout << "max per-tick squeeze increase " << d.max_squeeze_increase << " N\n";
    set = d.set;
  }
  if (a.augment > 1) set = augment(set, a.augment, a.seed);
  save_dataset(set, a.out);
  std::cout << "wrote " << set.size() << " samples (" << set.count(1) << " positive) to "
            << a.out << "\n";
  return kOk;
}

int cmd_train(const TrainArgs& a) {
  const LabeledSet set = load_dataset(a.data);
  TrainConfig cfg = a.kind == "risk" ? TrainConfig::risk_defaults() : TrainConfig::failure_defaults();
  ModelKind kind = a.kind == "risk" ? ModelKind::Linear : ModelKind::OneHiddenLayer;
  if (a.model_kind == "linear") kind = ModelKind::Linear;
  if (a.model_kind == "mlp") kind = ModelKind::OneHiddenLayer;
  if (a.epochs > 0) cfg.epochs = a.epochs;
  if (a.threshold > 0.0) cfg.threshold = a.threshold;
  cfg.seed = a.seed;
  std::vector<double> losses;
  const BinaryClassifier model = train(set, kind, cfg, &losses);
  for (std::size_t e = 0; e < losses.size(); ++e) {
    std::cout << "epoch " << e + 1 << " loss " << losses[e] << "\n";
  }
  std::cout << "training set: ";
  print_metrics(evaluate(model, set));
  if (fs::path(a.out).has_parent_path()) fs::create_directories(fs::path(a.out).parent_path());
  save_model(model, a.out);
  std::cout << "wrote " << a.out << "\n";
  return kOk;
}

int cmd_run(const RunArgs& a) {
  ExperimentConfig config = load_experiment_config(a.config);
  if (!a.risk_model.empty()) config.risk_model = a.risk_model;
  if (!a.failure_model.empty()) config.failure_model = a.failure_model;
  const ModelSet models = load_models(config);
  RunOptions opts;
  opts.trace_dir = a.trace_dir;
  opts.svg_dir = a.svg_dir;
  const ExperimentResult result = run_experiment(config, models, opts);
  write_file(a.out, emit_table(result.rows, TableFormat::Csv));
  if (a.markdown) {
    const std::string md = emit_table(result.rows, TableFormat::Markdown);
    write_file(fs::path(a.out).replace_extension(".md"), md);
    std::cout << md;
  }
  std::cout << "wrote " << a.out << " (" << result.trials.size() << " trials)\n";
  return kOk;
}

int cmd_replay(const ReplayArgs& a) {
  std::ifstream is(a.record);
  if (!is) throw ScoopError(ErrorKind::MissingFile, "cannot read " + a.record);
  const RolloutRecord rec = read_ndjson(is);
  std::shared_ptr<const Catalog> catalog;
  try {
    catalog = catalog_from(a.catalog);
  } catch (const ScoopError&) {
    if (!a.catalog.empty()) throw;
  }
  write_file(a.svg, render_svg(rec, catalog.get()));
  std::cout << "wrote " << a.svg << "\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bimanual scooping simulator"};
  app.require_subcommand(1);

  CatalogArgs cat;
  auto* catalog_cmd = app.add_subcommand("catalog", "Catalog utilities");
  catalog_cmd->require_subcommand(1);
  auto* validate = catalog_cmd->add_subcommand("validate", "Validate a catalog JSON file");
  validate->add_option("path", cat.path, "Catalog file")->required();

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a labeled dataset");
  gen_cmd->add_option("kind", gen.kind, "fragility or breakage")
      ->required()
      ->check(CLI::IsMember({"fragility", "breakage"}));
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--seed", gen.seed, "Seed")->required();
  gen_cmd->add_option("--catalog", gen.catalog, "Catalog file (default: shipped catalog)");
  gen_cmd->add_option("--n-per-class", gen.n_per_class, "Fragility samples per class")
      ->check(CLI::PositiveNumber);
  gen_cmd->add_option("--holdout", gen.holdout, "Fragility classes left out");
  gen_cmd->add_option("--rollouts", gen.rollouts, "Breakage rollouts")->check(CLI::PositiveNumber);
  gen_cmd->add_option("--window", gen.window, "Breakage imminence window in ticks")
      ->check(CLI::NonNegativeNumber);
  gen_cmd->add_option("--food", gen.food, "Breakage food class");
  gen_cmd->add_option("--augment", gen.augment, "Augmentation factor (1 = none)")
      ->check(CLI::PositiveNumber);

  TrainArgs tr;
  auto* train_cmd = app.add_subcommand("train", "Train a classifier");
  train_cmd->add_option("kind", tr.kind, "risk or failure")
      ->required()
      ->check(CLI::IsMember({"risk", "failure"}));
  train_cmd->add_option("--data", tr.data, "Dataset directory")->required();
  train_cmd->add_option("--out", tr.out, "Model file")->required();
  train_cmd->add_option("--model", tr.model_kind, "linear or mlp")
      ->check(CLI::IsMember({"linear", "mlp"}));
  train_cmd->add_option("--epochs", tr.epochs, "Epochs")->check(CLI::PositiveNumber);
  train_cmd->add_option("--threshold", tr.threshold, "Decision threshold")
      ->check(CLI::Range(0.0, 1.0));
  train_cmd->add_option("--seed", tr.seed, "Seed");

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run an experiment");
  run_cmd->add_option("--config", run.config, "Experiment JSON")->required();
  run_cmd->add_option("--out", run.out, "Results CSV")->required();
  run_cmd->add_flag("--markdown", run.markdown, "Also write a markdown table");
  run_cmd->add_option("--trace-dir", run.trace_dir, "Per-trial NDJSON and force traces");
  run_cmd->add_option("--svg-dir", run.svg_dir, "Per-trial SVG drawings");
  run_cmd->add_option("--risk-model", run.risk_model, "Override the config's risk model");
  run_cmd->add_option("--failure-model", run.failure_model, "Override the config's failure model");

  ReplayArgs rep;
  auto* replay_cmd = app.add_subcommand("replay", "Draw a recorded rollout");
  replay_cmd->add_option("record", rep.record, "Rollout NDJSON")->required();
  replay_cmd->add_option("--svg", rep.svg, "Output SVG")->required();
  replay_cmd->add_option("--catalog", rep.catalog, "Catalog for item outlines");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfigError;
  }

  try {
    if (validate->parsed()) return cmd_catalog_validate(cat);
    if (gen_cmd->parsed()) return cmd_gen_data(gen);
    if (train_cmd->parsed()) return cmd_train(tr);
    if (run_cmd->parsed()) return cmd_run(run);
    if (replay_cmd->parsed()) return cmd_replay(rep);
  } catch (const ScoopError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kOk;
}
