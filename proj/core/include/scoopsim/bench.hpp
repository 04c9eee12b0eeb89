#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "scoopsim/learning.hpp"
#include "scoopsim/policy.hpp"
#include "scoopsim/primitive.hpp"

namespace scoopsim {

enum class OutcomeKind { Success, NotEnter, Roll, Fall, Break };
const char* to_string(OutcomeKind k);

struct Outcome {
  OutcomeKind kind = OutcomeKind::NotEnter;
  double weight_loss_pct = 100.0;
  double realized_alpha = 1.0;
};

struct OutcomeRules {
  double roll_distance = 0.06;    // m past the meeting point
  double success_fraction = 0.9;  // of initial mass in the spoon
};

// Break > Fall > Roll > NotEnter > Success. Throws IncompleteRecord.
Outcome classify_outcome(const RolloutRecord& record, const OutcomeRules& rules = {});

// ---------------------------------------------------------------------------
// Experiment configuration (JSON, unknown keys rejected)

struct SettingConfig {
  std::string name;
  std::vector<ItemRequest> items;
};

struct PolicyConfig {
  std::string label;
  ControllerKind kind = ControllerKind::FixedAlpha;
  double alpha = 1.0;
  std::optional<double> margin;
  StrategyToggles toggles;
};

struct ExperimentConfig {
  std::string name = "experiment";
  int trials = 20;
  std::uint64_t base_seed = 0;
  double placement_jitter = 0.01;
  double property_jitter = 0.1;
  std::filesystem::path catalog;        // empty: shipped catalog
  std::filesystem::path risk_model;     // resolved against the config file
  std::filesystem::path failure_model;
  std::optional<double> risk_threshold;
  std::optional<double> failure_threshold;
  double oracle_margin = 1.0;
  OutcomeRules rules;
  std::vector<SettingConfig> settings;
  std::vector<PolicyConfig> policies;

  bool needs_models() const;
};

// Throws ConfigInvalid. Relative paths resolve against base_dir.
ExperimentConfig parse_experiment_config(const std::string& json_text,
                                         const std::filesystem::path& base_dir = {});
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

struct ModelSet {
  std::shared_ptr<const BinaryClassifier> risk;
  std::shared_ptr<const BinaryClassifier> failure;
};
// Loads the models named by the config when a CARBS policy needs them.
// Throws ModelMissing.
ModelSet load_models(const ExperimentConfig& config);

// ---------------------------------------------------------------------------
// Execution

struct TrialResult {
  std::size_t setting_index = 0;
  std::size_t policy_index = 0;
  std::string setting;
  std::string policy;
  std::uint64_t seed = 0;
  Outcome outcome;
  std::optional<RiskVerdict> verdict;
  bool alpha_meaningful = true;  // false for Single
  RolloutRecord record;
};

struct ResultRow {
  std::string setting;
  std::string policy;
  int trials = 0;
  int successes = 0;
  double weight_loss_pct = 0.0;
  std::optional<double> alpha_mean;
  std::optional<double> alpha_ci95;
  std::map<OutcomeKind, int> outcomes;
};

struct ExperimentResult {
  std::vector<ResultRow> rows;
  std::vector<TrialResult> trials;  // sorted by (setting, policy, seed)
};

struct RunOptions {
  bool keep_records = false;
  std::filesystem::path trace_dir;  // NDJSON, force and physics traces
  std::filesystem::path svg_dir;
};

// One trial: spawn, observe, plan, roll out, classify. Throws PhysicsFault.
TrialResult run_trial(const ExperimentConfig& config, const ModelSet& models,
                      std::shared_ptr<const Catalog> catalog, std::size_t setting,
                      std::size_t policy, int trial, const RunOptions& options = {});

// Trials run on the worker pool; output order does not depend on scheduling.
// Throws ConfigInvalid, ModelMissing, PhysicsFault.
ExperimentResult run_experiment(const ExperimentConfig& config, const ModelSet& models,
                                const RunOptions& options = {});

std::vector<ResultRow> aggregate(const ExperimentConfig& config,
                                 const std::vector<TrialResult>& trials);

enum class TableFormat { Csv, Markdown };
std::string emit_table(const std::vector<ResultRow>& rows, TableFormat format);
// Parses emit_table's CSV back.
std::vector<ResultRow> parse_table_csv(const std::string& text);

// Per control tick: time, phase, pusher force, squeeze, break flag.
std::string log_forces(const RolloutRecord& record);

// Two-sided 95% Student-t critical value.
double t_critical_95(int dof);
// Half-width of the 95% interval of the mean; 0 for fewer than two samples.
double ci95_half_width(const std::vector<double>& values);

// Side-view drawing of a rollout: plate, tool keyframes, item paths and the
// final item outlines.
std::string render_svg(const RolloutRecord& record, const Catalog* catalog = nullptr);

}  // namespace scoopsim
