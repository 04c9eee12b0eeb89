#include "scoopsim/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"

#include "scoopsim/errors.hpp"
#include "scoopsim/parallel.hpp"
#include "scoopsim/physics.hpp"

namespace scoopsim {

using json = nlohmann::json;

const char* to_string(OutcomeKind k) {
  switch (k) {
    case OutcomeKind::Success: return "Success";
    case OutcomeKind::NotEnter: return "NotEnter";
    case OutcomeKind::Roll: return "Roll";
    case OutcomeKind::Fall: return "Fall";
    case OutcomeKind::Break: return "Break";
  }
  return "?";
}

Outcome classify_outcome(const RolloutRecord& r, const OutcomeRules& rules) {
  if (!r.complete || r.ticks.empty()) {
    throw ScoopError(ErrorKind::IncompleteRecord, "rollout did not reach Done");
  }
  Outcome o;
  o.realized_alpha = r.realized_alpha;
  const double kept = r.initial_mass > 0.0 ? r.final_mass.in_spoon / r.initial_mass : 0.0;
  o.weight_loss_pct = std::clamp(100.0 * (1.0 - kept), 0.0, 100.0);

  if (!r.breaks.empty()) {
    o.kind = OutcomeKind::Break;
    return o;
  }
  // Items carried at the end of Pushing or at any later tick.
  std::size_t last_push = 0;
  for (std::size_t i = 0; i < r.ticks.size(); ++i) {
    if (r.ticks[i].phase == Phase::Pushing) last_push = i;
  }
  std::set<int> carried, ever_in;
  for (std::size_t i = 0; i < r.ticks.size(); ++i) {
    for (const auto& s : r.ticks[i].items) {
      if (s.fragment_of || !s.in_spoon) continue;
      ever_in.insert(s.id);
      if (i >= last_push) carried.insert(s.id);
    }
  }
  const auto& final_items = r.ticks.back().items;
  bool all_in = true;
  for (const auto& s : final_items) {
    if (s.fragment_of) continue;
    if (!s.in_spoon) {
      all_in = false;
      if (carried.count(s.id)) {
        o.kind = OutcomeKind::Fall;
        return o;
      }
    }
  }
  for (const auto& s : final_items) {
    if (s.fragment_of || s.in_spoon || ever_in.count(s.id)) continue;
    if (std::abs(s.pose.position.x - r.meet) > rules.roll_distance) {
      o.kind = OutcomeKind::Roll;
      return o;
    }
  }
  if (all_in && kept >= rules.success_fraction) {
    o.kind = OutcomeKind::Success;
    return o;
  }
  o.kind = OutcomeKind::NotEnter;
  return o;
}

// ---------------------------------------------------------------------------
// Config

namespace {

[[noreturn]] void config_error(const std::string& what) {
  throw ScoopError(ErrorKind::ConfigInvalid, what);
}

void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      config_error("unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    config_error(std::string("bad value for '") + key + "' in " + where);
  }
}

std::optional<double> opt_double(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get_or<double>(j, key, 0.0, where);
}

std::filesystem::path resolve(const std::string& p, const std::filesystem::path& base) {
  if (p.empty()) return {};
  std::filesystem::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

ControllerKind kind_from(const std::string& s) {
  if (s == "CARBS") return ControllerKind::CARBS;
  if (s == "Single") return ControllerKind::Single;
  if (s == "FixedAlpha") return ControllerKind::FixedAlpha;
  if (s == "OracleServo") return ControllerKind::OracleServo;
  config_error("unknown policy kind '" + s + "'");
}

std::string default_label(const PolicyConfig& p) {
  if (p.kind == ControllerKind::FixedAlpha) {
    std::ostringstream os;
    os << "alpha=" << p.alpha;
    return os.str();
  }
  return to_string(p.kind);
}

}  // namespace

bool ExperimentConfig::needs_models() const {
  return std::any_of(policies.begin(), policies.end(),
                     [](const PolicyConfig& p) { return p.kind == ControllerKind::CARBS; });
}

ExperimentConfig parse_experiment_config(const std::string& text,
                                         const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    config_error(std::string("not valid JSON: ") + e.what());
  }
  const std::string top = "experiment";
  only_keys(j,
            {"name", "trials", "base_seed", "placement_jitter", "property_jitter", "catalog",
             "risk_model", "failure_model", "risk_threshold", "failure_threshold",
             "oracle_margin", "roll_distance", "success_fraction", "settings", "policies"},
            top);
  ExperimentConfig c;
  c.name = get_or<std::string>(j, "name", c.name, top);
  c.trials = get_or<int>(j, "trials", c.trials, top);
  c.base_seed = get_or<std::uint64_t>(j, "base_seed", c.base_seed, top);
  c.placement_jitter = get_or<double>(j, "placement_jitter", c.placement_jitter, top);
  c.property_jitter = get_or<double>(j, "property_jitter", c.property_jitter, top);
  c.catalog = resolve(get_or<std::string>(j, "catalog", "", top), base_dir);
  c.risk_model = resolve(get_or<std::string>(j, "risk_model", "", top), base_dir);
  c.failure_model = resolve(get_or<std::string>(j, "failure_model", "", top), base_dir);
  c.risk_threshold = opt_double(j, "risk_threshold", top);
  c.failure_threshold = opt_double(j, "failure_threshold", top);
  c.oracle_margin = get_or<double>(j, "oracle_margin", c.oracle_margin, top);
  c.rules.roll_distance = get_or<double>(j, "roll_distance", c.rules.roll_distance, top);
  c.rules.success_fraction = get_or<double>(j, "success_fraction", c.rules.success_fraction, top);

  if (c.trials < 1) config_error("trials must be at least 1");
  if (c.placement_jitter < 0.0 || c.property_jitter < 0.0 || c.property_jitter >= 1.0) {
    config_error("jitter out of range");
  }
  for (const auto& t : {c.risk_threshold, c.failure_threshold}) {
    if (t && !(*t > 0.0 && *t < 1.0)) config_error("thresholds must lie in (0, 1)");
  }
  if (!(c.rules.success_fraction > 0.0 && c.rules.success_fraction <= 1.0)) {
    config_error("success_fraction must lie in (0, 1]");
  }
  if (c.oracle_margin < 0.0) config_error("oracle_margin must be non-negative");

  if (!j.contains("settings") || !j.at("settings").is_array() || j.at("settings").empty()) {
    config_error("settings must be a non-empty array");
  }
  for (const auto& s : j.at("settings")) {
    const std::string where = "setting";
    only_keys(s, {"name", "items"}, where);
    SettingConfig sc;
    if (!s.contains("items") || !s.at("items").is_array() || s.at("items").empty()) {
      config_error("setting needs a non-empty items array");
    }
    for (const auto& it : s.at("items")) {
      only_keys(it, {"class", "count"}, "item");
      ItemRequest r;
      r.class_name = get_or<std::string>(it, "class", "", "item");
      r.count = get_or<int>(it, "count", 1, "item");
      if (r.class_name.empty() || r.count < 1) config_error("item needs a class and count >= 1");
      sc.items.push_back(r);
    }
    std::string fallback;
    for (const auto& r : sc.items) {
      fallback += (fallback.empty() ? "" : "+") + r.class_name +
                  (r.count > 1 ? "x" + std::to_string(r.count) : "");
    }
    sc.name = get_or<std::string>(s, "name", fallback, where);
    c.settings.push_back(std::move(sc));
  }

  if (!j.contains("policies") || !j.at("policies").is_array() || j.at("policies").empty()) {
    config_error("policies must be a non-empty array");
  }
  for (const auto& p : j.at("policies")) {
    const std::string where = "policy";
    only_keys(p, {"kind", "label", "alpha", "margin", "toggles"}, where);
    PolicyConfig pc;
    pc.kind = kind_from(get_or<std::string>(p, "kind", "", where));
    pc.alpha = get_or<double>(p, "alpha", 1.0, where);
    pc.margin = opt_double(p, "margin", where);
    if (!(pc.alpha >= 0.0 && pc.alpha <= 1.0)) config_error("alpha must lie in [0, 1]");
    if (p.contains("toggles")) {
      const auto& t = p.at("toggles");
      only_keys(t, {"angled_pushing", "adaptive_cupping", "pinning"}, "toggles");
      pc.toggles.angled_pushing = get_or<bool>(t, "angled_pushing", true, "toggles");
      pc.toggles.adaptive_cupping = get_or<bool>(t, "adaptive_cupping", true, "toggles");
      pc.toggles.pinning = get_or<bool>(t, "pinning", true, "toggles");
    }
    pc.label = get_or<std::string>(p, "label", default_label(pc), where);
    c.policies.push_back(std::move(pc));
  }
  std::set<std::string> labels;
  for (const auto& p : c.policies) {
    if (!labels.insert(p.label).second) config_error("duplicate policy label '" + p.label + "'");
  }
  if (c.needs_models() && (c.risk_model.empty() || c.failure_model.empty())) {
    config_error("CARBS needs risk_model and failure_model paths");
  }
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw ScoopError(ErrorKind::ConfigInvalid, "cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_experiment_config(ss.str(), path.parent_path());
}

ModelSet load_models(const ExperimentConfig& config) {
  ModelSet m;
  if (!config.needs_models()) return m;
  m.risk = std::make_shared<BinaryClassifier>(load_model(config.risk_model));
  m.failure = std::make_shared<BinaryClassifier>(load_model(config.failure_model));
  return m;
}

// ---------------------------------------------------------------------------
// Execution

namespace {

std::string file_stem(const TrialResult& t) {
  std::string s = t.setting + "_" + t.policy + "_" + std::to_string(t.seed);
  for (char& ch : s) {
    if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '_' && ch != '-' && ch != '.') {
      ch = '_';
    }
  }
  return s;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ScoopError(ErrorKind::MissingFile, "cannot write " + path.string());
  os << text;
}

}  // namespace

TrialResult run_trial(const ExperimentConfig& config, const ModelSet& models,
                      std::shared_ptr<const Catalog> catalog, std::size_t setting,
                      std::size_t policy, int trial, const RunOptions& options) {
  const SettingConfig& sc = config.settings.at(setting);
  const PolicyConfig& pc = config.policies.at(policy);

  ScenarioConfig scenario;
  scenario.items = sc.items;
  scenario.seed = config.base_seed + static_cast<std::uint64_t>(trial);
  scenario.placement_jitter = config.placement_jitter;
  scenario.property_jitter = config.property_jitter;
  scenario.toggles = pc.toggles;
  scenario.policy = pc.label;
  WorldState world = spawn_scenario(catalog, scenario);

  ControllerSpec spec;
  spec.kind = pc.kind;
  spec.alpha = pc.alpha;
  spec.margin = pc.margin.value_or(config.oracle_margin);
  spec.risk_model = models.risk;
  spec.failure_model = models.failure;
  spec.risk_threshold = config.risk_threshold;
  spec.failure_threshold = config.failure_threshold;
  if (pc.kind == ControllerKind::CARBS && (!models.risk || !models.failure)) {
    throw ScoopError(ErrorKind::ModelMissing, "policy '" + pc.label + "' needs both models");
  }
  Controller controller(spec);

  // Initial overhead look: food centre for the plan, risk input for CARBS.
  RandomStream noise = world.rng.perception;
  const OverheadGrid overhead = render_overhead(world, noise);
  const double x_f = segment_center(overhead).x_f;
  controller.observe_initial(lift_overhead(overhead, noise));

  PrimitiveOptions po;
  po.toggles = pc.toggles;
  const PrimitivePlan plan = controller.plan(x_f, po);

  TrialResult t;
  t.setting_index = setting;
  t.policy_index = policy;
  t.setting = sc.name;
  t.policy = pc.label;
  t.seed = scenario.seed;
  t.alpha_meaningful = pc.kind != ControllerKind::Single;

  RolloutOptions ro;
  std::ostringstream physics;
  if (!options.trace_dir.empty()) ro.physics_trace = &physics;
  t.record = run_rollout(std::move(world), plan, &controller, ro);
  t.outcome = classify_outcome(t.record, config.rules);
  t.verdict = controller.verdict();

  if (!options.trace_dir.empty()) {
    const std::string stem = file_stem(t);
    json summary = {{"setting", t.setting},
                    {"policy", t.policy},
                    {"seed", t.seed},
                    {"outcome", to_string(t.outcome.kind)},
                    {"weight_loss_pct", t.outcome.weight_loss_pct}};
    if (t.verdict) summary["risk_verdict"] = to_string(*t.verdict);
    std::ostringstream nd;
    write_ndjson(nd, t.record, summary.dump());
    write_text(options.trace_dir / (stem + ".ndjson"), nd.str());
    write_text(options.trace_dir / (stem + "_forces.csv"), log_forces(t.record));
    write_text(options.trace_dir / (stem + "_physics.csv"), physics.str());
  }
  if (!options.svg_dir.empty()) {
    write_text(options.svg_dir / (file_stem(t) + ".svg"), render_svg(t.record, catalog.get()));
  }
  if (!options.keep_records) t.record = RolloutRecord{};
  return t;
}

ExperimentResult run_experiment(const ExperimentConfig& config, const ModelSet& models,
                                const RunOptions& options) {
  if (config.trials < 1) config_error("trials must be at least 1");
  if (config.settings.empty() || config.policies.empty()) {
    config_error("experiment needs settings and policies");
  }
  auto catalog = std::make_shared<const Catalog>(
      load_catalog(config.catalog.empty() ? default_catalog_path() : config.catalog));
  for (const auto& s : config.settings) {
    for (const auto& it : s.items) {
      if (!catalog->index_of(it.class_name)) {
        config_error("setting '" + s.name + "' uses unknown class '" + it.class_name + "'");
      }
    }
  }
  for (const auto& dir : {options.trace_dir, options.svg_dir}) {
    if (!dir.empty()) std::filesystem::create_directories(dir);
  }

  const std::size_t ns = config.settings.size(), np = config.policies.size();
  const std::size_t nt = static_cast<std::size_t>(config.trials);
  ExperimentResult out;
  out.trials.resize(ns * np * nt);
  parallel_for(out.trials.size(), [&](std::size_t i) {
    const std::size_t s = i / (np * nt);
    const std::size_t p = (i / nt) % np;
    const int trial = static_cast<int>(i % nt);
    try {
      out.trials[i] = run_trial(config, models, catalog, s, p, trial, options);
    } catch (const ScoopError& e) {
      if (e.kind() == ErrorKind::NumericalBlowup) {
        throw ScoopError(ErrorKind::PhysicsFault, e.what());
      }
      throw;
    }
  });
  // Slots are already in (setting, policy, seed) order; sort anyway so the
  // emitted order never depends on how slots were filled.
  std::stable_sort(out.trials.begin(), out.trials.end(),
                   [](const TrialResult& a, const TrialResult& b) {
                     return std::tie(a.setting_index, a.policy_index, a.seed) <
                            std::tie(b.setting_index, b.policy_index, b.seed);
                   });
  out.rows = aggregate(config, out.trials);
  return out;
}

std::vector<ResultRow> aggregate(const ExperimentConfig& config,
                                 const std::vector<TrialResult>& trials) {
  std::vector<ResultRow> rows;
  for (std::size_t s = 0; s < config.settings.size(); ++s) {
    for (std::size_t p = 0; p < config.policies.size(); ++p) {
      ResultRow row;
      row.setting = config.settings[s].name;
      row.policy = config.policies[p].label;
      for (auto k : {OutcomeKind::NotEnter, OutcomeKind::Roll, OutcomeKind::Fall,
                     OutcomeKind::Break}) {
        row.outcomes[k] = 0;
      }
      std::vector<double> alphas;
      double loss = 0.0;
      bool meaningful = true;
      for (const auto& t : trials) {
        if (t.setting_index != s || t.policy_index != p) continue;
        ++row.trials;
        if (t.outcome.kind == OutcomeKind::Success) {
          ++row.successes;
        } else {
          ++row.outcomes[t.outcome.kind];
        }
        loss += t.outcome.weight_loss_pct;
        alphas.push_back(t.outcome.realized_alpha);
        meaningful = meaningful && t.alpha_meaningful;
      }
      if (row.trials == 0) continue;
      row.weight_loss_pct = loss / row.trials;
      if (meaningful) {
        row.alpha_mean = std::accumulate(alphas.begin(), alphas.end(), 0.0) / alphas.size();
        row.alpha_ci95 = ci95_half_width(alphas);
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Tables and logs

namespace {

constexpr const char* kColumns[] = {"setting",    "policy",    "success", "weight_loss_pct",
                                    "alpha_mean", "alpha_ci95", "NotEnter", "Roll",
                                    "Fall",       "Break"};

std::string fixed(double v, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

std::vector<std::string> cells(const ResultRow& r) {
  return {r.setting,
          r.policy,
          std::to_string(r.successes) + "/" + std::to_string(r.trials),
          fixed(r.weight_loss_pct, 3),
          r.alpha_mean ? fixed(*r.alpha_mean, 4) : "",
          r.alpha_ci95 ? fixed(*r.alpha_ci95, 4) : "",
          std::to_string(r.outcomes.count(OutcomeKind::NotEnter) ? r.outcomes.at(OutcomeKind::NotEnter) : 0),
          std::to_string(r.outcomes.count(OutcomeKind::Roll) ? r.outcomes.at(OutcomeKind::Roll) : 0),
          std::to_string(r.outcomes.count(OutcomeKind::Fall) ? r.outcomes.at(OutcomeKind::Fall) : 0),
          std::to_string(r.outcomes.count(OutcomeKind::Break) ? r.outcomes.at(OutcomeKind::Break) : 0)};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

std::string emit_table(const std::vector<ResultRow>& rows, TableFormat format) {
  std::ostringstream os;
  if (format == TableFormat::Csv) {
    for (std::size_t i = 0; i < std::size(kColumns); ++i) os << (i ? "," : "") << kColumns[i];
    os << '\n';
    for (const auto& r : rows) {
      const auto c = cells(r);
      for (std::size_t i = 0; i < c.size(); ++i) os << (i ? "," : "") << csv_field(c[i]);
      os << '\n';
    }
    return os.str();
  }
  os << '|';
  for (const char* col : kColumns) os << ' ' << col << " |";
  os << "\n|";
  for (std::size_t i = 0; i < std::size(kColumns); ++i) os << (i < 2 ? " --- |" : " ---: |");
  os << '\n';
  for (const auto& r : rows) {
    os << '|';
    for (const auto& c : cells(r)) os << ' ' << c << " |";
    os << '\n';
  }
  return os.str();
}

std::vector<ResultRow> parse_table_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  if (split_csv_line(line).size() != std::size(kColumns)) {
    throw ScoopError(ErrorKind::InvalidDataset, "unexpected results header");
  }
  std::vector<ResultRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != std::size(kColumns)) {
      throw ScoopError(ErrorKind::InvalidDataset, "bad results row: " + line);
    }
    ResultRow r;
    r.setting = f[0];
    r.policy = f[1];
    const auto slash = f[2].find('/');
    r.successes = std::stoi(f[2].substr(0, slash));
    r.trials = std::stoi(f[2].substr(slash + 1));
    r.weight_loss_pct = std::stod(f[3]);
    if (!f[4].empty()) r.alpha_mean = std::stod(f[4]);
    if (!f[5].empty()) r.alpha_ci95 = std::stod(f[5]);
    r.outcomes[OutcomeKind::NotEnter] = std::stoi(f[6]);
    r.outcomes[OutcomeKind::Roll] = std::stoi(f[7]);
    r.outcomes[OutcomeKind::Fall] = std::stoi(f[8]);
    r.outcomes[OutcomeKind::Break] = std::stoi(f[9]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string log_forces(const RolloutRecord& record) {
  std::ostringstream os;
  os << "time,phase,tick,pusher_fx,pusher_fz,squeeze_n,break\n";
  os << std::setprecision(9);
  for (const auto& t : record.ticks) {
    os << t.time << ',' << to_string(t.phase) << ',' << t.tick << ',' << t.pusher_force.x << ','
       << t.pusher_force.z << ',' << t.max_squeeze << ',' << (t.broke ? 1 : 0) << '\n';
  }
  return os.str();
}

double t_critical_95(int dof) {
  static constexpr double table[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306,
                                     2.262,  2.228, 2.201, 2.179, 2.160, 2.145, 2.131, 2.120,
                                     2.110,  2.101, 2.093, 2.086, 2.080, 2.074, 2.069, 2.064,
                                     2.060,  2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof < 1) return 0.0;
  if (dof <= 30) return table[dof - 1];
  if (dof <= 40) return 2.042 + (2.021 - 2.042) * (dof - 30) / 10.0;
  if (dof <= 60) return 2.021 + (2.000 - 2.021) * (dof - 40) / 20.0;
  if (dof <= 120) return 2.000 + (1.980 - 2.000) * (dof - 60) / 60.0;
  return 1.960;
}

double ci95_half_width(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double n = static_cast<double>(v.size());
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return t_critical_95(static_cast<int>(v.size()) - 1) * std::sqrt(ss / (n - 1.0) / n);
}

// ---------------------------------------------------------------------------
// SVG

namespace {

struct SvgCanvas {
  double x0, z0, scale, height;
  std::ostringstream body;

  double px(double x) const { return (x - x0) * scale; }
  double pz(double z) const { return height - (z - z0) * scale; }

  void polyline(const std::vector<Vec2>& pts, const std::string& style, bool closed) {
    body << (closed ? "<polygon" : "<polyline") << " points=\"";
    for (Vec2 p : pts) body << px(p.x) << ',' << pz(p.z) << ' ';
    body << "\" style=\"" << style << "\"/>\n";
  }
};

std::vector<Vec2> item_shape(const ItemSnapshot& s, const Catalog* catalog, double& radius) {
  radius = 0.006;
  if (!catalog) return {};
  const auto idx = catalog->index_of(s.class_name);
  if (!idx) return {};
  const auto& shape = catalog->classes[*idx].shape;
  double scale = s.size_scale;
  if (s.fragment_of) scale *= std::sqrt(0.3);
  if (std::holds_alternative<DiscShape>(shape)) {
    radius = shape_radius(shape, scale);
    return {};
  }
  std::vector<Vec2> pts;
  for (Vec2 v : body_polygon(shape, scale)) pts.push_back(s.pose.position + rotate(v, s.pose.angle));
  return pts;
}

}  // namespace

std::string render_svg(const RolloutRecord& r, const Catalog* catalog) {
  double lo = r.meet - 0.20, hi = r.meet + 0.12;
  SvgCanvas c{lo, -0.02, 2500.0, 0.14 * 2500.0, {}};
  const double width = (hi - lo) * c.scale;
  c.body << "<line x1=\"0\" y1=\"" << c.pz(0.0) << "\" x2=\"" << width << "\" y2=\""
         << c.pz(0.0) << "\" style=\"stroke:#444;stroke-width:1\"/>\n";
  // Tool keyframes: start of each phase and the final tick.
  ToolState tools;
  std::vector<std::size_t> keys;
  for (std::size_t i = 0; i < r.ticks.size(); ++i) {
    if (i == 0 || r.ticks[i].phase != r.ticks[i - 1].phase || i + 1 == r.ticks.size()) {
      keys.push_back(i);
    }
  }
  for (std::size_t k = 0; k < keys.size(); ++k) {
    const auto& t = r.ticks[keys[k]];
    tools.scooper = t.scooper;
    tools.pusher = t.pusher;
    const double op = 0.25 + 0.75 * (k + 1) / static_cast<double>(keys.size());
    const std::string o = ";opacity:" + fixed(op, 2);
    auto inner = tools.spoon_inner();
    auto outer = tools.spoon_outer();
    std::vector<Vec2> shell = inner;
    shell.insert(shell.end(), outer.rbegin(), outer.rend());
    c.polyline(shell, "fill:#9db4d6;stroke:#2a4d80;stroke-width:1" + o, true);
    c.polyline(tools.pusher_quad(), "fill:#c9c9c9;stroke:#555;stroke-width:1" + o, true);
  }
  // Item centroid paths.
  std::map<int, std::vector<Vec2>> paths;
  for (const auto& t : r.ticks) {
    for (const auto& s : t.items) paths[s.id].push_back(s.pose.position);
  }
  for (const auto& [id, pts] : paths) {
    c.polyline(pts, "fill:none;stroke:#d9822b;stroke-width:1;stroke-dasharray:3,2", false);
  }
  if (!r.ticks.empty()) {
    for (const auto& s : r.ticks.back().items) {
      double radius = 0.0;
      const auto shape = item_shape(s, catalog, radius);
      const std::string fill = s.broken || s.fragment_of ? "#c0392b" : "#f0a030";
      if (shape.empty()) {
        c.body << "<circle cx=\"" << c.px(s.pose.position.x) << "\" cy=\""
               << c.pz(s.pose.position.z) << "\" r=\"" << radius * c.scale
               << "\" style=\"fill:" << fill << ";stroke:#7a4a10\"/>\n";
      } else {
        c.polyline(shape, "fill:" + fill + ";stroke:#7a4a10;stroke-width:1", true);
      }
    }
  }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << c.height << "\" viewBox=\"0 0 " << width << ' ' << c.height << "\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << c.body.str() << "<text x=\"8\" y=\"18\" font-family=\"monospace\" font-size=\"13\">"
     << "alpha " << fixed(r.realized_alpha, 4) << "  in spoon "
     << fixed(r.initial_mass > 0 ? 100.0 * r.final_mass.in_spoon / r.initial_mass : 0.0, 1)
     << "%  breaks " << r.breaks.size() << "</text>\n</svg>\n";
  return os.str();
}

}  // namespace scoopsim
