// Acceptance suite: one PASS/FAIL line per criterion.
//
//   scoopsim_acceptance [--criterion N]... [--work-dir DIR]
//
// Trained models are cached in the work directory and reused by later
// criteria. Exit status is 0 iff every selected criterion passes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "scoopsim/bench.hpp"
#include "scoopsim/errors.hpp"
#include "scoopsim/learning.hpp"
#include "scoopsim/perception.hpp"
#include "scoopsim/physics.hpp"
#include "scoopsim/policy.hpp"
#include "scoopsim/primitive.hpp"
#include "scoopsim/rng.hpp"
#include "scoopsim/worldmodel.hpp"

namespace fs = std::filesystem;
using namespace scoopsim;

namespace {

constexpr int kTicksPerPush = 60;
constexpr int kSweepSteps = 240;  // 1 s

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Context {
  fs::path work_dir;
  std::shared_ptr<const Catalog> catalog;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// ---------------------------------------------------------------------------
// Models shared by several criteria.

fs::path cached_model(const Context& ctx, const std::string& name,
                      const std::function<BinaryClassifier()>& make) {
  const fs::path path = ctx.work_dir / name;
  if (fs::exists(path)) return path;
  std::cout << "  training " << name << "\n" << std::flush;
  const BinaryClassifier m = make();
  const fs::path tmp = path.string() + ".tmp";
  save_model(m, tmp);
  fs::rename(tmp, path);
  return path;
}

fs::path risk_model(const Context& ctx) {
  return cached_model(ctx, "risk.model", [&] {
    FragilityOptions o;
    o.seed = 3;  // orange_triangle_jello held out by default
    return train(generate_fragility_dataset(ctx.catalog, o), ModelKind::Linear,
                 TrainConfig::risk_defaults());
  });
}

fs::path failure_model(const Context& ctx, int window) {
  return cached_model(ctx, "failure_w" + std::to_string(window) + ".model", [&] {
    BreakageOptions o;
    o.window = window;
    o.seed = 1;
    const BreakageDataset d = generate_breakage_dataset(ctx.catalog, o);
    return train(augment(d.set, 8, 1), ModelKind::OneHiddenLayer, TrainConfig::failure_defaults());
  });
}

// ---------------------------------------------------------------------------
// Experiment helpers.

SettingConfig setting(const std::string& cls, int count = 1) {
  SettingConfig s;
  s.items = {{cls, count}};
  s.name = count > 1 ? cls + "x" + std::to_string(count) : cls;
  return s;
}

PolicyConfig fixed_alpha(double a) {
  PolicyConfig p;
  p.kind = ControllerKind::FixedAlpha;
  p.alpha = a;
  p.label = fmt("alpha=%g", a);
  return p;
}

PolicyConfig carbs(const std::string& label, StrategyToggles toggles = {}) {
  PolicyConfig p;
  p.kind = ControllerKind::CARBS;
  p.label = label;
  p.toggles = toggles;
  return p;
}

PolicyConfig single() {
  PolicyConfig p;
  p.kind = ControllerKind::Single;
  p.label = "Single";
  return p;
}

// Models for the closed-loop experiments: imminence window 3, servo threshold 0.6.
ExperimentConfig carbs_experiment(const Context& ctx, const std::string& name) {
  ExperimentConfig c;
  c.name = name;
  c.trials = 20;
  c.risk_model = risk_model(ctx);
  c.failure_model = failure_model(ctx, 3);
  c.failure_threshold = 0.6;
  return c;
}

ExperimentResult run_and_save(const Context& ctx, const ExperimentConfig& config) {
  const ExperimentResult r = run_experiment(config, load_models(config));
  const std::string table = emit_table(r.rows, TableFormat::Markdown);
  std::ofstream(ctx.work_dir / (config.name + ".md")) << table;
  std::istringstream lines(table);
  for (std::string line; std::getline(lines, line);) std::cout << "  " << line << "\n";
  return r;
}

const ResultRow& row(const ExperimentResult& r, const std::string& setting,
                     const std::string& policy) {
  for (const auto& x : r.rows) {
    if (x.setting == setting && x.policy == policy) return x;
  }
  throw std::runtime_error("missing row " + setting + "/" + policy);
}

ExperimentConfig fragile_config(const Context& ctx) {
  ExperimentConfig c = carbs_experiment(ctx, "fragile");
  c.base_seed = 1000;
  for (const char* f : {"tofu", "cheesecake", "red_square_jello", "orange_triangle_jello"}) {
    c.settings.push_back(setting(f));
  }
  c.policies = {carbs("CARBS"), fixed_alpha(1.0), fixed_alpha(0.93)};
  return c;
}

ExperimentConfig robust_config(const Context& ctx) {
  ExperimentConfig c = carbs_experiment(ctx, "robust");
  c.base_seed = 1;
  c.settings = {setting("grape"), setting("pea", 3), setting("blueberry", 2)};
  c.policies = {carbs("CARBS"), fixed_alpha(1.0), single()};
  return c;
}

ExperimentConfig ablation_config(const Context& ctx) {
  ExperimentConfig c = carbs_experiment(ctx, "ablation");
  c.base_seed = 1;
  c.placement_jitter = 0.005;
  c.settings = {setting("grape"), setting("blueberry"), setting("macaroni"),
                setting("snow_pea"), setting("cashew", 2)};
  StrategyToggles no_ang, no_cup, no_pin;
  no_ang.angled_pushing = false;
  no_cup.adaptive_cupping = false;
  no_pin.pinning = false;
  c.policies = {carbs("full"), carbs("no_angled", no_ang), carbs("no_cupping", no_cup),
                carbs("no_pinning", no_pin)};
  return c;
}

// ---------------------------------------------------------------------------
// 1. Pusher travel equals alpha times the full travel.

Verdict criterion1(const Context& ctx) {
  ScenarioConfig cfg;
  cfg.items = {{"grape", 1}};
  cfg.seed = 1;
  const WorldState w = spawn_scenario(ctx.catalog, cfg);
  double worst = 0.0;
  std::ostringstream d;
  for (double v : {0.0, 0.25, 0.5, 0.65, 0.93, 1.0}) {
    Controller c(baseline_controller(ControllerKind::FixedAlpha, v));
    const RolloutRecord r = run_rollout(w, c.plan(0.0), &c);
    const double err = std::abs(r.pusher_push_displacement - v * 0.13);
    worst = std::max(worst, err);
    d << fmt(" %.2f->", v) << fmt("%.5f", r.pusher_push_displacement);
  }
  return {worst <= 0.00217, "max error " + fmt("%.2e m;", worst) + d.str()};
}

// ---------------------------------------------------------------------------
// 2. Physics invariants over 1000 seeded scenes swept by one tool.

struct InvariantStats {
  double mass_drift = 0.0;
  double penetration = 0.0;
  double cone_excess = 0.0;
  std::string final_state;
};

InvariantStats stress_scene(const std::shared_ptr<const Catalog>& catalog, std::uint64_t seed) {
  RandomStream pick(seed, "acceptance.scene");
  const auto& cls = catalog->classes[pick.next_u64() % catalog->classes.size()];
  ScenarioConfig cfg;
  cfg.items = {{cls.name, 1 + static_cast<int>(pick.next_u64() % 3)}};
  cfg.seed = seed;
  cfg.placement_jitter = 0.01;
  cfg.property_jitter = 0.1;
  WorldState w;
  for (;;) {
    try {
      w = spawn_scenario(catalog, cfg);
      break;
    } catch (const ScoopError& e) {
      if (e.kind() != ErrorKind::OverlapUnresolvable || cfg.items[0].count == 1) throw;
      --cfg.items[0].count;
    }
  }
  // One tool sweeps the items at a random speed up to 0.1 m/s, starting
  // 5 mm clear of them; the other is parked well away so no item is pinched
  // between two kinematic bodies.
  double lo = 1.0, hi = -1.0;
  for (const auto& it : w.items) {
    lo = std::min(lo, it.pose.position.x - item_radius(w, it));
    hi = std::max(hi, it.pose.position.x + item_radius(w, it));
  }
  PrimitiveOptions o;
  o.toggles.angled_pushing = pick.bernoulli(0.5);
  const ToolState start = start_tools(plan_primitive(0.0, o));
  const double speed = pick.uniform(0.02, 0.1);
  w.tools = idle_tools(0.0);
  if (pick.bernoulli(0.5)) {
    w.tools.pusher = start.pusher;
    w.tools.pusher.position.x += lo - 0.005 - start.pusher.position.x;
    w.tools.pusher_velocity.linear = {speed, 0.0};
    w.tools.scooper.position.x += 0.3;
  } else {
    w.tools.scooper = start.scooper;
    w.tools.scooper.position.x += hi + 0.005 - start.lip_point().x;
    w.tools.scooper_velocity.linear = {-speed, 0.0};
    w.tools.pusher.position.x -= 0.3;
  }
  w.advance_phase(Phase::Pushing);

  InvariantStats s;
  auto item = [&](int id) -> const FoodItem& {
    return *std::find_if(w.items.begin(), w.items.end(),
                         [&](const FoodItem& it) { return it.id == id; });
  };
  for (int step = 0; step < kSweepSteps; ++step) {
    w = simulate_step(std::move(w));
    s.mass_drift =
        std::max(s.mass_drift, std::abs(mass_accounting(w).total() - w.initial_total_mass));
    for (const Contact& c : w.contacts) {
      s.penetration = std::max(s.penetration, c.penetration);
      double mu = w.spec_of(item(c.item_id)).friction_mu;
      if (c.surface == Surface::OtherItem) {
        mu = std::sqrt(mu * w.spec_of(item(c.other_id)).friction_mu);
      }
      s.cone_excess = std::max(s.cone_excess, std::abs(c.tangent_force) - mu * c.normal_force);
    }
  }
  s.final_state = serialize_state(w);
  return s;
}

Verdict criterion2(const Context& ctx) {
  InvariantStats worst;
  int nondeterministic = 0;
  std::uint64_t worst_seed = 0;
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    InvariantStats a;
    try {
      a = stress_scene(ctx.catalog, seed);
    } catch (const ScoopError& e) {
      return {false, "seed " + std::to_string(seed) + ": " + e.what()};
    }
    const InvariantStats b = stress_scene(ctx.catalog, seed);
    if (a.final_state != b.final_state) ++nondeterministic;
    worst.mass_drift = std::max(worst.mass_drift, a.mass_drift);
    if (a.penetration > worst.penetration) {
      worst.penetration = a.penetration;
      worst_seed = seed;
    }
    worst.cone_excess = std::max(worst.cone_excess, a.cone_excess);
  }
  const bool pass = worst.mass_drift <= 1e-9 && worst.penetration <= 0.002 &&
                    worst.cone_excess <= 1e-9 && nondeterministic == 0;
  return {pass, "mass drift " + fmt("%.1e kg", worst.mass_drift) + ", max penetration " +
                    fmt("%.2f mm", 1e3 * worst.penetration) + " (seed " +
                    std::to_string(worst_seed) + "), cone excess " +
                    fmt("%.1e N", worst.cone_excess) + ", nondeterministic scenes " +
                    std::to_string(nondeterministic) + "/1000"};
}

// ---------------------------------------------------------------------------
// 3. Oracle servo against the per-scene grid-search optimum.

Verdict criterion3(const Context& ctx) {
  const char* foods[] = {"tofu", "cheesecake", "red_square_jello", "orange_triangle_jello"};
  const int n = 200;
  std::vector<WorldState> scenes;
  std::vector<double> x_f;
  double max_increase = 0.0;
  for (int s = 0; s < n; ++s) {
    ScenarioConfig cfg;
    cfg.items = {{foods[s % 4], 1}};
    cfg.seed = 5000 + s;
    cfg.placement_jitter = 0.01;
    cfg.property_jitter = 0.1;
    scenes.push_back(spawn_scenario(ctx.catalog, cfg));
    x_f.push_back(scenes.back().items[0].pose.position.x);
    const RolloutRecord open = run_rollout(scenes.back(), plan_primitive(x_f.back()));
    max_increase = std::max(max_increase, open.max_tick_squeeze_increase);
  }
  const double margin = oracle_margin_for(max_increase);

  int breaks = 0, within = 0, below_bound = 0;
  std::map<int, int> histogram;
  for (int s = 0; s < n; ++s) {
    ControllerSpec spec;
    spec.kind = ControllerKind::OracleServo;
    spec.margin = margin;
    Controller c(spec);
    const RolloutRecord r = run_rollout(scenes[s], c.plan(x_f[s]), &c);
    const int k_oracle = static_cast<int>(std::lround(r.realized_alpha * kTicksPerPush));
    int k_best = -1;
    for (int k = kTicksPerPush; k >= 0; --k) {
      PrimitiveOptions o;
      o.alpha = double(k) / kTicksPerPush;
      if (run_rollout(scenes[s], plan_primitive(x_f[s], o)).breaks.empty()) {
        k_best = k;
        break;
      }
    }
    breaks += !r.breaks.empty();
    within += std::abs(k_oracle - k_best) <= 1;
    below_bound += k_oracle <= k_best + 1;
    ++histogram[k_oracle - k_best];
  }
  std::ostringstream d;
  d << "margin " << fmt("%.2f N", margin) << ", breaks " << breaks << ", within one tick "
    << within << "/" << n << ", at or below optimum+1 " << below_bound << "/" << n
    << "; oracle-optimum ticks:";
  for (auto [k, c] : histogram) d << " " << k << ":" << c;
  return {breaks == 0 && within == n, d.str()};
}

// ---------------------------------------------------------------------------
// 4. Classifier generalization to held-out classes.

Verdict criterion4(const Context& ctx) {
  const BinaryClassifier failure = load_model(failure_model(ctx, 6));
  LabeledSet held_out;
  std::ostringstream d;
  std::uint64_t seed = 101;
  for (const char* food : {"cheesecake", "red_square_jello", "orange_triangle_jello"}) {
    BreakageOptions o;
    o.food = food;
    o.seed = seed++;
    o.n_rollouts = 10;
    const LabeledSet set = generate_breakage_dataset(ctx.catalog, o).set;
    d << food << fmt(" %.3f, ", evaluate(failure, set).accuracy);
    held_out.samples.insert(held_out.samples.end(), set.samples.begin(), set.samples.end());
  }
  const double failure_acc = evaluate(failure, held_out).accuracy;

  const BinaryClassifier risk = load_model(risk_model(ctx));
  FragilityOptions fo;
  fo.seed = 17;
  fo.holdout.clear();
  const Metrics rm = evaluate(risk, generate_fragility_dataset(ctx.catalog, fo));
  const auto& orange = rm.per_class.at("orange_triangle_jello");

  d << "failure overall " << fmt("%.3f", failure_acc) << "; risk " << fmt("%.3f", rm.accuracy)
    << " (orange " << orange.first << "/" << orange.second << ")";
  return {failure_acc >= 0.90 && rm.accuracy >= 0.95, "failure per class: " + d.str()};
}

// ---------------------------------------------------------------------------
// 5-7. Closed-loop comparisons.

Verdict criterion5(const Context& ctx) {
  const ExperimentConfig c = fragile_config(ctx);
  const ExperimentResult r = run_and_save(ctx, c);
  std::map<std::string, double> loss;
  for (const auto& s : c.settings) {
    for (const auto& p : c.policies) loss[p.label] += row(r, s.name, p.label).weight_loss_pct / 4.0;
  }
  std::vector<double> alphas;
  for (const auto& t : r.trials) {
    if (t.policy == "CARBS") alphas.push_back(t.outcome.realized_alpha);
  }
  double mean = 0.0, var = 0.0;
  for (double a : alphas) mean += a / alphas.size();
  for (double a : alphas) var += (a - mean) * (a - mean) / alphas.size();
  const bool pass = loss["CARBS"] < loss["alpha=1"] && loss["CARBS"] < loss["alpha=0.93"] &&
                    var > 0.0;
  return {pass, "mean weight loss CARBS " + fmt("%.1f%%", loss["CARBS"]) + ", alpha=1 " +
                    fmt("%.1f%%", loss["alpha=1"]) + ", alpha=0.93 " +
                    fmt("%.1f%%", loss["alpha=0.93"]) + "; CARBS alpha variance " +
                    fmt("%.4f", var)};
}

Verdict criterion6(const Context& ctx) {
  const ExperimentConfig c = robust_config(ctx);
  const ExperimentResult r = run_and_save(ctx, c);
  bool ordered = true;
  std::ostringstream d;
  for (const auto& s : c.settings) {
    const int a = row(r, s.name, "CARBS").successes;
    const int b = row(r, s.name, "alpha=1").successes;
    const int m = row(r, s.name, "Single").successes;
    ordered = ordered && a >= b && b >= m;
    d << s.name << " " << a << "/" << b << "/" << m << "; ";
  }
  const bool pea_gap =
      row(r, "peax3", "Single").successes < row(r, "peax3", "alpha=1").successes;
  return {ordered && pea_gap,
          "successes CARBS/alpha=1/Single: " + d.str() +
              (pea_gap ? "Single lower on peax3" : "Single not lower on peax3")};
}

Verdict criterion7(const Context& ctx) {
  const ExperimentConfig c = ablation_config(ctx);
  const ExperimentResult r = run_and_save(ctx, c);
  std::map<std::string, int> success, falls;
  for (const auto& x : r.rows) {
    success[x.policy] += x.successes;
    falls[x.policy] += x.outcomes.at(OutcomeKind::Fall);
  }
  bool dominant = true;
  std::ostringstream d;
  for (const auto& p : c.policies) {
    dominant = dominant && success["full"] >= success[p.label];
    d << p.label << " " << success[p.label] << " (" << falls[p.label] << " Fall); ";
  }
  const bool more_falls = falls["no_pinning"] > falls["full"];
  return {dominant && more_falls, "successes of 100: " + d.str()};
}

// ---------------------------------------------------------------------------
// 8. Gradient check and a separable toy problem.

Verdict criterion8(const Context&) {
  RandomStream r(8, "acceptance.toy");
  std::vector<std::vector<double>> x;
  std::vector<int> y;
  for (int i = 0; i < 400; ++i) {
    const int label = i % 2;
    std::vector<double> v(8);
    for (auto& e : v) e = r.gaussian(label ? 1.5 : -1.5, 0.5);
    x.push_back(std::move(v));
    y.push_back(label);
  }
  double worst_rel = 0.0;
  double worst_acc = 1.0;
  for (ModelKind kind : {ModelKind::Linear, ModelKind::OneHiddenLayer}) {
    BinaryClassifier m = BinaryClassifier::zeros(kind, 8, 8);
    for (double& p : m.params) p = r.gaussian(0.0, 0.3);
    const std::vector<std::vector<double>> xs(x.begin(), x.begin() + 20);
    const std::vector<int> ys(y.begin(), y.begin() + 20);
    const auto g = bce_gradient(m, xs, ys);
    const double h = 1e-5;
    for (int t = 0; t < 10; ++t) {
      const std::size_t i = r.next_u64() % m.params.size();
      BinaryClassifier plus = m, minus = m;
      plus.params[i] += h;
      minus.params[i] -= h;
      const double fd = (bce_loss(plus, xs, ys) - bce_loss(minus, xs, ys)) / (2.0 * h);
      worst_rel = std::max(worst_rel,
                           std::abs(g[i] - fd) / std::max({1e-8, std::abs(g[i]), std::abs(fd)}));
    }
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.epochs = 30;
    const BinaryClassifier trained = train_features(x, y, kind, cfg);
    int correct = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      correct += (predict(trained, x[i]) >= 0.5) == (y[i] == 1);
    }
    worst_acc = std::min(worst_acc, double(correct) / x.size());
  }
  return {worst_rel <= 1e-4 && worst_acc >= 0.99,
          "max relative gradient error " + fmt("%.2e", worst_rel) + ", toy accuracy " +
              fmt("%.4f", worst_acc)};
}

// ---------------------------------------------------------------------------
// 9. Robust verdicts always run the full travel.

Verdict criterion9(const Context& ctx) {
  int robust = 0, violations = 0, total = 0;
  for (const auto& c : {fragile_config(ctx), robust_config(ctx), ablation_config(ctx)}) {
    const ExperimentResult r = run_experiment(c, load_models(c));
    for (const auto& t : r.trials) {
      ++total;
      if (t.verdict != RiskVerdict::Robust) continue;
      ++robust;
      violations += t.outcome.realized_alpha != 1.0;
    }
  }
  return {violations == 0 && robust > 0,
          std::to_string(robust) + " Robust verdicts in " + std::to_string(total) +
              " trials, " + std::to_string(violations) + " with alpha != 1"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> selected;
  std::string work_dir = "acceptance_work";
  app.add_option("--criterion", selected, "Criterion number (repeatable; default all)")
      ->check(CLI::Range(1, 9));
  app.add_option("--work-dir", work_dir, "Cache for trained models and result tables");
  CLI11_PARSE(app, argc, argv);
  if (selected.empty()) selected = {1, 2, 3, 4, 5, 6, 7, 8, 9};

  Context ctx;
  ctx.work_dir = work_dir;
  fs::create_directories(ctx.work_dir);
  ctx.catalog = std::make_shared<const Catalog>(load_catalog(default_catalog_path()));

  const std::function<Verdict(const Context&)> criteria[] = {
      criterion1, criterion2, criterion3, criterion4, criterion5,
      criterion6, criterion7, criterion8, criterion9};
  bool all = true;
  for (int n : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = criteria[n - 1](ctx);
    } catch (const std::exception& e) {
      v = {false, std::string("error: ") + e.what()};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "criterion " << n << ": " << (v.pass ? "PASS" : "FAIL") << " (" << fmt("%.1f", secs)
              << " s) " << v.detail << "\n"
              << std::flush;
    all = all && v.pass;
  }
  return all ? 0 : 1;
}
