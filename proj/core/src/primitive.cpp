#include "scoopsim/primitive.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "json.hpp"
#include "scoopsim/errors.hpp"

namespace scoopsim {

using nlohmann::json;

int PrimitivePlan::ticks(Phase phase) const {
  switch (phase) {
    case Phase::Pushing: return static_cast<int>(std::lround(t_push * control_rate));
    case Phase::Scooping: return static_cast<int>(std::lround(t_scoop * control_rate));
    case Phase::Transfer: return static_cast<int>(std::lround(t_transfer * control_rate));
    default: return 0;
  }
}

PrimitivePlan plan_primitive(double x_f, const PrimitiveOptions& o) {
  PrimitivePlan p;
  p.x_f = x_f;
  p.alpha = o.alpha;
  p.toggles = o.toggles;
  p.push_distance = o.push_distance;
  p.t_push = o.t_push;
  p.t_scoop = o.t_scoop;
  p.t_transfer = o.t_transfer;
  p.meet_offset = o.meet_offset;
  p.scoop_lift = o.scoop_lift;
  p.scoop_sweep = o.scoop_sweep;
  p.transfer_retreat = o.transfer_retreat;
  p.transfer_pitch = o.transfer_pitch;
  p.control_rate = o.control_rate;
  p.steps_per_tick = o.steps_per_tick;
  p.single_arm = o.single_arm;
  p.scooper_start = x_f + o.scooper_offset;
  if (o.single_arm) {
    p.toggles = StrategyToggles{false, false, false};
    p.theta = 0.0;
    p.pusher_start = x_f - o.barrier_offset;
    p.meet = p.pusher_start;
    p.push_distance = 0.0;
  } else {
    p.theta = o.toggles.angled_pushing ? o.tilt : 0.0;
    p.pusher_start = x_f - o.pusher_offset;
    p.meet = x_f + o.meet_offset;
  }
  p.scooper_travel = p.scooper_start - p.meet;
  return p;
}

ToolState start_tools(const PrimitivePlan& plan) {
  ToolState t;
  t.geometry = plan.geometry;
  const double base = -plan.geometry.lip_sink;
  t.scooper = ToolState::scooper_pose_for_lip({plan.scooper_start, base},
                                              plan.geometry.mount_angle, plan.geometry);
  t.pusher = Pose{{plan.pusher_start, base}, plan.theta};
  return t;
}

namespace {

double lip_direction_for(const ToolGeometry& g, double pitch) {
  return -0.5 * kPi - g.mount_angle + pitch;
}

}  // namespace

double scoop_lip_height(const PrimitivePlan& plan, double u) {
  const auto& g = plan.geometry;
  const double pitch = g.mount_angle * (1.0 - u);
  // The arc centre rises by the lift; the lip follows the rotation.
  const double center_rise = plan.scoop_lift * u;
  const double start = std::sin(lip_direction_for(g, g.mount_angle));
  return center_rise + g.bowl_radius * (std::sin(lip_direction_for(g, pitch)) - start);
}

ToolCommand phase_command(const PrimitivePlan& plan, Phase phase, double u,
                          const WorldState& world) {
  ToolCommand cmd;
  cmd.stamp = world.time;
  const double dt = plan.tick_dt();
  switch (phase) {
    case Phase::Pushing: {
      const double pv = plan.push_distance / plan.t_push;
      const double sv = plan.scooper_travel / plan.t_push;
      if (plan.single_arm) {
        cmd.scooper.linear = {-sv, 0.0};
      } else if (plan.toggles.adaptive_cupping) {
        cmd.pusher.linear = {pv, 0.0};
        cmd.scooper.linear = {-sv, 0.0};
      } else if (u < 0.5) {
        cmd.pusher.linear = {2.0 * pv, 0.0};
      } else {
        cmd.scooper.linear = {-2.0 * sv, 0.0};
      }
      return cmd;
    }
    case Phase::Scooping: {
      const auto& g = world.tools.geometry;
      const int n = plan.ticks(Phase::Scooping);
      const double du = 1.0 / n;
      const double u1 = std::min(1.0, u + du);
      // Track the schedule from the current pose: lip sweeping toward the
      // pusher, arc centre
      // raised by the lift, pitch easing from the mount angle to level.
      const Pose& s = world.tools.scooper;
      const double lip_x = world.tools.lip_point().x - plan.scoop_sweep * (u1 - u);
      const double pitch1 = g.mount_angle * (1.0 - u1);
      const double dir1 = lip_direction_for(g, pitch1);
      const double cx1 = lip_x - g.bowl_radius * std::cos(dir1);
      const double cz1 = s.position.z + plan.scoop_lift * (u1 - u);
      cmd.scooper.linear = {(cx1 - s.position.x) / dt, (cz1 - s.position.z) / dt};
      cmd.scooper.angular = (pitch1 - s.angle) / dt;
      if (!plan.single_arm && plan.toggles.pinning) {
        const double lip_z1 = cz1 + g.bowl_radius * std::sin(dir1);
        cmd.pusher.linear = {0.0, (lip_z1 - world.tools.lip_point().z) / dt};
      }
      return cmd;
    }
    case Phase::Transfer: {
      if (!plan.single_arm) cmd.pusher.linear = {-plan.transfer_retreat / plan.t_transfer, 0.0};
      cmd.scooper.angular = plan.transfer_pitch / plan.t_transfer;
      return cmd;
    }
    default:
      throw ScoopError(ErrorKind::InvalidPhase,
                       std::string("no command for phase ") + to_string(phase));
  }
}

namespace {

ItemSnapshot snapshot(const WorldState& w, const FoodItem& it, bool contact) {
  ItemSnapshot s;
  s.id = it.id;
  s.class_name = w.spec_of(it).name;
  s.size_scale = it.size_scale;
  s.pose = it.pose;
  s.mass = it.current_mass;
  s.compression = it.compression;
  s.squeeze = it.squeeze;
  s.broken = it.broken;
  s.fragment_of = it.fragment_of;
  s.in_spoon = in_spoon(w, it);
  s.scooper_contact = contact;
  return s;
}

void apply(WorldState& w, const ToolCommand& c) {
  w.tools.scooper_velocity = c.scooper;
  w.tools.pusher_velocity = c.pusher;
}

ToolCommand scaled(ToolCommand c, double f) {
  c.scooper.linear *= f;
  c.scooper.angular *= f;
  c.pusher.linear *= f;
  c.pusher.angular *= f;
  return c;
}

struct TickRunner {
  WorldState& world;
  RolloutRecord& rec;
  const PrimitivePlan& plan;
  const RolloutOptions& opt;
  std::vector<double> last_squeeze;  // by item index, end of previous tick

  void run(Phase phase, int k, double u, const ToolCommand& cmd) {
    apply(world, cmd);
    TickRecord tr;
    tr.tick = k;
    tr.phase = phase;
    tr.u = u;
    tr.command = cmd;
    std::vector<bool> contact(world.items.size(), false);
    std::vector<double> tick_max(world.items.size(), 0.0);
    const Vec2 pusher_before = world.tools.pusher.position;
    for (int s = 0; s < plan.steps_per_tick; ++s) {
      std::vector<bool> was_broken;
      for (const auto& it : world.items) was_broken.push_back(it.broken);
      try {
        world = simulate_step(std::move(world), opt.physics);
      } catch (const ScoopError& e) {
        if (e.kind() == ErrorKind::NumericalBlowup) {
          throw ScoopError(ErrorKind::PhysicsFault, e.what());
        }
        throw;
      }
      if (opt.physics_trace) write_trace_rows(*opt.physics_trace, world);
      contact.resize(world.items.size(), false);
      tick_max.resize(world.items.size(), 0.0);
      for (std::size_t i = 0; i < world.items.size(); ++i) {
        const auto& it = world.items[i];
        if (it.scooper_contact_force > 0.0) contact[i] = true;
        tick_max[i] = std::max(tick_max[i], it.squeeze);
        tr.max_squeeze = std::max(tr.max_squeeze, it.squeeze);
        if (i < was_broken.size() && it.broken && !was_broken[i]) {
          tr.broke = true;
          rec.breaks.push_back({static_cast<int>(rec.ticks.size()), it.id, it.squeeze,
                                it.break_force, world.time});
        }
      }
    }
    const Vec2 d = world.tools.pusher.position - pusher_before;
    rec.pusher_total_displacement += std::abs(d.x) + std::abs(d.z);
    if (phase == Phase::Pushing) {
      last_squeeze.resize(world.items.size(), 0.0);
      for (std::size_t i = 0; i < world.items.size(); ++i) {
        const auto& it = world.items[i];
        if (it.inert() || !world.spec_of(it).fragile()) continue;
        if (!it.broken) {
          rec.max_tick_squeeze_increase =
              std::max(rec.max_tick_squeeze_increase, tick_max[i] - last_squeeze[i]);
        }
        last_squeeze[i] = it.squeeze;
      }
    }
    tr.time = world.time;
    tr.scooper = world.tools.scooper;
    tr.pusher = world.tools.pusher;
    tr.pusher_force = world.pusher_force;
    for (std::size_t i = 0; i < world.items.size(); ++i) {
      tr.items.push_back(snapshot(world, world.items[i], contact[i]));
    }
    rec.ticks.push_back(std::move(tr));
  }
};

}  // namespace

RolloutRecord run_rollout(WorldState world, const PrimitivePlan& plan,
                          RolloutController* controller, const RolloutOptions& opt) {
  if (world.phase != Phase::Idle) {
    throw ScoopError(ErrorKind::InvalidPhase, "rollout must start from Idle");
  }
  RolloutRecord rec;
  rec.x_f = plan.x_f;
  rec.meet = plan.meet;
  rec.plan_alpha = plan.alpha;
  rec.initial_mass = world.initial_total_mass;
  rec.phases.push_back(Phase::Idle);
  for (const auto& it : world.items) rec.initial_items.push_back(snapshot(world, it, false));

  world.tools = start_tools(plan);
  if (opt.physics_trace) write_trace_header(*opt.physics_trace);
  TickRunner runner{world, rec, plan, opt, {}};

  // Pushing.
  world.advance_phase(Phase::Pushing);
  rec.phases.push_back(Phase::Pushing);
  const double pusher_start = world.tools.pusher.position.x;
  const int n_push = plan.ticks(Phase::Pushing);
  const double scaled_alpha = std::clamp(plan.alpha, 0.0, 1.0) * n_push;
  const int full = static_cast<int>(std::floor(scaled_alpha + 1e-9));
  const double frac = std::max(0.0, scaled_alpha - full);
  rec.realized_alpha = std::clamp(plan.alpha, 0.0, 1.0);
  const bool wants_obs =
      opt.record_observations || (controller && controller->wants_observation());
  for (int k = 0; k < n_push; ++k) {
    if (k > full || (k == full && frac <= 1e-9)) break;
    const double u = static_cast<double>(k) / n_push;
    std::optional<SideGrid> obs;
    if (wants_obs) obs = render_side(world);
    if (controller && controller->on_tick(world, obs ? &*obs : nullptr, Phase::Pushing, u,
                                          k) == TickDecision::TerminatePushing) {
      rec.realized_alpha = u;
      rec.terminated_early = true;
      break;
    }
    if (opt.record_observations) rec.observations.push_back(*obs);
    ToolCommand cmd = phase_command(plan, Phase::Pushing, u, world);
    if (k == full) cmd = scaled(cmd, frac);
    runner.run(Phase::Pushing, k, u, cmd);
  }
  rec.pusher_push_displacement = world.tools.pusher.position.x - pusher_start;

  for (Phase phase : {Phase::Scooping, Phase::Transfer}) {
    world.advance_phase(phase);
    rec.phases.push_back(phase);
    const int n = plan.ticks(phase);
    for (int k = 0; k < n; ++k) {
      const double u = static_cast<double>(k) / n;
      if (controller) controller->on_tick(world, nullptr, phase, u, k);
      runner.run(phase, k, u, phase_command(plan, phase, u, world));
    }
  }

  world.advance_phase(Phase::Done);
  rec.phases.push_back(Phase::Done);
  world.tools.scooper_velocity = {};
  world.tools.pusher_velocity = {};
  rec.final_mass = mass_accounting(world);
  rec.complete = true;
  return rec;
}

// ---------------------------------------------------------------------------
// NDJSON
// ---------------------------------------------------------------------------

namespace {

json pose_json(const Pose& p) { return json::array({p.position.x, p.position.z, p.angle}); }
Pose pose_from(const json& j) { return Pose{{j.at(0).get<double>(), j.at(1).get<double>()}, j.at(2).get<double>()}; }
json vel_json(const ToolVelocity& v) { return json::array({v.linear.x, v.linear.z, v.angular}); }
ToolVelocity vel_from(const json& j) {
  return ToolVelocity{{j.at(0).get<double>(), j.at(1).get<double>()}, j.at(2).get<double>()};
}

json item_json(const ItemSnapshot& s) {
  json j = {{"id", s.id},       {"class", s.class_name},   {"scale", s.size_scale},
            {"pose", pose_json(s.pose)}, {"mass", s.mass}, {"compression", s.compression},
            {"squeeze", s.squeeze}, {"broken", s.broken}, {"in_spoon", s.in_spoon},
            {"scooper_contact", s.scooper_contact}};
  j["fragment_of"] = s.fragment_of ? json(*s.fragment_of) : json(nullptr);
  return j;
}

ItemSnapshot item_from(const json& j) {
  ItemSnapshot s;
  s.id = j.at("id").get<int>();
  s.class_name = j.at("class").get<std::string>();
  s.size_scale = j.at("scale").get<double>();
  s.pose = pose_from(j.at("pose"));
  s.mass = j.at("mass").get<double>();
  s.compression = j.at("compression").get<double>();
  s.squeeze = j.at("squeeze").get<double>();
  s.broken = j.at("broken").get<bool>();
  s.in_spoon = j.at("in_spoon").get<bool>();
  s.scooper_contact = j.at("scooper_contact").get<bool>();
  if (!j.at("fragment_of").is_null()) s.fragment_of = j.at("fragment_of").get<int>();
  return s;
}

Phase phase_from(const std::string& s) {
  for (Phase p : {Phase::Idle, Phase::Pushing, Phase::Scooping, Phase::Transfer, Phase::Done}) {
    if (s == to_string(p)) return p;
  }
  throw ScoopError(ErrorKind::IncompleteRecord, "unknown phase '" + s + "'");
}

}  // namespace

void write_ndjson(std::ostream& os, const RolloutRecord& r, const std::string& summary_json) {
  for (const auto& t : r.ticks) {
    json j = {{"type", "tick"},
              {"phase", to_string(t.phase)},
              {"tick", t.tick},
              {"u", t.u},
              {"time", t.time},
              {"command", {{"scooper", vel_json(t.command.scooper)},
                           {"pusher", vel_json(t.command.pusher)},
                           {"stamp", t.command.stamp}}},
              {"scooper", pose_json(t.scooper)},
              {"pusher", pose_json(t.pusher)},
              {"pusher_force", json::array({t.pusher_force.x, t.pusher_force.z})},
              {"max_squeeze", t.max_squeeze},
              {"broke", t.broke}};
    json items = json::array();
    for (const auto& s : t.items) items.push_back(item_json(s));
    j["items"] = std::move(items);
    os << j.dump() << '\n';
  }
  json s = json::parse(summary_json);
  s["type"] = "summary";
  s["x_f"] = r.x_f;
  s["meet"] = r.meet;
  s["plan_alpha"] = r.plan_alpha;
  s["realized_alpha"] = r.realized_alpha;
  s["terminated_early"] = r.terminated_early;
  s["pusher_push_displacement"] = r.pusher_push_displacement;
  s["pusher_total_displacement"] = r.pusher_total_displacement;
  s["initial_mass"] = r.initial_mass;
  s["complete"] = r.complete;
  s["final_mass"] = {{"in_spoon", r.final_mass.in_spoon},
                     {"on_plate", r.final_mass.on_plate},
                     {"residue", r.final_mass.residue},
                     {"airborne", r.final_mass.airborne}};
  json breaks = json::array();
  for (const auto& b : r.breaks) {
    breaks.push_back({{"tick", b.tick}, {"item", b.item_id}, {"squeeze", b.squeeze},
                      {"break_force", b.break_force}, {"time", b.time}});
  }
  s["breaks"] = std::move(breaks);
  json init = json::array();
  for (const auto& it : r.initial_items) init.push_back(item_json(it));
  s["initial_items"] = std::move(init);
  json phases = json::array();
  for (Phase p : r.phases) phases.push_back(to_string(p));
  s["phases"] = std::move(phases);
  os << s.dump() << '\n';
}

RolloutRecord read_ndjson(std::istream& is) {
  RolloutRecord r;
  std::string line;
  bool summary = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw ScoopError(ErrorKind::IncompleteRecord,
                       "line " + std::to_string(lineno) + ": " + e.what());
    }
    try {
      const std::string type = j.at("type").get<std::string>();
      if (type == "tick") {
        TickRecord t;
        t.phase = phase_from(j.at("phase").get<std::string>());
        t.tick = j.at("tick").get<int>();
        t.u = j.at("u").get<double>();
        t.time = j.at("time").get<double>();
        t.command.scooper = vel_from(j.at("command").at("scooper"));
        t.command.pusher = vel_from(j.at("command").at("pusher"));
        t.command.stamp = j.at("command").at("stamp").get<double>();
        t.scooper = pose_from(j.at("scooper"));
        t.pusher = pose_from(j.at("pusher"));
        t.pusher_force = {j.at("pusher_force").at(0).get<double>(),
                          j.at("pusher_force").at(1).get<double>()};
        t.max_squeeze = j.at("max_squeeze").get<double>();
        t.broke = j.at("broke").get<bool>();
        for (const auto& it : j.at("items")) t.items.push_back(item_from(it));
        r.ticks.push_back(std::move(t));
      } else if (type == "summary") {
        summary = true;
        r.x_f = j.at("x_f").get<double>();
        r.meet = j.at("meet").get<double>();
        r.plan_alpha = j.at("plan_alpha").get<double>();
        r.realized_alpha = j.at("realized_alpha").get<double>();
        r.terminated_early = j.at("terminated_early").get<bool>();
        r.pusher_push_displacement = j.at("pusher_push_displacement").get<double>();
        r.pusher_total_displacement = j.at("pusher_total_displacement").get<double>();
        r.initial_mass = j.at("initial_mass").get<double>();
        r.complete = j.at("complete").get<bool>();
        const auto& m = j.at("final_mass");
        r.final_mass = {m.at("in_spoon").get<double>(), m.at("on_plate").get<double>(),
                        m.at("residue").get<double>(), m.at("airborne").get<double>()};
        for (const auto& b : j.at("breaks")) {
          r.breaks.push_back({b.at("tick").get<int>(), b.at("item").get<int>(),
                              b.at("squeeze").get<double>(), b.at("break_force").get<double>(),
                              b.at("time").get<double>()});
        }
        for (const auto& it : j.at("initial_items")) r.initial_items.push_back(item_from(it));
        for (const auto& p : j.at("phases")) r.phases.push_back(phase_from(p.get<std::string>()));
      } else {
        throw ScoopError(ErrorKind::IncompleteRecord, "unknown line type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ScoopError(ErrorKind::IncompleteRecord,
                       "line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!summary) throw ScoopError(ErrorKind::IncompleteRecord, "missing summary line");
  return r;
}

}  // namespace scoopsim
