#pragma once

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "scoopsim/perception.hpp"
#include "scoopsim/physics.hpp"
#include "scoopsim/worldmodel.hpp"

namespace scoopsim {

struct PrimitiveOptions {
  double alpha = 1.0;
  StrategyToggles toggles;
  double push_distance = 0.13;     // full pusher travel, m
  double tilt = deg_to_rad(15.0);  // pusher tilt with angled pushing
  double t_push = 3.0;
  double t_scoop = 2.0;
  double t_transfer = 1.0;
  double pusher_offset = 0.08;   // pusher start behind x_f
  double scooper_offset = 0.07;  // lip start ahead of x_f
  double meet_offset = 0.05;
  double scoop_lift = 0.03;   // extra lift of the bowl over Scooping
  double scoop_sweep = 0.0;   // lip travel toward the pusher over Scooping
  double transfer_retreat = 0.05;
  double transfer_pitch = deg_to_rad(-10.0);
  // Scooper-only variant: the pusher is a static barrier at x_f - offset and
  // the spoon travels to its face.
  bool single_arm = false;
  double barrier_offset = 0.03;
  double control_rate = 20.0;  // Hz
  int steps_per_tick = 12;
};

struct PrimitivePlan {
  double x_f = 0.0;
  double alpha = 1.0;
  StrategyToggles toggles;
  double push_distance = 0.13;
  double theta = 0.0;
  double t_push = 3.0;
  double t_scoop = 2.0;
  double t_transfer = 1.0;
  double meet_offset = 0.05;
  double pusher_start = 0.0;  // x of the pusher face bottom
  double scooper_start = 0.0; // x of the lip
  double meet = 0.0;
  double scooper_travel = 0.02;
  double scoop_lift = 0.03;
  double scoop_sweep = 0.0;
  double transfer_retreat = 0.05;
  double transfer_pitch = 0.0;
  bool single_arm = false;
  double control_rate = 20.0;
  int steps_per_tick = 12;
  ToolGeometry geometry;

  double tick_dt() const { return 1.0 / control_rate; }
  int ticks(Phase phase) const;
};

PrimitivePlan plan_primitive(double x_f, const PrimitiveOptions& options = {});

// Tool poses at the start of Pushing.
ToolState start_tools(const PrimitivePlan& plan);

struct ToolCommand {
  ToolVelocity scooper;
  ToolVelocity pusher;
  double stamp = 0.0;
};

// Velocity command for phase progress u in [0, 1]. Throws InvalidPhase
// outside Pushing/Scooping/Transfer.
ToolCommand phase_command(const PrimitivePlan& plan, Phase phase, double u,
                          const WorldState& world);

// Lip height relative to its start over the Scooping schedule.
double scoop_lip_height(const PrimitivePlan& plan, double u);

enum class TickDecision { Continue, TerminatePushing };

// Hook consulted once per control tick before the command is issued.
class RolloutController {
 public:
  virtual ~RolloutController() = default;
  // Whether on_tick needs the side observation during Pushing.
  virtual bool wants_observation() const { return false; }
  virtual TickDecision on_tick(const WorldState& world, const SideGrid* observation,
                               Phase phase, double u, int tick) = 0;
};

struct ItemSnapshot {
  int id = 0;
  std::string class_name;
  double size_scale = 1.0;
  Pose pose;
  double mass = 0.0;
  double compression = 0.0;
  double squeeze = 0.0;
  bool broken = false;
  std::optional<int> fragment_of;
  bool in_spoon = false;
  bool scooper_contact = false;
};

struct BreakEvent {
  int tick = 0;
  int item_id = 0;
  double squeeze = 0.0;
  double break_force = 0.0;
  double time = 0.0;
};

struct TickRecord {
  int tick = 0;  // index within the phase
  Phase phase = Phase::Pushing;
  double u = 0.0;
  double time = 0.0;
  ToolCommand command;
  Pose scooper;
  Pose pusher;
  Vec2 pusher_force;
  double max_squeeze = 0.0;
  bool broke = false;
  std::vector<ItemSnapshot> items;
};

struct RolloutRecord {
  double x_f = 0.0;
  double meet = 0.0;
  double plan_alpha = 1.0;
  double realized_alpha = 1.0;
  bool terminated_early = false;
  double pusher_push_displacement = 0.0;
  double pusher_total_displacement = 0.0;
  double initial_mass = 0.0;
  std::vector<ItemSnapshot> initial_items;
  std::vector<TickRecord> ticks;
  std::vector<BreakEvent> breaks;
  // Side observations for Pushing ticks when requested.
  std::vector<SideGrid> observations;
  std::vector<Phase> phases;  // phase sequence visited
  MassAccount final_mass;
  bool complete = false;
  double max_tick_squeeze_increase = 0.0;
};

struct RolloutOptions {
  bool record_observations = false;
  std::ostream* physics_trace = nullptr;
  PhysicsParams physics;
};

// Runs Pushing, Scooping and Transfer from an Idle world. Throws PhysicsFault.
RolloutRecord run_rollout(WorldState world, const PrimitivePlan& plan,
                          RolloutController* controller = nullptr,
                          const RolloutOptions& options = {});

// NDJSON: one line per tick, final line is the outcome summary supplied by
// the caller (merged with the record's own summary fields).
void write_ndjson(std::ostream& os, const RolloutRecord& record,
                  const std::string& summary_json = "{}");
// Parses the tick lines back (observations are not serialized).
RolloutRecord read_ndjson(std::istream& is);

}  // namespace scoopsim
