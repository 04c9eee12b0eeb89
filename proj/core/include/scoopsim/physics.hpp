#pragma once

#include <ostream>
#include <vector>

#include "scoopsim/worldmodel.hpp"

namespace scoopsim {

struct PhysicsParams {
  double dt = 1.0 / 240.0;
  double gravity = 9.81;
  double contact_stiffness = 5e3;  // N/m
  double damping_ratio = 1.0;
  // Rolling resistance coefficient for discs (lever arm as a fraction of r).
  double rolling_resistance = 0.01;
  double fragment_fraction = 0.3;
  double residue_force_threshold = 0.1;  // N
  // Steps without contact before a tool contact episode counts as ended.
  int separation_steps = 12;
  double blowup_speed = 10.0;  // m/s
  // Upper bound on omega*h for the internal substeps.
  double max_stiffness_phase = 0.35;
};

struct MassAccount {
  double in_spoon = 0.0;
  double on_plate = 0.0;
  double residue = 0.0;
  double airborne = 0.0;

  double total() const { return in_spoon + on_plate + residue + airborne; }
};

// Advances the world by dt (one fixed physics step; internally substepped
// for stability of the penalty springs). Tools move kinematically with the
// velocities stored in world.tools. Throws NumericalBlowup.
WorldState step(WorldState world, double dt, const PhysicsParams& params = {});

// step() followed by apply_breakage_and_residue(), the per-step pipeline used
// by rollouts.
WorldState simulate_step(WorldState world, const PhysicsParams& params = {});

const std::vector<Contact>& contact_set(const WorldState& world);

// Compressive force transmitted through an item touching both tools,
// projected onto the pusher->spoon contact axis; zero otherwise.
double squeeze_force(const WorldState& world, int item_id);

WorldState apply_breakage_and_residue(WorldState world, const PhysicsParams& params = {});

MassAccount mass_accounting(const WorldState& world);
bool in_spoon(const WorldState& world, const FoodItem& item);

void write_trace_header(std::ostream& os);
// One row per item: time, item id, x, z, orientation, squeeze, broken.
void write_trace_rows(std::ostream& os, const WorldState& world);

}  // namespace scoopsim
